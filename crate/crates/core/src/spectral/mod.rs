//! Fokker–Planck and Witten-Laplacian discretisations and their spectra.

pub mod hermite;
pub mod operator;
pub mod potential;
pub mod galerkin;
pub mod eigen;
pub mod grid;
pub mod polar;
pub mod checks;
pub mod semigroup;
