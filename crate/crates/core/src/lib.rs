//! Numerical laboratory for the frequency-truncated stochastic nonlinear
//! Schrödinger equation.
//!
//! The crate is organised in four layers:
//!
//! * the field model ([`lattice`], [`params`], [`field`], [`hamiltonian`],
//!   [`convexity`]): Fourier-mode lattice, reduced Hamiltonian, gradient,
//!   Hessian and convexity certificates;
//! * the Langevin dynamics with reflecting boundaries ([`langevin`]);
//! * an independent Metropolis sampler of the Gibbs measure ([`gibbs`]);
//! * the Fokker–Planck and Witten–Hodge operators and their spectra
//!   ([`spectral`]).
//!
//! The field model, the dynamics and the sampler are generic over the scalar
//! type through [`Real`]; the `*64` aliases below fix the scalar to `f64`,
//! which is what the spectral layer consumes.

pub mod convexity;
pub mod error;
pub mod field;
pub mod gibbs;
pub mod hamiltonian;
pub mod io;
pub mod langevin;
pub mod lattice;
pub mod observables;
pub mod params;
pub mod scalar;
pub mod spectral;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
pub use field::{FieldState, ModeRecord, TangentVector};
pub use hamiltonian::{DomainCheck, Hamiltonian};
pub use lattice::ModeLattice;
pub use params::{DomainKind, ModelParams};
pub use scalar::Real;

pub type FieldState64 = FieldState<f64>;
pub type FieldState32 = FieldState<f32>;
pub type TangentVector64 = TangentVector<f64>;
pub type TangentVector32 = TangentVector<f32>;
pub type Hamiltonian64 = Hamiltonian<f64>;
pub type Hamiltonian32 = Hamiltonian<f32>;
pub type TrajectoryRecord64 = langevin::TrajectoryRecord<f64>;
pub type ConvexityCertificate = convexity::ConvexityCertificate;
