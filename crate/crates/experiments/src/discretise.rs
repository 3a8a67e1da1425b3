//! Chooses and builds a discretisation of the Fokker–Planck operator for a
//! model.

use anyhow::{bail, Result};
use faer::c64;
use snls_core::spectral::galerkin::HermiteGalerkin;
use snls_core::spectral::grid::{FpGrid, GridBoundary, GridDomain};
use snls_core::spectral::operator::{DiscreteOperator, OperatorTag};
use snls_core::spectral::polar::PolarGrid;
use snls_core::spectral::potential::PotentialDescriptor;
use snls_core::{DomainKind, ModelParams};

use crate::config::{BasisChoice, SpectrumOptions};

pub enum Discretisation {
    Galerkin { basis: HermiteGalerkin, level: usize },
    Polar(PolarGrid),
    Grid { grid: FpGrid, boundary: GridBoundary },
}

impl Discretisation {
    pub fn new(model: &ModelParams, opts: &SpectrumOptions) -> Result<Self> {
        let pot = PotentialDescriptor::from_model(model)?;
        let nu = model.friction;
        let basis = match opts.basis {
            BasisChoice::Auto if model.domain == DomainKind::WholeSpace => BasisChoice::Galerkin,
            BasisChoice::Auto if pot.radial.is_some() => BasisChoice::Polar,
            BasisChoice::Auto => BasisChoice::Grid,
            b => b,
        };
        if basis != BasisChoice::Galerkin && opts.tag != OperatorTag::L {
            bail!("only the Hermite basis assembles {:?}; polar and grid bases give L", opts.tag);
        }
        Ok(match basis {
            BasisChoice::Galerkin => {
                if model.domain != DomainKind::WholeSpace {
                    bail!("the Hermite basis lives on the whole space; set model.domain = \"whole_space\"");
                }
                if model.coupling < 0.0 {
                    bail!("focusing potentials are not normalisable on the whole space; use a ball domain");
                }
                Discretisation::Galerkin {
                    basis: HermiteGalerkin::new(&pot, nu)?,
                    level: opts.level,
                }
            }
            BasisChoice::Polar => {
                let r = PolarGrid::domain_radius(model, &pot, opts.whole_radius)?;
                Discretisation::Polar(PolarGrid::new(&pot, nu, r, opts.cells, opts.m_max)?)
            }
            BasisChoice::Grid | BasisChoice::Auto => {
                let domain = match model.domain {
                    DomainKind::WholeSpace => GridDomain::disk(opts.whole_radius * opts.whole_radius),
                    _ => GridDomain::from_params(model, &pot)?,
                };
                Discretisation::Grid {
                    grid: FpGrid::new(&pot, domain, nu, opts.cells)?,
                    boundary: opts.boundary,
                }
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Discretisation::Galerkin { .. } => "galerkin",
            Discretisation::Polar(_) => "polar",
            Discretisation::Grid { .. } => "grid",
        }
    }

    pub fn operator(&self, tag: OperatorTag) -> Result<DiscreteOperator> {
        Ok(match self {
            Discretisation::Galerkin { basis, level } => basis.operator(tag, *level)?,
            Discretisation::Polar(p) => p.operator()?,
            Discretisation::Grid { grid, boundary } => grid.operator(*boundary)?,
        })
    }

    /// Unknowns representing `f` (0-forms only).
    pub fn sample(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<c64>> {
        Ok(match self {
            Discretisation::Galerkin { basis, level } => {
                basis.project(f, *level)?.into_iter().map(|v| c64::new(v, 0.0)).collect()
            }
            Discretisation::Polar(p) => p.sample(f),
            Discretisation::Grid { grid, .. } => grid.sample(f),
        })
    }
}
