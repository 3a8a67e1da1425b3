use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ModeLattice;

/// Constraint region the dynamics and the Gibbs measure live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Component of `{|φ| < B}` around the origin.
    HamiltonianBall,
    /// `{Σ|a_n|² < B}`.
    L2Ball,
    /// Unconstrained; only valid for a globally convex potential.
    WholeSpace,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::HamiltonianBall => "hamiltonian_ball",
            DomainKind::L2Ball => "l2_ball",
            DomainKind::WholeSpace => "whole_space",
        }
    }
}

/// Model parameters in reduced units (mass 1, β = 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Spatial dimension `d`.
    pub dim: usize,
    /// Nonlinearity exponent `p`.
    pub exponent: u32,
    /// Coupling `λ`; negative is focusing.
    pub coupling: f64,
    /// Friction `ν`.
    pub friction: f64,
    /// Mode cutoff `N`.
    pub cutoff: usize,
    /// Ball radius squared `B`.
    pub ball: f64,
    pub domain: DomainKind,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            dim: 1,
            exponent: 4,
            coupling: -0.05,
            friction: 1.0,
            cutoff: 0,
            ball: 1.0,
            domain: DomainKind::HamiltonianBall,
        }
    }
}

impl ModelParams {
    pub fn free_field(dim: usize, cutoff: usize, friction: f64) -> Self {
        Self {
            dim,
            exponent: 4,
            coupling: 0.0,
            friction,
            cutoff,
            ball: 1.0,
            domain: DomainKind::WholeSpace,
        }
    }

    pub fn lattice(&self) -> ModeLattice {
        ModeLattice::new(self.dim, self.cutoff)
    }

    pub fn mode_count(&self) -> usize {
        (2 * self.cutoff + 1).pow(self.dim as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.exponent;
        if !(1..=4).contains(&self.dim) {
            return Err(Error::InvalidParams(format!(
                "dimension d = {} must be in 1..=4",
                self.dim
            )));
        }
        if p % 2 != 0 || p < 4 {
            return Err(Error::InvalidParams(format!(
                "exponent p = {p} must be an even integer >= 4"
            )));
        }
        let allowed = match self.dim {
            1 | 2 => true,
            3 => p == 4 || p == 6,
            _ => p == 4,
        };
        if !allowed {
            return Err(Error::InvalidParams(format!(
                "(d, p) = ({}, {p}) outside the admissible table: d in {{1,2}} any even p, d = 3 needs p in {{4,6}}, d = 4 needs p = 4",
                self.dim
            )));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidParams("coupling lambda must be finite".into()));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "friction nu = {} must be finite and >= 0",
                self.friction
            )));
        }
        if !(self.ball.is_finite() && self.ball > 0.0) {
            return Err(Error::InvalidParams(format!(
                "ball radius B = {} must be finite and > 0",
                self.ball
            )));
        }
        if self.domain == DomainKind::WholeSpace && self.coupling < 0.0 {
            return Err(Error::InvalidParams(format!(
                "domain whole_space requires a globally convex potential (lambda >= 0), got lambda = {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelParams::default().validate().unwrap();
    }

    #[test]
    fn odd_exponent_names_constraint() {
        let p = ModelParams {
            exponent: 5,
            ..Default::default()
        };
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("even"), "{msg}");
    }

    #[test]
    fn dimension_exponent_table() {
        let ok = |d, p| {
            ModelParams {
                dim: d,
                exponent: p,
                ..Default::default()
            }
            .validate()
            .is_ok()
        };
        assert!(ok(1, 8) && ok(2, 10) && ok(3, 6) && ok(4, 4));
        assert!(!ok(3, 8) && !ok(4, 6) && !ok(5, 4) && !ok(1, 2));
    }

    #[test]
    fn whole_space_needs_convexity() {
        let p = ModelParams {
            domain: DomainKind::WholeSpace,
            coupling: -0.1,
            ..Default::default()
        };
        assert!(p.validate().unwrap_err().to_string().contains("whole_space"));
        let q = ModelParams {
            coupling: 0.3,
            ..p
        };
        q.validate().unwrap();
    }

    #[test]
    fn rejects_bad_scalars() {
        for bad in [
            ModelParams { friction: -1.0, ..Default::default() },
            ModelParams { ball: 0.0, ..Default::default() },
            ModelParams { coupling: f64::NAN, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
