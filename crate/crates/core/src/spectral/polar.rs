//! Radial potentials `φ = f(r²)` on a disk: `L` separates over angular
//! modes `e^{imθ}` into tridiagonal radial blocks.
//!
//! Cells are `[i h, (i+1) h]` with centres `r_i = (i + ½) h`. Radial fluxes
//! use the exponential weighting `e^{φ_i − φ_j}`, which keeps `e^{−φ}`
//! in the kernel of the `m = 0` block exactly. The no-flux condition is
//! imposed by dropping the outer face. Unknowns are `√(2π r_i h) P_i`, so
//! the real part of every block is symmetric.

use faer::c64;

use super::grid::bisect;
use super::operator::{BasisDescriptor, DiscreteOperator, OperatorTag};
use super::potential::PotentialDescriptor;
use crate::error::{Error, Result};
use crate::params::{DomainKind, ModelParams};

pub struct PolarGrid {
    pot: PotentialDescriptor,
    pub nu: f64,
    pub radius: f64,
    pub cells: usize,
    pub m_max: usize,
}

impl PolarGrid {
    pub fn new(pot: &PotentialDescriptor, nu: f64, radius: f64, cells: usize, m_max: usize) -> Result<Self> {
        if pot.radial.is_none() {
            return Err(Error::InvalidParams("polar separation needs a radial potential".into()));
        }
        if cells < 2 || !(radius > 0.0) {
            return Err(Error::InvalidParams("polar grid needs cells >= 2 and radius > 0".into()));
        }
        Ok(Self {
            pot: pot.clone(),
            nu,
            radius,
            cells,
            m_max,
        })
    }

    /// Disk matching the configured domain: `f(R²) = B` for the Hamiltonian
    /// ball, `R² = B` for the L² ball. `whole_radius` is used for the whole
    /// space.
    pub fn domain_radius(params: &ModelParams, pot: &PotentialDescriptor, whole_radius: f64) -> Result<f64> {
        let radial = pot
            .radial
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("polar separation needs a radial potential".into()))?;
        match params.domain {
            DomainKind::L2Ball => Ok(params.ball.sqrt()),
            DomainKind::HamiltonianBall => {
                Ok(bisect(|s| (radial.f)(s) - params.ball, 0.0, 5.0 * params.ball)?.sqrt())
            }
            DomainKind::WholeSpace => Ok(whole_radius),
        }
    }

    fn h(&self) -> f64 {
        self.radius / self.cells as f64
    }

    fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    fn phi(&self, i: usize) -> f64 {
        let r = self.r(i);
        (self.pot.radial.as_ref().unwrap().f)(r * r)
    }

    /// Tridiagonal block for angular mode `m`: `(sub, diag, sup)`.
    pub fn block(&self, m: i64) -> (Vec<f64>, Vec<c64>, Vec<f64>) {
        let n = self.cells;
        let h = self.h();
        let d = 0.25 * self.nu;
        let df = &self.pot.radial.as_ref().unwrap().df;
        let phi: Vec<f64> = (0..n).map(|i| self.phi(i)).collect();
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let r = self.r(i);
            let rp = (i + 1) as f64 * h;
            let rm = i as f64 * h;
            let mut re = 0.0;
            if i + 1 < n {
                re += rp * (phi[i] - phi[i + 1]).exp();
            }
            if i > 0 {
                re += rm * (phi[i] - phi[i - 1]).exp();
            }
            re = d * re / (r * h * h) + d * (m * m) as f64 / (r * r);
            diag.push(c64::new(re, -(m as f64) * df(r * r)));
            if i + 1 < n {
                // Symmetrised by √(r_i r_{i+1}).
                off.push(-d * rp / (h * h * (r * self.r(i + 1)).sqrt()));
            }
        }
        (off.clone(), diag, off)
    }

    /// Angular modes in block order.
    pub fn modes(&self) -> Vec<i64> {
        let m = self.m_max as i64;
        (-m..=m).collect()
    }

    /// Unknowns of a function on the disk: angular Fourier coefficients by
    /// the trapezoidal rule, scaled by `√(2π r_i h)`.
    pub fn sample(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<c64> {
        let n = self.cells;
        let modes = self.modes();
        let nt = 4 * self.m_max + 16;
        let h = self.h();
        let mut out = vec![c64::new(0.0, 0.0); n * modes.len()];
        for i in 0..n {
            let r = self.r(i);
            let vals: Vec<f64> = (0..nt)
                .map(|t| {
                    let th = 2.0 * std::f64::consts::PI * t as f64 / nt as f64;
                    f(&[r * th.cos(), r * th.sin()])
                })
                .collect();
            let w = (2.0 * std::f64::consts::PI * r * h).sqrt();
            for (b, &m) in modes.iter().enumerate() {
                let c: c64 = vals
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let th = 2.0 * std::f64::consts::PI * t as f64 / nt as f64;
                        v * c64::new(0.0, -(m as f64) * th).exp()
                    })
                    .sum::<c64>()
                    / nt as f64;
                out[b * n + i] = c * w;
            }
        }
        out
    }

    pub fn operator(&self) -> Result<DiscreteOperator> {
        let n = self.cells;
        let modes = self.modes();
        let mut entries = Vec::with_capacity(modes.len() * 3 * n);
        let mut blocks = Vec::with_capacity(modes.len());
        for (b, &m) in modes.iter().enumerate() {
            let off = b * n;
            let (sub, diag, sup) = self.block(m);
            for i in 0..n {
                entries.push((off + i, off + i, diag[i]));
                if i + 1 < n {
                    entries.push((off + i + 1, off + i, c64::new(sub[i], 0.0)));
                    entries.push((off + i, off + i + 1, c64::new(sup[i], 0.0)));
                }
            }
            blocks.push((off, n));
        }
        let basis = BasisDescriptor::Polar {
            cells: n,
            radius: self.radius,
            m_max: self.m_max,
        };
        let total = n * modes.len();
        let mut op = DiscreteOperator::from_triplets(OperatorTag::L, basis, total, &entries)?;
        op.blocks = Some(blocks);
        op.friction = self.nu;
        op.params = self.pot.params.clone();
        op.potential = self.pot.name.clone();
        let mut g = vec![c64::new(0.0, 0.0); total];
        let zero = self.m_max * n;
        let h = self.h();
        for i in 0..n {
            g[zero + i] = c64::new((2.0 * std::f64::consts::PI * self.r(i) * h).sqrt() * (-self.phi(i)).exp(), 0.0);
        }
        let s = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        op.ground_state = Some(g.into_iter().map(|c| c / s).collect());
        Ok(op)
    }
}
