//! One-dimensional Hermite functions and Gauss–Hermite quadrature.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Gauss–Hermite rule for `∫ g(t) e^{−t²} dt`, stored as nodes and the
/// scaled weights `w̃_q = w_q e^{t_q²}`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

/// Hermite functions `ψ_0..ψ_{k−1}` at `t`, orthonormal in `L²(ℝ)`.
pub fn hermite_functions(k: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    if k == 0 {
        return out;
    }
    let p0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * t * t).exp();
    out.push(p0);
    if k > 1 {
        out.push(std::f64::consts::SQRT_2 * t * p0);
    }
    for n in 1..k.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * t * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

impl GaussHermite {
    /// `q`-point rule by Golub–Welsch; exact for polynomials of degree
    /// `2q − 1`.
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParams("quadrature needs at least one node".into()));
        }
        let jac = Mat::<f64>::from_fn(q, q, |i, j| {
            if i + 1 == j {
                (j as f64 / 2.0).sqrt()
            } else if j + 1 == i {
                (i as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes = jac
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("Gauss-Hermite nodes: {e:?}")))?;
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Christoffel weights: w_q e^{t_q²} = 1 / Σ_k ψ_k(t_q)².
        let scaled_weights = nodes
            .iter()
            .map(|&t| 1.0 / hermite_functions(q, t).iter().map(|v| v * v).sum::<f64>())
            .collect();
        Ok(Self { nodes, scaled_weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Ψ[k][q] = √w̃_q ψ_k(t_q)`, so `Σ_q Ψ[a][q] f(t_q) Ψ[b][q] = ∫ ψ_a f ψ_b`
    /// whenever `f` is a polynomial of low enough degree.
    pub fn basis_table(&self, k: usize) -> Vec<Vec<f64>> {
        let mut table = vec![vec![0.0; self.len()]; k];
        for (q, (&t, &w)) in self.nodes.iter().zip(&self.scaled_weights).enumerate() {
            let psi = hermite_functions(k, t);
            let sw = w.sqrt();
            for a in 0..k {
                table[a][q] = sw * psi[a];
            }
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_moments() {
        let gh = GaussHermite::new(12).unwrap();
        let pi = std::f64::consts::PI;
        // ∫ t^{2m} e^{−t²} dt = Γ(m + ½).
        let exact = [pi.sqrt(), 0.5 * pi.sqrt(), 0.75 * pi.sqrt(), 1.875 * pi.sqrt()];
        for (m, ex) in exact.iter().enumerate() {
            let s: f64 = gh
                .nodes
                .iter()
                .zip(&gh.scaled_weights)
                .map(|(&t, &w)| w * (-t * t).exp() * t.powi(2 * m as i32))
                .sum();
            assert!((s - ex).abs() < 1e-12, "m = {m}: {s} vs {ex}");
        }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let gh = GaussHermite::new(30).unwrap();
        let psi = gh.basis_table(20);
        for a in 0..20 {
            for b in 0..20 {
                let s: f64 = (0..gh.len()).map(|q| psi[a][q] * psi[b][q]).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "({a},{b}) {s}");
            }
        }
    }
}
