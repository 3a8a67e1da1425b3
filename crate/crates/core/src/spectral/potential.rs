//! Potentials on `ℝ^D` in real coordinates `(x_n, y_n) = (Re a_n, Im a_n)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{FieldState, TangentVector};
use crate::hamiltonian::Hamiltonian;
use crate::params::ModelParams;

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// `φ(x) = f(|x|²)` on `ℝ²`, with `f` and `f'`.
#[derive(Clone)]
pub struct RadialProfile {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RadialProfile")
    }
}

/// The stationary density of the operators built from a descriptor is
/// `e^{−φ}` in the conjugated picture; this tag records that.
pub const GROUND_STATE_CONVENTION: &str = "ground_state_exp_minus_phi";

#[derive(Clone)]
pub struct PotentialDescriptor {
    pub name: String,
    /// Real dimension `D`.
    pub dim: usize,
    /// Coordinates come in `(x, y)` pairs carrying a Hamiltonian rotation.
    pub paired: bool,
    value: Arc<ScalarFn>,
    grad: Arc<VectorFn>,
    /// Row-major `D × D`.
    hess: Arc<VectorFn>,
    /// Total degree when `φ` is a polynomial.
    pub poly_degree: Option<usize>,
    /// `ω_j` with `φ ≈ Σ ω_j x_j²` near the origin; sets the Hermite scaling.
    pub quadratic_freqs: Vec<f64>,
    pub radial: Option<RadialProfile>,
    pub convention: &'static str,
    pub params: Option<ModelParams>,
}

impl fmt::Debug for PotentialDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialDescriptor")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("paired", &self.paired)
            .field("poly_degree", &self.poly_degree)
            .finish()
    }
}

fn pack(x: &[f64]) -> Vec<Complex<f64>> {
    x.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect()
}

impl PotentialDescriptor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        paired: bool,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        poly_degree: Option<usize>,
        quadratic_freqs: Vec<f64>,
    ) -> Result<Self> {
        if paired && dim % 2 != 0 {
            return Err(Error::InvalidParams("paired potential needs an even dimension".into()));
        }
        let d = Self {
            name: name.into(),
            dim,
            paired,
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            poly_degree,
            quadratic_freqs,
            radial: None,
            convention: GROUND_STATE_CONVENTION,
            params: None,
        };
        d.spot_check()?;
        Ok(d)
    }

    /// The model potential `φ` of `params` in real coordinates.
    pub fn from_model(params: &ModelParams) -> Result<Self> {
        let ham = Arc::new(Hamiltonian::<f64>::new(params)?);
        let m = ham.len();
        let dim = 2 * m;
        let h1 = ham.clone();
        let h2 = ham.clone();
        let h3 = ham.clone();
        let freqs: Vec<f64> = ham.weights().iter().flat_map(|&w| [w, w]).collect();
        let mut d = Self::new(
            format!(
                "model(d={}, p={}, lambda={}, N={})",
                params.dim, params.exponent, params.coupling, params.cutoff
            ),
            dim,
            true,
            move |x| h1.reduced_hamiltonian_unchecked(&pack(x)),
            move |x| {
                let (_, g) = h2.energy_and_gradient_unchecked(&pack(x));
                g.iter().flat_map(|c| [2.0 * c.re, 2.0 * c.im]).collect()
            },
            move |x| {
                let a = FieldState::from_coeffs(pack(x));
                let n = x.len();
                let mut out = vec![0.0; n * n];
                for j in 0..n {
                    let mut w = vec![Complex::new(0.0, 0.0); n / 2];
                    w[j / 2] = if j % 2 == 0 { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 1.0) };
                    let hv = h3.hessian_apply_unchecked(&a.coeffs, &TangentVector::real_direction(w));
                    for (k, c) in hv.w.iter().enumerate() {
                        out[(2 * k) * n + j] = c.re;
                        out[(2 * k + 1) * n + j] = c.im;
                    }
                }
                out
            },
            Some(if params.coupling == 0.0 { 2 } else { params.exponent as usize }),
            freqs,
        )?;
        if params.cutoff == 0 {
            let c = 2.0 * params.coupling / params.exponent as f64;
            let e = params.exponent as f64 / 2.0;
            d.radial = Some(RadialProfile {
                f: Arc::new(move |s| s + c * s.powf(e)),
                df: Arc::new(move |s| 1.0 + c * e * s.powf(e - 1.0)),
            });
        }
        d.params = Some(params.clone());
        Ok(d)
    }

    /// `φ = α Σ x_j²`.
    pub fn harmonic(alpha: f64, dim: usize, paired: bool) -> Result<Self> {
        let mut d = Self::new(
            format!("harmonic(alpha={alpha}, dim={dim})"),
            dim,
            paired,
            move |x| alpha * x.iter().map(|v| v * v).sum::<f64>(),
            move |x| x.iter().map(|v| 2.0 * alpha * v).collect(),
            move |x| {
                let n = x.len();
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    h[i * n + i] = 2.0 * alpha;
                }
                h
            },
            Some(2),
            vec![alpha; dim],
        )?;
        if dim == 2 {
            d.radial = Some(RadialProfile {
                f: Arc::new(move |s| alpha * s),
                df: Arc::new(move |_| alpha),
            });
        }
        Ok(d)
    }

    /// `φ = ½(x² + y²) + Σ c_k m_k(x, y)` with cubic monomials
    /// `x³, x²y, xy², y³`; a non-convex test potential for grid studies.
    pub fn cubic_quadratic(c: [f64; 4]) -> Result<Self> {
        Self::new(
            format!("cubic_quadratic({c:?})"),
            2,
            true,
            move |p| {
                let (x, y) = (p[0], p[1]);
                0.5 * (x * x + y * y) + c[0] * x * x * x + c[1] * x * x * y + c[2] * x * y * y + c[3] * y * y * y
            },
            move |p| {
                let (x, y) = (p[0], p[1]);
                vec![
                    x + 3.0 * c[0] * x * x + 2.0 * c[1] * x * y + c[2] * y * y,
                    y + c[1] * x * x + 2.0 * c[2] * x * y + 3.0 * c[3] * y * y,
                ]
            },
            move |p| {
                let (x, y) = (p[0], p[1]);
                let hxx = 1.0 + 6.0 * c[0] * x + 2.0 * c[1] * y;
                let hxy = 2.0 * c[1] * x + 2.0 * c[2] * y;
                let hyy = 1.0 + 2.0 * c[2] * x + 6.0 * c[3] * y;
                vec![hxx, hxy, hxy, hyy]
            },
            Some(3),
            vec![0.5, 0.5],
        )
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn hess(&self, x: &[f64]) -> Vec<f64> {
        (self.hess)(x)
    }

    /// `Δφ`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let h = self.hess(x);
        (0..self.dim).map(|i| h[i * self.dim + i]).sum()
    }

    /// `|∇φ|² − Δφ`, the potential of `Σ z_j^* z_j`.
    pub fn witten_potential(&self, x: &[f64]) -> f64 {
        let g = self.grad(x);
        g.iter().map(|v| v * v).sum::<f64>() - self.laplacian(x)
    }

    /// Transport field `b` with `b_x = ½ φ_y`, `b_y = −½ φ_x` per pair; the
    /// antisymmetric part of `L` is `b·∇`. Zero for unpaired potentials.
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        if !self.paired {
            return vec![0.0; self.dim];
        }
        let g = self.grad(x);
        g.chunks_exact(2).flat_map(|c| [0.5 * c[1], -0.5 * c[0]]).collect()
    }

    /// `Ã = ¼(ν I − J)`, `J = [[0, 1], [−1, 0]]` per pair, row-major.
    pub fn deformation(&self, nu: f64) -> Vec<f64> {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 0.25 * nu;
        }
        if self.paired {
            for p in 0..n / 2 {
                let (x, y) = (2 * p, 2 * p + 1);
                a[x * n + y] = -0.25;
                a[y * n + x] = 0.25;
            }
        }
        a
    }

    /// Gradient and Hessian against central differences at a few points.
    fn spot_check(&self) -> Result<()> {
        let n = self.dim;
        for s in 0..3 {
            let x: Vec<f64> = (0..n).map(|i| 0.1 * (1.0 + i as f64 + s as f64).sin()).collect();
            let g = self.grad(&x);
            let hm = self.hess(&x);
            if g.len() != n || hm.len() != n * n {
                return Err(Error::InvalidParams(format!("potential '{}' returns wrong shapes", self.name)));
            }
            let scale = 1.0 + g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..n {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (self.value(&xp) - self.value(&xm)) / (2.0 * h);
                if (fd - g[i]).abs() > 1e-6 * scale {
                    return Err(Error::InvalidParams(format!(
                        "potential '{}': gradient component {i} disagrees with finite differences ({} vs {fd})",
                        self.name, g[i]
                    )));
                }
                let gp = self.grad(&xp);
                let gm = self.grad(&xm);
                for j in 0..n {
                    let fdh = (gp[j] - gm[j]) / (2.0 * h);
                    if (fdh - hm[j * n + i]).abs() > 1e-5 * (1.0 + hm[j * n + i].abs()) * scale {
                        return Err(Error::InvalidParams(format!(
                            "potential '{}': Hessian entry ({j},{i}) disagrees with finite differences",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DomainKind;

    #[test]
    fn model_potential_matches_radial_profile() {
        let p = ModelParams {
            coupling: -0.05,
            cutoff: 0,
            domain: DomainKind::HamiltonianBall,
            ..Default::default()
        };
        let pot = PotentialDescriptor::from_model(&p).unwrap();
        let rad = pot.radial.clone().unwrap();
        let x = [0.3, -0.7];
        let s = 0.09 + 0.49;
        assert!((pot.value(&x) - (rad.f)(s)).abs() < 1e-15);
        let g = pot.grad(&x);
        assert!((g[0] - 2.0 * x[0] * (rad.df)(s)).abs() < 1e-14);
    }

    #[test]
    fn model_hessian_is_symmetric() {
        let p = ModelParams {
            coupling: 0.3,
            cutoff: 1,
            ..Default::default()
        };
        let pot = PotentialDescriptor::from_model(&p).unwrap();
        let x: Vec<f64> = (0..6).map(|i| 0.2 * (i as f64 - 2.5)).collect();
        let h = pot.hess(&x);
        for i in 0..6 {
            for j in 0..6 {
                assert!((h[i * 6 + j] - h[j * 6 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transport_is_orthogonal_to_gradient() {
        let pot = PotentialDescriptor::cubic_quadratic([0.1, -0.2, 0.05, 0.3]).unwrap();
        let x = [0.4, -0.2];
        let b = pot.transport(&x);
        let g = pot.grad(&x);
        assert!((b[0] * g[0] + b[1] * g[1]).abs() < 1e-15);
    }

    #[test]
    fn bad_gradient_is_caught() {
        let r = PotentialDescriptor::new(
            "broken",
            1,
            false,
            |x| x[0] * x[0],
            |x| vec![3.0 * x[0]],
            |_| vec![2.0],
            Some(2),
            vec![1.0],
        );
        assert!(r.is_err());
    }
}
