//! Hessian extremal eigenvalues and sampled convexity certificates.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{FieldState, TangentVector};
use crate::hamiltonian::Hamiltonian;
use crate::params::ModelParams;
use crate::scalar::Real;

/// Region convexity is certified on; radii are squared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `{Σ(|n|²+1)|a_n|² < radius_sq}`.
    H1Ball { radius_sq: f64 },
    /// `{|φ| < B, Σ(|n|²+1)|a_n|² < 5B}`.
    HamiltonianBall { ball: f64 },
    /// `{Σ|a_n|² < radius_sq}`.
    L2Ball { radius_sq: f64 },
}

impl Region {
    /// The set `{Σ(|n|²+1)|a_n|² < 5B}` on which convexity is claimed.
    pub fn convexity_set(ball: f64) -> Self {
        Region::H1Ball {
            radius_sq: 5.0 * ball,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremalEigs {
    pub c_local: f64,
    pub c_upper: f64,
    /// `‖Hy − θy‖` for the lower and upper Ritz pairs.
    pub residual_low: f64,
    pub residual_high: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityCertificate {
    pub c_min: f64,
    pub c_max: f64,
    pub sample_count: usize,
    pub region: Region,
    pub cutoff: usize,
    pub rng_seed: u64,
    /// Every sample converged.
    pub complete: bool,
    pub pass: bool,
    /// Hessian normalisation the bounds refer to.
    pub convention: String,
}

/// Name of the Hessian normalisation: eigenvalues of `(v, φ''v)` relative to
/// `Σ|w_n|²`, so the free field gives `2(|n|²+1)`.
pub const HESSIAN_CONVENTION: &str = "real_hessian_l2";

fn rdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Eigenvalue `k` (ascending, 0-based) of the symmetric tridiagonal matrix
/// with diagonal `a` and off-diagonal `b`, by Sturm-sequence bisection.
fn tridiag_eig(a: &[f64], b: &[f64], k: usize) -> f64 {
    let n = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < n { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    let count_below = |x: f64| {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..n {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { off / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (a[i].abs() + 1.0);
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector of the tridiagonal matrix for eigenvalue `theta`, by inverse
/// iteration.
fn tridiag_vec(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    let n = a.len();
    let shift = theta + 1e-10 * (theta.abs() + 1.0);
    let mut x = vec![1.0; n];
    for _ in 0..3 {
        // Thomas algorithm on (T − shift) y = x.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut den = a[0] - shift;
        if den == 0.0 {
            den = 1e-300;
        }
        if n > 1 {
            c[0] = b[0] / den;
        }
        d[0] = x[0] / den;
        for i in 1..n {
            let mut m = a[i] - shift - b[i - 1] * c[i - 1];
            if m == 0.0 {
                m = 1e-300;
            }
            if i + 1 < n {
                c[i] = b[i] / m;
            }
            d[i] = (x[i] - b[i - 1] * d[i - 1]) / m;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = d.iter().map(|v| v / nrm).collect();
    }
    x
}

/// Extremal eigenvalues of the real Hessian at `state` by Lanczos with full
/// reorthogonalisation, run for at most `iters` steps.
pub fn hessian_extremal_eigs<T: Real>(
    ham: &Hamiltonian<T>,
    state: &FieldState<T>,
    iters: usize,
) -> Result<ExtremalEigs> {
    state.check(ham.lattice())?;
    let m = ham.len();
    let dim = 2 * m;
    let steps = iters.clamp(1, dim);
    let apply = |x: &[Complex<T>]| -> Vec<Complex<T>> {
        ham.hessian_apply_unchecked(&state.coeffs, &TangentVector::real_direction(x.to_vec()))
            .w
    };

    // Deterministic start vector touching every real coordinate.
    let mut q: Vec<Complex<T>> = (0..m)
        .map(|k| {
            let t = k as f64;
            Complex::new(T::lit(1.0 + 0.37 * (1.3 * t).sin()), T::lit(0.9 + 0.41 * (0.7 * t).cos()))
        })
        .collect();
    let nrm = rdot(&q, &q).sqrt();
    q.iter_mut().for_each(|c| *c = *c / nrm);

    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    for j in 0..steps {
        let mut r = apply(&q);
        let a = rdot(&q, &r);
        alpha.push(a.as_f64());
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = rdot(v, &r);
                for (ri, vi) in r.iter_mut().zip(v) {
                    *ri = *ri - *vi * c;
                }
            }
        }
        let bnorm = rdot(&r, &r).sqrt();
        let scale = T::lit(alpha.iter().fold(0.0f64, |s, v| s.max(v.abs())) + 1.0);
        if j + 1 == steps || bnorm <= T::eps() * T::lit(100.0) * scale {
            break;
        }
        beta.push(bnorm.as_f64());
        q = r.iter().map(|c| *c / bnorm).collect();
    }

    let n = alpha.len();
    let lo = tridiag_eig(&alpha, &beta, 0);
    let hi = tridiag_eig(&alpha, &beta, n - 1);
    let residual = |theta: f64| {
        let s = tridiag_vec(&alpha, &beta, theta);
        let mut y = vec![Complex::new(T::zero(), T::zero()); m];
        for (sv, v) in s.iter().zip(&basis) {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi = *yi + *vi * T::lit(*sv);
            }
        }
        let hy = apply(&y);
        let th = T::lit(theta);
        hy.iter()
            .zip(&y)
            .map(|(a, b)| (*a - *b * th).norm_sqr())
            .sum::<T>()
            .sqrt()
            .as_f64()
    };
    let residual_low = residual(lo);
    let residual_high = residual(hi);
    let tol = (T::eps().as_f64()).sqrt() * 10.0 * (hi.abs() + 1.0);
    Ok(ExtremalEigs {
        c_local: lo,
        c_upper: hi,
        residual_low,
        residual_high,
        converged: residual_low <= tol && residual_high <= tol,
    })
}

/// Radius along `dir` at which the region boundary is first reached.
fn ray_exit<T: Real>(ham: &Hamiltonian<T>, region: Region, dir: &[Complex<T>]) -> f64 {
    let h1 = ham.h1_norm_sq(dir).as_f64();
    let l2 = dir.iter().map(|c| c.norm_sqr()).sum::<T>().as_f64();
    match region {
        Region::H1Ball { radius_sq } => (radius_sq / h1).sqrt(),
        Region::L2Ball { radius_sq } => (radius_sq / l2).sqrt(),
        Region::HamiltonianBall { ball } => {
            let r_cap = (5.0 * ball / h1).sqrt();
            // φ(r·dir) = r²·h1 + r^p·c for a single constant c.
            let p = ham.params().exponent as i32;
            let unit: Vec<Complex<T>> = dir.to_vec();
            let c = ham.reduced_hamiltonian_unchecked(&unit).as_f64() - h1;
            let f = |r: f64| (r * r * h1 + r.powi(p) * c).abs() - ball;
            let steps = 400;
            let mut prev = 0.0;
            for i in 1..=steps {
                let r = r_cap * i as f64 / steps as f64;
                if f(r) >= 0.0 {
                    let (mut a, mut b) = (prev, r);
                    for _ in 0..80 {
                        let mid = 0.5 * (a + b);
                        if f(mid) >= 0.0 {
                            b = mid;
                        } else {
                            a = mid;
                        }
                    }
                    return a;
                }
                prev = r;
            }
            r_cap
        }
    }
}

/// Draws a state: Gaussian direction in the H¹ metric (L² for the L² ball),
/// radius `r_exit · U^{1/2M}` along the ray, then a membership filter.
pub fn sample_region<T: Real, R: Rng>(
    ham: &Hamiltonian<T>,
    region: Region,
    rng: &mut R,
) -> FieldState<T> {
    let m = ham.len();
    loop {
        let dir: Vec<Complex<T>> = (0..m)
            .map(|k| {
                let s = match region {
                    Region::L2Ball { .. } => 1.0,
                    _ => 1.0 / ham.weights()[k].as_f64().sqrt(),
                };
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                Complex::new(T::lit(x * s), T::lit(y * s))
            })
            .collect();
        let r_exit = ray_exit(ham, region, &dir);
        let u: f64 = rng.random();
        let r = r_exit * u.powf(1.0 / (2 * m) as f64);
        let state = FieldState::from_coeffs(dir.iter().map(|&c| c * T::lit(r)).collect());
        if region_contains(ham, region, &state.coeffs) {
            return state;
        }
    }
}

pub fn region_contains<T: Real>(ham: &Hamiltonian<T>, region: Region, a: &[Complex<T>]) -> bool {
    match region {
        Region::H1Ball { radius_sq } => ham.h1_norm_sq(a).as_f64() < radius_sq,
        Region::L2Ball { radius_sq } => {
            a.iter().map(|c| c.norm_sqr()).sum::<T>().as_f64() < radius_sq
        }
        Region::HamiltonianBall { ball } => {
            let phi = ham.reduced_hamiltonian_unchecked(a).as_f64();
            phi.abs() < ball && ham.h1_norm_sq(a).as_f64() < 5.0 * ball
        }
    }
}

pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn convexity_certificate<T: Real>(
    params: &ModelParams,
    region: Region,
    n_samples: usize,
    rng_seed: u64,
) -> Result<ConvexityCertificate> {
    let ham = Hamiltonian::<T>::new(params)?;
    let iters = (2 * ham.len()).min(400);
    let results: Vec<Result<ExtremalEigs>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(rng_seed, i as u64);
            let s = sample_region(&ham, region, &mut rng);
            hessian_extremal_eigs(&ham, &s, iters)
        })
        .collect();
    let mut c_min = f64::INFINITY;
    let mut c_max = f64::NEG_INFINITY;
    let mut complete = true;
    for r in results {
        let e = r?;
        complete &= e.converged;
        c_min = c_min.min(e.c_local);
        c_max = c_max.max(e.c_upper);
    }
    let pass = complete && c_min > 0.0 && c_max.is_finite();
    Ok(ConvexityCertificate {
        c_min,
        c_max,
        sample_count: n_samples,
        region,
        cutoff: params.cutoff,
        rng_seed,
        complete,
        pass,
        convention: HESSIAN_CONVENTION.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEquivalenceReport {
    pub sample_count: usize,
    /// Fraction with `½‖f‖_{H¹} < √φ(f) < 2‖f‖_{H¹}`.
    pub fraction_ok: f64,
    pub worst_ratio_low: f64,
    pub worst_ratio_high: f64,
    pub pass: bool,
}

/// Two-sided equivalence of `√φ` and the H¹ norm on the set
/// `{Σ(|n|²+1)|a_n|² < 5B}`.
pub fn norm_equivalence_check<T: Real>(
    params: &ModelParams,
    n_samples: usize,
    rng_seed: u64,
) -> Result<NormEquivalenceReport> {
    let ham = Hamiltonian::<T>::new(params)?;
    let region = Region::convexity_set(params.ball);
    let mut ok = 0usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut rng = sample_rng(rng_seed, 0);
    for i in 0..n_samples {
        // Sample 0 is the worst case along the zero-mode axis.
        let s = if i == 0 {
            let mut s = ham.zero_state();
            let k0 = ham.lattice().zero_mode();
            s.coeffs[k0] = Complex::new(T::lit((5.0 * params.ball).sqrt() * (1.0 - 1e-9)), T::zero());
            s
        } else {
            sample_region(&ham, region, &mut rng)
        };
        let h1 = ham.h1_norm_sq(&s.coeffs).as_f64().sqrt();
        let phi = ham.reduced_hamiltonian_unchecked(&s.coeffs).as_f64();
        let ratio = if phi >= 0.0 { phi.sqrt() / h1 } else { f64::NAN };
        if ratio > 0.5 && ratio < 2.0 {
            ok += 1;
        }
        if ratio.is_nan() {
            lo = f64::NAN;
        } else if !lo.is_nan() {
            lo = lo.min(ratio);
        }
        hi = hi.max(ratio);
    }
    let fraction_ok = ok as f64 / n_samples.max(1) as f64;
    Ok(NormEquivalenceReport {
        sample_count: n_samples,
        fraction_ok,
        worst_ratio_low: lo,
        worst_ratio_high: hi,
        pass: fraction_ok == 1.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingProbe {
    pub cutoff: usize,
    pub sample_count: usize,
    /// Empirical lower estimate of `C_{d,p}`.
    pub max_ratio: f64,
}

/// `max ⨍|u|^{p−2}|W|² / (‖u‖_{H¹}^{p−2} ‖W‖²_{H¹})` over random `(u, W)`.
pub fn sobolev_embedding_probe<T: Real>(
    params: &ModelParams,
    n_samples: usize,
    rng_seed: u64,
) -> Result<EmbeddingProbe> {
    let ham = Hamiltonian::<T>::new(params)?;
    let mut rng = sample_rng(rng_seed, 0);
    let mut best = 0.0f64;
    let region = Region::H1Ball { radius_sq: 1.0 };
    for _ in 0..n_samples {
        let u = sample_region(&ham, region, &mut rng);
        let w = sample_region(&ham, region, &mut rng);
        best = best.max(embedding_ratio(&ham, &u.coeffs, &w.coeffs));
    }
    Ok(EmbeddingProbe {
        cutoff: params.cutoff,
        sample_count: n_samples,
        max_ratio: best,
    })
}

pub fn embedding_ratio<T: Real>(ham: &Hamiltonian<T>, u: &[Complex<T>], w: &[Complex<T>]) -> f64 {
    let p = ham.params().exponent as i32;
    let uu = ham.grid().to_physical(u);
    let ww = ham.grid().to_physical(w);
    let num = ham
        .grid()
        .mean(uu.iter().zip(&ww).map(|(a, b)| a.norm_sqr().powi(p / 2 - 1) * b.norm_sqr()))
        .as_f64();
    let hu = ham.h1_norm_sq(u).as_f64();
    let hw = ham.h1_norm_sq(w).as_f64();
    if num == 0.0 {
        return 0.0;
    }
    num / (hu.powi(p / 2 - 1) * hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DomainKind;

    fn params(n: usize, lambda: f64) -> ModelParams {
        ModelParams {
            dim: 1,
            exponent: 4,
            coupling: lambda,
            friction: 1.0,
            cutoff: n,
            ball: 1.0,
            domain: DomainKind::HamiltonianBall,
        }
    }

    #[test]
    fn tridiagonal_bisection() {
        // Eigenvalues of the 1-D Laplacian tridiag(−1, 2, −1), n = 5.
        let a = vec![2.0; 5];
        let b = vec![-1.0; 4];
        for k in 0..5 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / 6.0).cos();
            assert!((tridiag_eig(&a, &b, k) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn free_field_extremes() {
        let ham = Hamiltonian::<f64>::new(&params(4, 0.0)).unwrap();
        let s = ham.zero_state();
        let e = hessian_extremal_eigs(&ham, &s, 100).unwrap();
        assert!((e.c_local - 2.0).abs() < 1e-10);
        assert!((e.c_upper - 34.0).abs() < 1e-10);
        assert!(e.converged);
    }

    #[test]
    fn free_field_certificate_is_two() {
        let c = convexity_certificate::<f64>(&params(3, 0.0), Region::convexity_set(1.0), 8, 3).unwrap();
        assert!((c.c_min - 2.0).abs() < 1e-9);
        assert!(c.pass);
    }

    #[test]
    fn defocusing_certificate_passes() {
        let c = convexity_certificate::<f64>(&params(3, 0.8), Region::HamiltonianBall { ball: 1.0 }, 16, 5)
            .unwrap();
        assert!(c.pass && c.c_min >= 2.0 - 1e-9, "{c:?}");
    }

    #[test]
    fn samples_stay_in_region() {
        let ham = Hamiltonian::<f64>::new(&params(4, -0.05)).unwrap();
        let mut rng = sample_rng(9, 0);
        for region in [
            Region::HamiltonianBall { ball: 1.0 },
            Region::L2Ball { radius_sq: 0.5 },
            Region::convexity_set(1.0),
        ] {
            for _ in 0..50 {
                let s = sample_region(&ham, region, &mut rng);
                assert!(region_contains(&ham, region, &s.coeffs));
            }
        }
    }

    #[test]
    fn norm_equivalence_examples() {
        assert!(norm_equivalence_check::<f64>(&params(2, 0.0), 20, 1).unwrap().pass);
        assert!(norm_equivalence_check::<f64>(&params(2, -0.01), 50, 1).unwrap().pass);
        assert!(!norm_equivalence_check::<f64>(&params(0, -10.0), 5, 1).unwrap().pass);
    }

    #[test]
    fn embedding_constant_example() {
        let ham = Hamiltonian::<f64>::new(&params(0, 0.1)).unwrap();
        let one = [Complex::new(1.0, 0.0)];
        assert!((embedding_ratio(&ham, &one, &one) - 1.0).abs() < 1e-15);
        assert_eq!(embedding_ratio(&ham, &[Complex::new(0.0, 0.0)], &one), 0.0);
    }
}
