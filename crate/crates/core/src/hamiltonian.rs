//! Reduced Hamiltonian `φ(a) = Σ(|n|²+1)|a_n|² + (2λ/p) ⨍|u|^p` and its
//! derivatives.
//!
//! `gradient` returns `g_n = ∂φ/∂ā_n`. The directional derivative along `δ`
//! is `2 Re Σ conj(g_n) δ_n`, so the gradient of `φ` in the real coordinates
//! `(Re a_n, Im a_n)` is `2g` packed as a complex number.

use num_complex::Complex;
use serde::Serialize;

use crate::error::Result;
use crate::field::{FieldState, TangentVector};
use crate::lattice::ModeLattice;
use crate::params::{DomainKind, ModelParams};
use crate::scalar::Real;
use crate::transform::SpectralGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainCheck<T> {
    pub inside: bool,
    /// `B − constraint`; `+∞` on the whole space.
    pub margin: T,
}

#[derive(Debug)]
pub struct Hamiltonian<T: Real> {
    params: ModelParams,
    lattice: ModeLattice,
    grid: SpectralGrid<T>,
    /// `|n|² + 1` per mode.
    weights: Vec<T>,
    lambda: T,
    p: i32,
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> Hamiltonian<T> {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let lattice = params.lattice();
        let grid = SpectralGrid::new(&lattice, params.exponent as usize);
        let weights = (0..lattice.len())
            .map(|k| T::lit(lattice.norm_sq(k) as f64 + 1.0))
            .collect();
        Ok(Self {
            params: params.clone(),
            lattice,
            grid,
            weights,
            lambda: T::lit(params.coupling),
            p: params.exponent as i32,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn lattice(&self) -> &ModeLattice {
        &self.lattice
    }

    pub fn grid(&self) -> &SpectralGrid<T> {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn zero_state(&self) -> FieldState<T> {
        FieldState::zeros(self.len())
    }

    fn quadratic(&self, a: &[Complex<T>]) -> T {
        a.iter()
            .zip(&self.weights)
            .map(|(c, &w)| w * c.norm_sqr())
            .sum()
    }

    /// `(2λ/p) ⨍|u|^p` given `u` on the grid.
    fn potential_from_physical(&self, u: &[Complex<T>]) -> T {
        let half = self.p / 2;
        let mean = self.grid.mean(u.iter().map(|z| z.norm_sqr().powi(half)));
        T::lit(2.0) * self.lambda / T::lit(self.p as f64) * mean
    }

    /// Nonlinear part of the gradient, `λ coef(|u|^{p-2} u)`.
    fn nonlinear_gradient(&self, u: &[Complex<T>]) -> Vec<Complex<T>> {
        let e = self.p / 2 - 1;
        let f = u.iter().map(|&z| z * z.norm_sqr().powi(e)).collect();
        self.grid
            .coefficients(f)
            .into_iter()
            .map(|c| c * self.lambda)
            .collect()
    }

    pub fn reduced_hamiltonian(&self, state: &FieldState<T>) -> Result<T> {
        state.check(&self.lattice)?;
        Ok(self.reduced_hamiltonian_unchecked(&state.coeffs))
    }

    /// Same as [`reduced_hamiltonian`](Self::reduced_hamiltonian) without the
    /// finiteness check; used on hot paths.
    pub fn reduced_hamiltonian_unchecked(&self, a: &[Complex<T>]) -> T {
        let q = self.quadratic(a);
        if self.lambda == T::zero() {
            return q;
        }
        let u = self.grid.to_physical(a);
        q + self.potential_from_physical(&u)
    }

    pub fn gradient(&self, state: &FieldState<T>) -> Result<Vec<Complex<T>>> {
        state.check(&self.lattice)?;
        Ok(self.energy_and_gradient_unchecked(&state.coeffs).1)
    }

    /// `(φ, ∂φ/∂ā)` from a single transform pair.
    pub fn energy_and_gradient_unchecked(&self, a: &[Complex<T>]) -> (T, Vec<Complex<T>>) {
        let q = self.quadratic(a);
        let mut g: Vec<Complex<T>> = a
            .iter()
            .zip(&self.weights)
            .map(|(&c, &w)| c * w)
            .collect();
        if self.lambda == T::zero() {
            return (q, g);
        }
        let u = self.grid.to_physical(a);
        let v = self.potential_from_physical(&u);
        for (gi, ni) in g.iter_mut().zip(self.nonlinear_gradient(&u)) {
            *gi = *gi + ni;
        }
        (q + v, g)
    }

    /// `h_φ = (2 ∂φ/∂a_n, −2 ∂φ/∂ā_n)` in the paired convention.
    pub fn hamiltonian_vector_field(&self, state: &FieldState<T>) -> Result<TangentVector<T>> {
        let g = self.gradient(state)?;
        let two = T::lit(2.0);
        Ok(TangentVector {
            w: g.iter().map(|c| c.conj() * two).collect(),
            conj_w: g.iter().map(|&c| -c * two).collect(),
        })
    }

    /// `∇φ = (∂φ/∂ā_n, ∂φ/∂a_n)` in the paired convention.
    pub fn paired_gradient(&self, state: &FieldState<T>) -> Result<TangentVector<T>> {
        let g = self.gradient(state)?;
        Ok(TangentVector::real_direction(g))
    }

    /// `Σ(|n|^{2s} + 1)|a_n|²`.
    pub fn sobolev_norm_sq(&self, state: &FieldState<T>, s: T) -> T {
        sobolev_norm_sq(&self.lattice, &state.coeffs, s)
    }

    /// `Σ(|n|²+1)|a_n|²`.
    pub fn h1_norm_sq(&self, a: &[Complex<T>]) -> T {
        self.quadratic(a)
    }

    /// Membership in the configured domain. The Hamiltonian ball also
    /// requires `Σ(|n|²+1)|a_n|² < 5B`, which selects the component of
    /// `{|φ| < B}` around the origin.
    pub fn in_domain(&self, state: &FieldState<T>) -> Result<DomainCheck<T>> {
        state.check(&self.lattice)?;
        Ok(self.in_domain_unchecked(&state.coeffs))
    }

    pub fn in_domain_unchecked(&self, a: &[Complex<T>]) -> DomainCheck<T> {
        let phi = match self.params.domain {
            DomainKind::HamiltonianBall => self.reduced_hamiltonian_unchecked(a),
            _ => T::zero(),
        };
        self.in_domain_with_phi(a, phi)
    }

    /// As [`in_domain_unchecked`](Self::in_domain_unchecked) with `φ(a)`
    /// already known.
    pub fn in_domain_with_phi(&self, a: &[Complex<T>], phi: T) -> DomainCheck<T> {
        let b = T::lit(self.params.ball);
        let margin = match self.params.domain {
            DomainKind::WholeSpace => {
                return DomainCheck {
                    inside: true,
                    margin: T::infinity(),
                }
            }
            DomainKind::L2Ball => b - a.iter().map(|c| c.norm_sqr()).sum::<T>(),
            DomainKind::HamiltonianBall => {
                let h1 = self.quadratic(a);
                (b - phi.abs()).min(T::lit(5.0) * b - h1)
            }
        };
        DomainCheck {
            inside: margin > T::zero(),
            margin,
        }
    }

    /// Value of the active constraint function and its real gradient packed
    /// as complex numbers; `None` on the whole space.
    pub fn constraint_and_normal(&self, a: &[Complex<T>]) -> Option<(T, Vec<Complex<T>>)> {
        let two = T::lit(2.0);
        match self.params.domain {
            DomainKind::WholeSpace => None,
            DomainKind::L2Ball => Some((
                a.iter().map(|c| c.norm_sqr()).sum(),
                a.iter().map(|&c| c * two).collect(),
            )),
            DomainKind::HamiltonianBall => {
                let (phi, g) = self.energy_and_gradient_unchecked(a);
                let b = T::lit(self.params.ball);
                let h1 = self.quadratic(a);
                if T::lit(5.0) * b - h1 < b - phi.abs() {
                    let n = a
                        .iter()
                        .zip(&self.weights)
                        .map(|(&c, &w)| c * (two * w / T::lit(5.0)))
                        .collect();
                    Some((h1 / T::lit(5.0), n))
                } else {
                    let s = if phi < T::zero() { -two } else { two };
                    Some((phi.abs(), g.into_iter().map(|c| c * s).collect()))
                }
            }
        }
    }

    /// `(v, φ'' v)` for a real direction `v`, from the three-term formula.
    pub fn hessian_quadratic_form(&self, state: &FieldState<T>, v: &TangentVector<T>) -> Result<T> {
        state.check(&self.lattice)?;
        let w = &v.w;
        let quad = T::lit(2.0) * self.quadratic(w);
        if self.lambda == T::zero() {
            return Ok(quad);
        }
        let u = self.grid.to_physical(&state.coeffs);
        let ww = self.grid.to_physical(w);
        let p = T::lit(self.p as f64);
        let e2 = self.p / 2 - 1;
        let e4 = self.p / 2 - 2;
        let t1 = self
            .grid
            .mean(u.iter().zip(&ww).map(|(z, x)| z.norm_sqr().powi(e2) * x.norm_sqr()));
        let t2 = self.grid.mean(u.iter().zip(&ww).map(|(z, x)| {
            let zc = z.conj();
            (x * x * zc * zc).re * z.norm_sqr().powi(e4)
        }));
        Ok(quad + self.lambda * (p * t1 + (p - T::lit(2.0)) * t2))
    }

    /// Matrix-free `φ'' v` on general pairs `(w, z)`, Hermitian for
    /// [`TangentVector::inner`].
    pub fn hessian_apply(&self, state: &FieldState<T>, v: &TangentVector<T>) -> Result<TangentVector<T>> {
        state.check(&self.lattice)?;
        Ok(self.hessian_apply_unchecked(&state.coeffs, v))
    }

    pub fn hessian_apply_unchecked(&self, a: &[Complex<T>], v: &TangentVector<T>) -> TangentVector<T> {
        let two = T::lit(2.0);
        let mut w_out: Vec<Complex<T>> = v
            .w
            .iter()
            .zip(&self.weights)
            .map(|(&x, &wt)| x * (two * wt))
            .collect();
        let mut z_out: Vec<Complex<T>> = v
            .conj_w
            .iter()
            .zip(&self.weights)
            .map(|(&x, &wt)| x * (two * wt))
            .collect();
        if self.lambda == T::zero() {
            return TangentVector { w: w_out, conj_w: z_out };
        }
        let u = self.grid.to_physical(a);
        let ww = self.grid.to_physical(&v.w);
        let zz = self.grid.to_physical_conj(&v.conj_w);
        let p = T::lit(self.p as f64);
        let pm2 = p - two;
        let e2 = self.p / 2 - 1;
        let e4 = self.p / 2 - 2;
        let mut f = vec![czero(); u.len()];
        let mut h = vec![czero(); u.len()];
        for i in 0..u.len() {
            let m = u[i].norm_sqr();
            let m2 = m.powi(e2);
            let m4 = m.powi(e4);
            let uu = u[i] * u[i];
            f[i] = ww[i] * (p * m2) + zz[i] * uu * (pm2 * m4);
            h[i] = zz[i] * (p * m2) + ww[i] * uu.conj() * (pm2 * m4);
        }
        let cf = self.grid.coefficients(f);
        let ch = self.grid.conj_coefficients(h);
        for k in 0..w_out.len() {
            w_out[k] = w_out[k] + cf[k] * self.lambda;
            z_out[k] = z_out[k] + ch[k] * self.lambda;
        }
        TangentVector { w: w_out, conj_w: z_out }
    }
}

pub fn sobolev_norm_sq<T: Real>(lattice: &ModeLattice, a: &[Complex<T>], s: T) -> T {
    a.iter()
        .enumerate()
        .map(|(k, c)| {
            let n2 = T::lit(lattice.norm_sq(k) as f64);
            (n2.powf(s) + T::one()) * c.norm_sqr()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(dim: usize, n: usize, p: u32, lambda: f64) -> ModelParams {
        ModelParams {
            dim,
            exponent: p,
            coupling: lambda,
            friction: 1.0,
            cutoff: n,
            ball: 1.0,
            domain: DomainKind::HamiltonianBall,
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> FieldState<f64> {
        FieldState::from_coeffs(
            (0..len)
                .map(|_| Complex::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
                .collect(),
        )
    }

    /// `⨍|u|^p` by explicit enumeration of the index constraint
    /// `j1 − j2 + j3 − … = 0` (d = 1).
    fn brute_force_mean_power(a: &[Complex<f64>], n: i32, p: usize) -> f64 {
        let m = a.len();
        let mut total = Complex::new(0.0, 0.0);
        let mut idx = vec![0usize; p];
        loop {
            let mut s = 0i32;
            let mut prod = Complex::new(1.0, 0.0);
            for (slot, &k) in idx.iter().enumerate() {
                let nk = k as i32 - n;
                if slot % 2 == 0 {
                    s += nk;
                    prod *= a[k];
                } else {
                    s -= nk;
                    prod *= a[k].conj();
                }
            }
            if s == 0 {
                total += prod;
            }
            let mut c = 0;
            while c < p {
                idx[c] += 1;
                if idx[c] < m {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
            if c == p {
                break;
            }
        }
        total.re
    }

    #[test]
    fn closed_form_examples() {
        let h = Hamiltonian::<f64>::new(&params(1, 0, 4, 0.0)).unwrap();
        let one = FieldState::from_coeffs(vec![Complex::new(1.0, 0.0)]);
        assert_eq!(h.reduced_hamiltonian(&h.zero_state()).unwrap(), 0.0);
        assert_eq!(h.reduced_hamiltonian(&one).unwrap(), 1.0);
        for lambda in [-0.3, 0.7] {
            let h = Hamiltonian::<f64>::new(&params(1, 0, 4, lambda)).unwrap();
            assert!((h.reduced_hamiltonian(&one).unwrap() - (1.0 + lambda / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn three_plus_three_lambda() {
        for lambda in [-0.4, 0.1, 2.0] {
            let h = Hamiltonian::<f64>::new(&params(1, 1, 4, lambda)).unwrap();
            let s = FieldState::from_coeffs(vec![
                Complex::new(0.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(1.0, 0.0),
            ]);
            let phi = h.reduced_hamiltonian(&s).unwrap();
            assert!((phi - (3.0 + 3.0 * lambda)).abs() < 1e-13, "{phi}");
        }
    }

    #[test]
    fn dealiased_term_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 0..=2usize {
            for p in [4u32, 6] {
                let h = Hamiltonian::<f64>::new(&params(1, n, p, 1.0)).unwrap();
                let s = random_state(&mut rng, h.len(), 1.0);
                let q: f64 = s
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (h.lattice().norm_sq(k) as f64 + 1.0) * c.norm_sqr())
                    .sum();
                let nl = h.reduced_hamiltonian(&s).unwrap() - q;
                let bf = 2.0 / p as f64 * brute_force_mean_power(&s.coeffs, n as i32, p as usize);
                assert!(((nl - bf) / bf).abs() < 1e-12, "N={n} p={p}: {nl} vs {bf}");
            }
        }
    }

    #[test]
    fn free_gradient_and_hessian() {
        let h = Hamiltonian::<f64>::new(&params(1, 3, 4, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(&mut rng, h.len(), 1.0);
        let g = h.gradient(&s).unwrap();
        for k in 0..h.len() {
            let w = h.lattice().norm_sq(k) as f64 + 1.0;
            assert!((g[k] - s.coeffs[k] * w).norm() < 1e-15);
        }
        let mut e = vec![Complex::new(0.0, 0.0); h.len()];
        e[5] = Complex::new(0.0, 1.0);
        let v = TangentVector::real_direction(e);
        let hv = h.hessian_apply(&s, &v).unwrap();
        assert_eq!(hv.w[5], Complex::new(0.0, 2.0 * 5.0));
        assert_eq!(h.hessian_quadratic_form(&s, &v).unwrap(), 10.0);
    }

    #[test]
    fn zero_state_has_zero_gradient() {
        let h = Hamiltonian::<f64>::new(&params(2, 2, 4, -0.5)).unwrap();
        assert!(h.gradient(&h.zero_state()).unwrap().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn vector_field_example() {
        let h = Hamiltonian::<f64>::new(&params(1, 0, 4, 0.0)).unwrap();
        let one = FieldState::from_coeffs(vec![Complex::new(1.0, 0.0)]);
        let hf = h.hamiltonian_vector_field(&one).unwrap();
        assert_eq!(hf.w[0], Complex::new(2.0, 0.0));
        assert_eq!(hf.conj_w[0], Complex::new(-2.0, 0.0));
    }

    #[test]
    fn sobolev_examples() {
        let lat = ModeLattice::new(1, 1);
        let a = [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)];
        assert_eq!(sobolev_norm_sq(&lat, &a, 1.0), 3.0);
        assert_eq!(sobolev_norm_sq(&lat, &a, 0.0), 4.0);
    }

    #[test]
    fn domain_examples() {
        let h = Hamiltonian::<f64>::new(&params(1, 0, 4, 0.0)).unwrap();
        let c = h.in_domain(&h.zero_state()).unwrap();
        assert!(c.inside && c.margin == 1.0);
        let edge = FieldState::from_coeffs(vec![Complex::new(1.0, 0.0)]);
        let c = h.in_domain(&edge).unwrap();
        assert!(!c.inside && c.margin == 0.0);

        let h = Hamiltonian::<f64>::new(&params(1, 0, 4, -0.1)).unwrap();
        let r: f64 = 0.99;
        let s = FieldState::from_coeffs(vec![Complex::new(r, 0.0)]);
        let phi = r * r - 0.05 * r.powi(4);
        let c = h.in_domain(&s).unwrap();
        assert!(c.inside);
        assert!((c.margin - (1.0 - phi)).abs() < 1e-15);

        let ws = ModelParams {
            domain: DomainKind::WholeSpace,
            ..params(1, 0, 4, 0.2)
        };
        let h = Hamiltonian::<f64>::new(&ws).unwrap();
        let c = h.in_domain(&edge).unwrap();
        assert!(c.inside && c.margin.is_infinite());
    }

    #[test]
    fn generic_over_f32() {
        let h = Hamiltonian::<f32>::new(&params(1, 1, 4, 0.5)).unwrap();
        let s = FieldState::from_coeffs(vec![
            Complex::new(0.0f32, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(1.0, 0.0),
        ]);
        assert!((h.reduced_hamiltonian(&s).unwrap() - 4.5).abs() < 1e-5);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let h = Hamiltonian::<f64>::new(&params(1, 0, 4, 0.1)).unwrap();
        let s = FieldState::from_coeffs(vec![Complex::new(f64::INFINITY, 0.0)]);
        assert!(h.reduced_hamiltonian(&s).is_err());
        assert!(h.gradient(&s).is_err());
    }
}
