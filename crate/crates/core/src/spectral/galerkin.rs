//! Tensor Hermite–Galerkin representation on the whole space.
//!
//! Every map is a rectangular matrix `V_from → V_to`, where `V_K` is spanned
//! by `h_a(x) = Π_j √s_j ψ_{a_j}(s_j x_j)` with `a_j < K` and `s_j = √(2ω_j)`.
//! For polynomial `φ` of degree `p`, `z_j` maps `V_K` into `V_{K+s}` with
//! `s = max(1, p − 1)`, so with a large enough target level the matrices
//! represent the operators exactly and algebraic identities hold to
//! round-off. With `to = from` they are the usual Galerkin projections.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use faer::{c64, Mat};

use super::hermite::GaussHermite;
use super::operator::{BasisDescriptor, DiscreteOperator, Matrix, OperatorTag};
use super::potential::PotentialDescriptor;
use crate::error::{Error, Result};

/// Largest square operator the Galerkin layer will assemble.
pub const MAX_DIMENSION: usize = 4096;

/// Pointwise coefficient fields that appear in the operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    /// `∂_j φ`.
    Grad(usize),
    /// `∂_i ∂_j φ`.
    Hess(usize, usize),
    /// `|∇φ|² − Δφ`.
    Witten,
    /// `b_j`, the transport field.
    Transport(usize),
}

struct Samples {
    grad: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
    gh: GaussHermite,
}

pub struct HermiteGalerkin {
    pot: PotentialDescriptor,
    nu: f64,
    scales: Vec<f64>,
    cache: Mutex<HashMap<usize, Arc<Samples>>>,
}

fn ipow(b: usize, e: usize) -> usize {
    (0..e).fold(1, |acc, _| acc * b)
}

/// `dst += alpha · src`.
pub(crate) fn axpy(dst: &mut Mat<f64>, alpha: f64, src: &Mat<f64>) {
    for j in 0..dst.ncols() {
        for i in 0..dst.nrows() {
            dst[(i, j)] += alpha * src[(i, j)];
        }
    }
}

/// `max |a − b| / max(1, max |a|)` for equally shaped matrices.
pub fn relative_difference(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            diff = diff.max((a[(i, j)] - b[(i, j)]).abs());
            scale = scale.max(a[(i, j)].abs());
        }
    }
    diff / scale
}

impl HermiteGalerkin {
    /// Basis scaled to the quadratic part of `pot`.
    pub fn new(pot: &PotentialDescriptor, nu: f64) -> Result<Self> {
        if pot.quadratic_freqs.len() != pot.dim || pot.quadratic_freqs.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParams(
                "Hermite basis needs a positive quadratic frequency per coordinate".into(),
            ));
        }
        Ok(Self {
            scales: pot.quadratic_freqs.iter().map(|&w| (2.0 * w).sqrt()).collect(),
            pot: pot.clone(),
            nu,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn potential(&self) -> &PotentialDescriptor {
        &self.pot
    }

    pub fn dim(&self) -> usize {
        self.pot.dim
    }

    pub fn friction(&self) -> f64 {
        self.nu
    }

    /// Level increase under `z_j`.
    pub fn raise(&self) -> usize {
        self.pot.poly_degree.map_or(1, |p| p.saturating_sub(1).max(1))
    }

    /// `K^D`.
    pub fn size(&self, k: usize) -> usize {
        ipow(k, self.dim())
    }

    fn multi(&self, k: usize, mut idx: usize) -> Vec<usize> {
        let d = self.dim();
        let mut m = vec![0; d];
        for j in (0..d).rev() {
            m[j] = idx % k;
            idx /= k;
        }
        m
    }

    fn flat(&self, k: usize, m: &[usize]) -> Option<usize> {
        let mut idx = 0;
        for &a in m {
            if a >= k {
                return None;
            }
            idx = idx * k + a;
        }
        Some(idx)
    }

    fn field_degree(&self, f: Field) -> usize {
        match self.pot.poly_degree {
            None => 24,
            Some(p) => match f {
                Field::Grad(_) | Field::Transport(_) => p.saturating_sub(1),
                Field::Hess(..) => p.saturating_sub(2),
                Field::Witten => 2 * p.saturating_sub(1),
            },
        }
    }

    fn samples(&self, q: usize) -> Result<Arc<Samples>> {
        if let Some(s) = self.cache.lock().unwrap().get(&q) {
            return Ok(s.clone());
        }
        let gh = GaussHermite::new(q)?;
        let d = self.dim();
        let total = ipow(q, d);
        let mut grad = Vec::with_capacity(total);
        let mut hess = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for j in (0..d).rev() {
                x[j] = gh.nodes[r % q] / self.scales[j];
                r /= q;
            }
            grad.push(self.pot.grad(&x));
            hess.push(self.pot.hess(&x));
        }
        let s = Arc::new(Samples { grad, hess, gh });
        self.cache.lock().unwrap().insert(q, s.clone());
        Ok(s)
    }

    fn field_values(&self, f: Field, s: &Samples) -> Vec<f64> {
        let d = self.dim();
        (0..s.grad.len())
            .map(|i| {
                let g = &s.grad[i];
                let h = &s.hess[i];
                match f {
                    Field::Grad(j) => g[j],
                    Field::Hess(a, b) => h[a * d + b],
                    Field::Witten => {
                        g.iter().map(|v| v * v).sum::<f64>() - (0..d).map(|k| h[k * d + k]).sum::<f64>()
                    }
                    Field::Transport(j) => {
                        if !self.pot.paired {
                            0.0
                        } else if j % 2 == 0 {
                            0.5 * g[j + 1]
                        } else {
                            -0.5 * g[j - 1]
                        }
                    }
                }
            })
            .collect()
    }

    /// Multiplication by `f` as a map `V_from → V_to`, by tensor Gauss–Hermite
    /// quadrature contracted one axis at a time.
    pub fn mult(&self, f: Field, from: usize, to: usize) -> Result<Mat<f64>> {
        let q = (from + to + self.field_degree(f)) / 2 + 2;
        let s = self.samples(q)?;
        let vals = self.field_values(f, &s);
        let psi_in = s.gh.basis_table(from);
        let psi_out = s.gh.basis_table(to);
        let d = self.dim();
        let kk = from * to;
        let mut cur = vals;
        let mut prev = 1;
        for j in 0..d {
            let rest = ipow(q, d - j - 1);
            let mut next = vec![0.0; prev * kk * rest];
            for p in 0..prev {
                for a in 0..to {
                    for b in 0..from {
                        let dst0 = (p * kk + a * from + b) * rest;
                        for qq in 0..q {
                            let w = psi_out[a][qq] * psi_in[b][qq];
                            let src0 = (p * q + qq) * rest;
                            for r in 0..rest {
                                next[dst0 + r] += w * cur[src0 + r];
                            }
                        }
                    }
                }
            }
            cur = next;
            prev *= kk;
        }
        // cur is indexed by (a_0 b_0)(a_1 b_1)…; scatter into rows a, cols b.
        let (nr, nc) = (self.size(to), self.size(from));
        let mut m = Mat::<f64>::zeros(nr, nc);
        for (idx, &v) in cur.iter().enumerate() {
            let mut r = idx;
            let (mut row, mut col) = (0, 0);
            let (mut rs, mut cs) = (1, 1);
            for _ in (0..d).rev() {
                let pair = r % kk;
                r /= kk;
                row += (pair / from) * rs;
                col += (pair % from) * cs;
                rs *= to;
                cs *= from;
            }
            m[(row, col)] = v;
        }
        Ok(m)
    }

    /// `∂_j` as a map `V_from → V_to`; exact when `to > from`.
    pub fn derivative(&self, j: usize, from: usize, to: usize) -> Mat<f64> {
        let s = self.scales[j];
        let mut m = Mat::<f64>::zeros(self.size(to), self.size(from));
        for col in 0..self.size(from) {
            let b = self.multi(from, col);
            let bj = b[j];
            let mut t = b.clone();
            if bj > 0 {
                t[j] = bj - 1;
                if let Some(row) = self.flat(to, &t) {
                    m[(row, col)] += s * (bj as f64 / 2.0).sqrt();
                }
            }
            t[j] = bj + 1;
            if let Some(row) = self.flat(to, &t) {
                m[(row, col)] -= s * ((bj + 1) as f64 / 2.0).sqrt();
            }
        }
        m
    }

    /// Inclusion `V_from → V_to` (a projection when `to < from`).
    pub fn embed(&self, from: usize, to: usize) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.size(to), self.size(from));
        for col in 0..self.size(from) {
            if let Some(row) = self.flat(to, &self.multi(from, col)) {
                m[(row, col)] = 1.0;
            }
        }
        m
    }

    /// `z_j = ∂_j + ∂_j φ`.
    pub fn z(&self, j: usize, from: usize, to: usize) -> Result<Mat<f64>> {
        let mut m = self.mult(Field::Grad(j), from, to)?;
        axpy(&mut m, 1.0, &self.derivative(j, from, to));
        Ok(m)
    }

    /// `z_j^* = −∂_j + ∂_j φ`.
    pub fn zstar(&self, j: usize, from: usize, to: usize) -> Result<Mat<f64>> {
        let mut m = self.mult(Field::Grad(j), from, to)?;
        axpy(&mut m, -1.0, &self.derivative(j, from, to));
        Ok(m)
    }

    /// `L` from the pointwise formula: `(ν/4)(−Δ + |∇φ|² − Δφ) + b·∇`.
    pub fn l_direct(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let mid = from + 1;
        let mut m = self.mult(Field::Witten, from, to)?;
        for j in 0..self.dim() {
            let dj = self.derivative(j, from, mid);
            let second = self.derivative(j, mid, to) * &dj;
            axpy(&mut m, -1.0, &second);
        }
        let mut m = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.25 * self.nu * m[(i, j)]);
        if self.pot.paired {
            for j in 0..self.dim() {
                let dj = self.derivative(j, from, mid);
                let bj = self.mult(Field::Transport(j), mid, to)?;
                axpy(&mut m, 1.0, &(bj * &dj));
            }
        }
        Ok(m)
    }

    /// `L = Σ_{jk} z_j^* Ã_jk z_k`.
    pub fn l_composed(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let mid = from + self.raise();
        let d = self.dim();
        let a = self.pot.deformation(self.nu);
        let zs: Vec<Mat<f64>> = (0..d).map(|k| self.z(k, from, mid)).collect::<Result<_>>()?;
        let mut m = Mat::<f64>::zeros(self.size(to), self.size(from));
        for j in 0..d {
            let zsj = self.zstar(j, mid, to)?;
            for k in 0..d {
                let c = a[j * d + k];
                if c != 0.0 {
                    axpy(&mut m, c, &(&zsj * &zs[k]));
                }
            }
        }
        Ok(m)
    }

    /// `Σ_j z_j^* z_j`.
    pub fn delta0_sa(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let mid = from + self.raise();
        let mut m = Mat::<f64>::zeros(self.size(to), self.size(from));
        for j in 0..self.dim() {
            axpy(&mut m, 1.0, &(self.zstar(j, mid, to)? * self.z(j, from, mid)?));
        }
        Ok(m)
    }

    /// `−Δ + |∇φ|² − Δφ` from the pointwise formula.
    pub fn delta0_sa_direct(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let mid = from + 1;
        let mut m = self.mult(Field::Witten, from, to)?;
        for j in 0..self.dim() {
            let second = self.derivative(j, mid, to) * self.derivative(j, from, mid);
            axpy(&mut m, -1.0, &second);
        }
        Ok(m)
    }

    /// 1-form operator with blocks `δ_ik L + 2 Σ_j (∂_i∂_j φ) Ã_jk`.
    pub fn one_form(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let l = self.l_composed(from, to)?;
        let a = self.pot.deformation(self.nu);
        self.one_form_from(&l, from, to, Some(&a))
    }

    /// `Δ_sa ⊗ I + 2 Hess φ`.
    pub fn delta1_sa(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let l = self.delta0_sa(from, to)?;
        self.one_form_from(&l, from, to, None)
    }

    fn one_form_from(&self, zero: &Mat<f64>, from: usize, to: usize, a: Option<&[f64]>) -> Result<Mat<f64>> {
        let d = self.dim();
        let (nr, nc) = (self.size(to), self.size(from));
        let mut out = Mat::<f64>::zeros(d * nr, d * nc);
        let hess: Vec<Vec<Mat<f64>>> = (0..d)
            .map(|i| (0..d).map(|j| self.mult(Field::Hess(i, j), from, to)).collect())
            .collect::<Result<_>>()?;
        for i in 0..d {
            for k in 0..d {
                let mut block = if i == k { zero.clone() } else { Mat::zeros(nr, nc) };
                for j in 0..d {
                    let c = match a {
                        Some(a) => a[j * d + k],
                        None => (j == k) as u8 as f64,
                    };
                    if c != 0.0 {
                        axpy(&mut block, 2.0 * c, &hess[i][j]);
                    }
                }
                for c in 0..nc {
                    for r in 0..nr {
                        out[(i * nr + r, k * nc + c)] = block[(r, c)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `d_φ` on 0-forms: the stacked `z_j`.
    pub fn d0(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let parts: Vec<Mat<f64>> = (0..self.dim()).map(|j| self.z(j, from, to)).collect::<Result<_>>()?;
        Ok(vstack(&parts))
    }

    /// `d_φ^*` on 1-forms: `ω ↦ Σ_j z_j^* ω_j`.
    pub fn d0_star(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let parts: Vec<Mat<f64>> = (0..self.dim()).map(|j| self.zstar(j, from, to)).collect::<Result<_>>()?;
        Ok(hstack(&parts))
    }

    /// `d_φ^{*,A}` on 1-forms: `ω ↦ Σ_{jk} z_j^* Ã_jk ω_k`.
    pub fn d0_star_a(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let d = self.dim();
        let a = self.pot.deformation(self.nu);
        let zs: Vec<Mat<f64>> = (0..d).map(|j| self.zstar(j, from, to)).collect::<Result<_>>()?;
        let parts: Vec<Mat<f64>> = (0..d)
            .map(|k| {
                let mut m = Mat::zeros(self.size(to), self.size(from));
                for j in 0..d {
                    if a[j * d + k] != 0.0 {
                        axpy(&mut m, a[j * d + k], &zs[j]);
                    }
                }
                m
            })
            .collect();
        Ok(hstack(&parts))
    }

    /// `d_φ` on 1-forms, components `(i, j)` with `i < j`:
    /// `(dω)_ij = z_i ω_j − z_j ω_i`.
    pub fn d1(&self, from: usize, to: usize) -> Result<Mat<f64>> {
        let d = self.dim();
        let (nr, nc) = (self.size(to), self.size(from));
        let zs: Vec<Mat<f64>> = (0..d).map(|j| self.z(j, from, to)).collect::<Result<_>>()?;
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        let mut out = Mat::<f64>::zeros(pairs.len() * nr, d * nc);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for c in 0..nc {
                for r in 0..nr {
                    out[(p * nr + r, j * nc + c)] += zs[i][(r, c)];
                    out[(p * nr + r, i * nc + c)] -= zs[j][(r, c)];
                }
            }
        }
        Ok(out)
    }

    /// Coefficients of `e^{−φ}` in `V_K`, unit Euclidean norm.
    pub fn ground_state(&self, k: usize) -> Result<Vec<f64>> {
        let pot = self.pot.clone();
        let v = self.project(&move |x| (-pot.value(x)).exp(), k)?;
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::Solver("ground state projects to zero".into()));
        }
        Ok(v.into_iter().map(|x| x / n).collect())
    }

    /// `L²` projection of `f` onto `V_K` by quadrature.
    pub fn project(&self, f: &dyn Fn(&[f64]) -> f64, k: usize) -> Result<Vec<f64>> {
        let d = self.dim();
        let q = 2 * k + 24;
        let gh = GaussHermite::new(q)?;
        let psi = gh.basis_table(k);
        let sw: Vec<f64> = gh.scaled_weights.iter().map(|w| w.sqrt()).collect();
        let total = ipow(q, d);
        let mut vals = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            let mut weight = 1.0;
            for j in (0..d).rev() {
                x[j] = gh.nodes[r % q] / self.scales[j];
                weight *= sw[r % q] / self.scales[j].sqrt();
                r /= q;
            }
            vals.push(weight * f(&x));
        }
        let mut out = vec![0.0; self.size(k)];
        for (col, o) in out.iter_mut().enumerate() {
            let a = self.multi(k, col);
            let mut acc = 0.0;
            for (idx, &v) in vals.iter().enumerate() {
                let mut r = idx;
                let mut w = v;
                for j in (0..d).rev() {
                    w *= psi[a[j]][r % q];
                    r /= q;
                }
                acc += w;
            }
            *o = acc;
        }
        Ok(out)
    }

    fn descriptor(&self, k: usize, components: usize) -> BasisDescriptor {
        BasisDescriptor::Hermite {
            levels: vec![k; self.dim()],
            freqs: self.pot.quadratic_freqs.clone(),
            components,
        }
    }

    /// Square Galerkin matrix of `tag` on `V_K` (or `V_K^D` for forms).
    pub fn operator(&self, tag: OperatorTag, k: usize) -> Result<DiscreteOperator> {
        let d = self.dim();
        let n0 = self.size(k);
        let components = match tag {
            OperatorTag::Delta1A | OperatorTag::Delta1Sa | OperatorTag::DPhiStar | OperatorTag::DPhiStarA => d,
            _ => 1,
        };
        if n0 * components > MAX_DIMENSION {
            return Err(Error::BasisTooLarge(format!(
                "{} basis functions exceed the cap of {MAX_DIMENSION}",
                n0 * components
            )));
        }
        let matrix = match tag {
            OperatorTag::L | OperatorTag::Delta0A => self.l_composed(k, k),
            OperatorTag::Delta1A => self.one_form(k, k),
            OperatorTag::Delta0Sa => self.delta0_sa(k, k),
            OperatorTag::Delta1Sa => self.delta1_sa(k, k),
            OperatorTag::DPhi => self.d0(k, k),
            OperatorTag::DPhiStar => self.d0_star(k, k),
            OperatorTag::DPhiStarA => self.d0_star_a(k, k),
            OperatorTag::Other => {
                return Err(Error::InvalidParams("no Galerkin assembly for tag Other".into()));
            }
        };
        let mut m = matrix?;
        if tag.is_self_adjoint() {
            let sym = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
            m = sym;
        }
        let mut op = DiscreteOperator::new(tag, self.descriptor(k, components), Matrix::Dense(m));
        op.friction = self.nu;
        op.params = self.pot.params.clone();
        op.potential = self.pot.name.clone();
        if matches!(tag, OperatorTag::L | OperatorTag::Delta0A | OperatorTag::Delta0Sa) {
            op.ground_state = Some(self.ground_state(k)?.into_iter().map(|v| c64::new(v, 0.0)).collect());
        }
        Ok(op)
    }
}

fn vstack(parts: &[Mat<f64>]) -> Mat<f64> {
    let nc = parts[0].ncols();
    let nr: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::zeros(nr, nc);
    let mut off = 0;
    for p in parts {
        for c in 0..nc {
            for r in 0..p.nrows() {
                out[(off + r, c)] = p[(r, c)];
            }
        }
        off += p.nrows();
    }
    out
}

fn hstack(parts: &[Mat<f64>]) -> Mat<f64> {
    let nr = parts[0].nrows();
    let nc: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(nr, nc);
    let mut off = 0;
    for p in parts {
        for c in 0..p.ncols() {
            for r in 0..nr {
                out[(r, off + c)] = p[(r, c)];
            }
        }
        off += p.ncols();
    }
    out
}

/// Block-diagonal `diag(m, …, m)` with `copies` blocks.
pub fn block_diag(m: &Mat<f64>, copies: usize) -> Mat<f64> {
    let (nr, nc) = (m.nrows(), m.ncols());
    let mut out = Mat::zeros(copies * nr, copies * nc);
    for b in 0..copies {
        for c in 0..nc {
            for r in 0..nr {
                out[(b * nr + r, b * nc + c)] = m[(r, c)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DomainKind, ModelParams};

    fn defocusing() -> PotentialDescriptor {
        let p = ModelParams {
            coupling: 0.5,
            domain: DomainKind::WholeSpace,
            ..ModelParams::default()
        };
        PotentialDescriptor::from_model(&p).unwrap()
    }

    #[test]
    fn multiplication_by_constant_hessian_is_scaled_identity() {
        let pot = PotentialDescriptor::harmonic(0.7, 2, false).unwrap();
        let g = HermiteGalerkin::new(&pot, 1.0).unwrap();
        let m = g.mult(Field::Hess(0, 0), 4, 6).unwrap();
        assert!(relative_difference(&m, &Mat::from_fn(36, 16, |i, j| 1.4 * g.embed(4, 6)[(i, j)])) < 1e-13);
    }

    #[test]
    fn annihilator_kills_harmonic_ground_state() {
        let pot = PotentialDescriptor::harmonic(0.8, 1, false).unwrap();
        let g = HermiteGalerkin::new(&pot, 1.0).unwrap();
        let z = g.z(0, 6, 8).unwrap();
        for r in 0..z.nrows() {
            assert!(z[(r, 0)].abs() < 1e-13);
        }
    }

    #[test]
    fn direct_and_composed_agree_exactly() {
        let g = HermiteGalerkin::new(&defocusing(), 0.7).unwrap();
        let k = 5;
        let to = k + 2 * g.raise();
        let a = g.l_direct(k, to).unwrap();
        let b = g.l_composed(k, to).unwrap();
        assert!(relative_difference(&a, &b) < 1e-12, "{}", relative_difference(&a, &b));
    }

    #[test]
    fn projection_recovers_a_basis_function() {
        let pot = PotentialDescriptor::harmonic(0.6, 2, true).unwrap();
        let g = HermiteGalerkin::new(&pot, 1.0).unwrap();
        let s = (1.2f64).sqrt();
        // h_(1,0)(x) = s ψ_1(s x₀) ψ_0(s x₁).
        let f = move |x: &[f64]| {
            let a = super::super::hermite::hermite_functions(2, s * x[0]);
            let b = super::super::hermite::hermite_functions(1, s * x[1]);
            s * a[1] * b[0]
        };
        let c = g.project(&f, 4).unwrap();
        for (i, v) in c.iter().enumerate() {
            let e = if i == 4 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-12, "{i}: {v}");
        }
    }

    #[test]
    fn cap_is_enforced() {
        let pot = PotentialDescriptor::harmonic(1.0, 2, true).unwrap();
        let g = HermiteGalerkin::new(&pot, 1.0).unwrap();
        assert!(matches!(g.operator(OperatorTag::L, 65), Err(Error::BasisTooLarge(_))));
    }
}
