//! Eigenvalues of discrete operators: dense below a size limit, blockwise
//! when the operator is block-diagonal, shift-invert Arnoldi otherwise.

use std::io::Write;

use faer::prelude::*;
use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use super::operator::{BasisDescriptor, DiscreteOperator, Matrix, OperatorTag};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenOptions {
    /// Number of eigenvalues with smallest real part to report.
    pub count: usize,
    /// Dense solve up to this dimension.
    pub dense_limit: usize,
    /// Arnoldi shift `σ = −shift_offset`.
    pub shift_offset: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Relative residual accepted by Arnoldi.
    pub tol: f64,
    pub seed: u64,
}

impl EigenOptions {
    pub fn new(count: usize, friction: f64) -> Self {
        Self {
            count,
            dense_limit: 4000,
            shift_offset: 0.25 * friction.max(1e-3),
            krylov_dim: (3 * count + 40).max(60),
            max_restarts: 30,
            tol: 1e-9,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub tag: OperatorTag,
    pub basis: BasisDescriptor,
    pub dimension: usize,
    pub friction: f64,
    pub method: String,
    /// Sorted by real part.
    pub eigenvalues: Vec<c64>,
    /// `‖Av − κv‖ / ‖v‖`.
    pub residuals: Vec<f64>,
    /// Eigenvectors aligned with `eigenvalues`.
    pub vectors: Vec<Vec<c64>>,
    /// Index of the eigenvalue of smallest modulus.
    pub zero_index: Option<usize>,
    /// Smallest real part over the remaining eigenvalues.
    pub gap: f64,
    /// `min(Re κ − ν|Im κ|)` over the remaining eigenvalues.
    pub sector_margin: f64,
    /// Eigenvalues with `|κ| < gap/10`.
    pub near_zero: usize,
    pub simple: bool,
    /// `|⟨v₀, g⟩| / (‖v₀‖‖g‖)` for the kernel vector against `e^{−φ}`.
    pub ground_overlap: Option<f64>,
    pub converged: bool,
}

impl SpectralReport {
    fn finish(
        op: &DiscreteOperator,
        method: &str,
        mut pairs: Vec<(c64, Vec<c64>)>,
        converged: bool,
    ) -> Self {
        pairs.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap().then(a.0.im.partial_cmp(&b.0.im).unwrap()));
        let residuals: Vec<f64> = pairs.iter().map(|(k, v)| residual(op, *k, v)).collect();
        let (eigenvalues, vectors): (Vec<c64>, Vec<Vec<c64>>) = pairs.into_iter().unzip();
        let zero_index = (0..eigenvalues.len()).min_by(|&a, &b| {
            eigenvalues[a].norm().partial_cmp(&eigenvalues[b].norm()).unwrap()
        });
        let nu = op.friction;
        let rest = || {
            eigenvalues
                .iter()
                .enumerate()
                .filter(move |(i, _)| Some(*i) != zero_index)
                .map(|(_, k)| *k)
        };
        let gap = rest().map(|k| k.re).fold(f64::INFINITY, f64::min);
        let sector_margin = rest().map(|k| k.re - nu * k.im.abs()).fold(f64::INFINITY, f64::min);
        let near_zero = eigenvalues.iter().filter(|k| k.norm() < gap / 10.0).count();
        let ground_overlap = match (&op.ground_state, zero_index) {
            (Some(g), Some(z)) if !vectors[z].is_empty() => Some(overlap(&vectors[z], g)),
            _ => None,
        };
        Self {
            tag: op.tag,
            basis: op.basis.clone(),
            dimension: op.nrows(),
            friction: nu,
            method: method.to_string(),
            eigenvalues,
            residuals,
            vectors,
            zero_index,
            gap,
            sector_margin,
            near_zero,
            simple: near_zero == 1,
            ground_overlap,
            converged,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Eigenvalues other than the kernel one.
    pub fn nonzero(&self) -> Vec<c64> {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != self.zero_index)
            .map(|(_, k)| *k)
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let num = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
        json!({
            "tag": self.tag,
            "basis": self.basis,
            "dimension": self.dimension,
            "friction": num(self.friction),
            "method": self.method,
            "eigenvalues": self.eigenvalues.iter().map(|k| json!([num(k.re), num(k.im)])).collect::<Vec<_>>(),
            "residuals": self.residuals.iter().map(|&r| num(r)).collect::<Vec<_>>(),
            "gap": num(self.gap),
            "sector_margin": num(self.sector_margin),
            "near_zero": self.near_zero,
            "simple": self.simple,
            "ground_overlap": self.ground_overlap.map(num),
            "converged": self.converged,
        })
    }

    /// `index,re,im,residual` per eigenvalue.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "re", "im", "residual"])?;
        for (i, (k, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            wr.write_record([i.to_string(), fmt_f64(k.re), fmt_f64(k.im), fmt_f64(*r)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `|⟨u, v⟩| / (‖u‖‖v‖)`.
pub fn overlap(u: &[c64], v: &[c64]) -> f64 {
    let d: c64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    d.norm() / (norm(u) * norm(v))
}

fn residual(op: &DiscreteOperator, k: c64, v: &[c64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let av = op.apply(v);
    let r: f64 = av.iter().zip(v).map(|(a, x)| (a - k * x).norm_sqr()).sum::<f64>().sqrt();
    r / norm(v)
}

fn dense_pairs(m: &Mat<c64>) -> Result<Vec<(c64, Vec<c64>)>> {
    let e = m.eigen().map_err(|e| Error::Solver(format!("dense eigensolve failed: {e:?}")))?;
    let n = m.nrows();
    Ok((0..n)
        .map(|i| (e.S()[i], (0..n).map(|r| e.U()[(r, i)]).collect()))
        .collect())
}

fn dense_pairs_real(m: &Mat<f64>) -> Result<Vec<(c64, Vec<c64>)>> {
    let e = m.eigen().map_err(|e| Error::Solver(format!("dense eigensolve failed: {e:?}")))?;
    let n = m.nrows();
    Ok((0..n)
        .map(|i| (e.S()[i], (0..n).map(|r| e.U()[(r, i)]).collect()))
        .collect())
}

fn keep_lowest(mut pairs: Vec<(c64, Vec<c64>)>, count: usize) -> Vec<(c64, Vec<c64>)> {
    pairs.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap());
    pairs.truncate(count);
    pairs
}

/// The `count` eigenvalues of smallest real part, with eigenvectors and
/// residuals.
pub fn compute_spectrum(op: &DiscreteOperator, count: usize) -> Result<SpectralReport> {
    compute_spectrum_with(op, &EigenOptions::new(count, op.friction))
}

pub fn compute_spectrum_with(op: &DiscreteOperator, opts: &EigenOptions) -> Result<SpectralReport> {
    let n = op.nrows();
    if n != op.ncols() {
        return Err(Error::InvalidParams("spectrum of a non-square operator".into()));
    }
    if let Some(blocks) = &op.blocks {
        let mut all: Vec<(c64, usize, Vec<c64>)> = Vec::new();
        for (b, &(off, size)) in blocks.iter().enumerate() {
            for (k, v) in dense_pairs(&op.sub_block(off, size))? {
                all.push((k, b, v));
            }
        }
        all.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap());
        all.truncate(opts.count);
        let pairs = all
            .into_iter()
            .map(|(k, b, v)| {
                let (off, _) = blocks[b];
                let mut full = vec![c64::new(0.0, 0.0); n];
                full[off..off + v.len()].copy_from_slice(&v);
                (k, full)
            })
            .collect();
        return Ok(SpectralReport::finish(op, "dense_blocks", pairs, true));
    }
    if n <= opts.dense_limit {
        let pairs = match &op.matrix {
            Matrix::Dense(m) => dense_pairs_real(m)?,
            _ => dense_pairs(&op.to_dense_complex())?,
        };
        return Ok(SpectralReport::finish(op, "dense", keep_lowest(pairs, opts.count), true));
    }
    let (pairs, converged) = arnoldi_shift_invert(op, opts)?;
    Ok(SpectralReport::finish(op, "shift_invert_arnoldi", pairs, converged))
}

/// Shift-invert Arnoldi with explicit restarts on `(A − σ)^{-1}`,
/// `σ = −shift_offset`. Converged when every wanted pair has relative true
/// residual below `tol`.
fn arnoldi_shift_invert(op: &DiscreteOperator, opts: &EigenOptions) -> Result<(Vec<(c64, Vec<c64>)>, bool)> {
    let n = op.nrows();
    let sigma = c64::new(-opts.shift_offset, 0.0);
    let shifted = op.shifted_sparse(sigma)?;
    let lu = shifted
        .sp_lu()
        .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
    let solve = |x: &[c64]| -> Vec<c64> {
        let b = Mat::from_fn(n, 1, |i, _| x[i]);
        let y = lu.solve(&b);
        (0..n).map(|i| y[(i, 0)]).collect()
    };
    let m = opts.krylov_dim.min(n);
    let k = opts.count.min(m.saturating_sub(2)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<c64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c64::new(re, im)
        })
        .collect();
    let mut best: Vec<(c64, Vec<c64>)> = Vec::new();
    for _ in 0..opts.max_restarts.max(1) {
        let s = norm(&start);
        let mut basis: Vec<Vec<c64>> = vec![start.iter().map(|c| c / s).collect()];
        let mut h = Mat::<c64>::zeros(m + 1, m);
        let mut steps = m;
        for j in 0..m {
            let mut w = solve(&basis[j]);
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c: c64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    h[(i, j)] += c;
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let beta = norm(&w);
            h[(j + 1, j)] = c64::new(beta, 0.0);
            if beta < 1e-14 {
                steps = j + 1;
                break;
            }
            basis.push(w.iter().map(|c| c / beta).collect());
        }
        let hm = Mat::from_fn(steps, steps, |i, j| h[(i, j)]);
        let mut ritz = dense_pairs(&hm)?;
        ritz.sort_by(|a, b| b.0.norm().partial_cmp(&a.0.norm()).unwrap());
        ritz.truncate(k);
        best = ritz
            .into_iter()
            .filter(|(theta, _)| theta.norm() > 0.0)
            .map(|(theta, y)| {
                let kappa = sigma + c64::new(1.0, 0.0) / theta;
                let mut x = vec![c64::new(0.0, 0.0); n];
                for (yi, v) in y.iter().zip(&basis) {
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi += yi * vi;
                    }
                }
                (kappa, x)
            })
            .collect();
        let ok = best
            .iter()
            .all(|(kappa, x)| residual(op, *kappa, x) <= opts.tol * kappa.norm().max(1.0));
        if ok && best.len() == k {
            return Ok((best, true));
        }
        start = vec![c64::new(0.0, 0.0); n];
        for (_, x) in &best {
            let s = norm(x);
            for (a, b) in start.iter_mut().zip(x) {
                *a += b / s;
            }
        }
    }
    Ok((best, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum_is_one() {
        let r = compute_spectrum(&DiscreteOperator::identity(5), 5).unwrap();
        assert!(r.eigenvalues.iter().all(|k| (k - c64::new(1.0, 0.0)).norm() < 1e-14));
        assert!(r.max_residual() < 1e-14);
    }

    #[test]
    fn arnoldi_matches_dense_on_a_sparse_tridiagonal() {
        let n = 300;
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, c64::new(i as f64 * 0.1, 0.05 * i as f64)));
            if i + 1 < n {
                e.push((i, i + 1, c64::new(0.3, 0.0)));
                e.push((i + 1, i, c64::new(-0.3, 0.0)));
            }
        }
        let op = DiscreteOperator::from_triplets(OperatorTag::Other, BasisDescriptor::Plain { size: n }, n, &e).unwrap();
        let mut opts = EigenOptions::new(6, 1.0);
        let dense = compute_spectrum_with(&op, &opts).unwrap();
        opts.dense_limit = 10;
        let it = compute_spectrum_with(&op, &opts).unwrap();
        assert!(it.converged);
        for (a, b) in dense.eigenvalues.iter().zip(&it.eigenvalues) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
        assert!(it.max_residual() < 1e-8);
    }

    #[test]
    fn json_pairs_are_sorted_by_real_part() {
        let e = [(0, 0, c64::new(3.0, 1.0)), (1, 1, c64::new(1.0, -2.0)), (2, 2, c64::new(0.0, 0.0))];
        let op = DiscreteOperator::from_triplets(OperatorTag::Other, BasisDescriptor::Plain { size: 3 }, 3, &e).unwrap();
        let r = compute_spectrum(&op, 3).unwrap();
        let v = r.to_json();
        assert_eq!(v["eigenvalues"][1], json!([1.0, -2.0]));
        assert_eq!(r.gap, 1.0);
        assert!(r.simple);
    }
}
