//! Structural checks on discrete operators and their spectra.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::eigen::{overlap, SpectralReport};
use super::galerkin::{axpy, block_diag, relative_difference, HermiteGalerkin};
use super::operator::DiscreteOperator;
use crate::convexity::{ConvexityCertificate, Region, HESSIAN_CONVENTION};
use crate::error::{Error, Result};

/// Ratio `gap / (c ν)` on the free field, where `gap = ν` and the Hessian
/// floor is `c = 2`. Frozen here and checked by the calibration test.
pub const KAPPA_CONV: f64 = 0.5;

/// Relative slack allowed in the gap inequality.
pub const GAP_SLACK: f64 = 0.05;

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Real matrix times complex vector.
pub fn mat_apply(m: &Mat<f64>, v: &[c64]) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); m.nrows()];
    for j in 0..m.ncols() {
        let x = v[j];
        if x == c64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..m.nrows() {
            out[i] += x * m[(i, j)];
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundStateReport {
    /// `‖L g‖` for the unit discrete `g = e^{−φ}`.
    pub residual: f64,
    pub near_zero: usize,
    pub simple: bool,
    pub overlap: f64,
    pub zero_eigenvalue: [f64; 2],
    pub pass: bool,
}

/// Kernel checks: `e^{−φ}` residual, one eigenvalue in `|κ| < gap/10`, and
/// kernel-vector overlap at least `1 − overlap_tol`.
pub fn ground_state_check(
    op: &DiscreteOperator,
    report: &SpectralReport,
    residual_tol: f64,
    overlap_tol: f64,
) -> Result<GroundStateReport> {
    let g = op
        .ground_state
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("operator carries no ground-state vector".into()))?;
    let residual = norm(&op.apply(g)) / norm(g);
    let ov = report.ground_overlap.unwrap_or(0.0);
    let z = report.zero_index.map(|i| report.eigenvalues[i]).unwrap_or(c64::new(f64::NAN, f64::NAN));
    let pass = report.simple && residual <= residual_tol && ov >= 1.0 - overlap_tol;
    Ok(GroundStateReport {
        residual,
        near_zero: report.near_zero,
        simple: report.simple,
        overlap: ov,
        zero_eigenvalue: [z.re, z.im],
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapBoundReport {
    pub gap: f64,
    pub c_min: f64,
    pub friction: f64,
    pub kappa_conv: f64,
    /// `κ_conv c_min ν (1 − slack)`.
    pub bound: f64,
    pub pass: bool,
}

/// `gap ≥ κ_conv · c_min · ν · (1 − GAP_SLACK)`. The certificate must use
/// the operator's Hessian normalisation and the requested region.
pub fn gap_bound_check(
    report: &SpectralReport,
    cert: &ConvexityCertificate,
    region: Region,
) -> Result<GapBoundReport> {
    if cert.convention != HESSIAN_CONVENTION {
        return Err(Error::ConventionMismatch(format!(
            "certificate uses '{}', operators use '{HESSIAN_CONVENTION}'",
            cert.convention
        )));
    }
    if cert.region != region {
        return Err(Error::ConventionMismatch(format!(
            "certificate region {:?} differs from requested {:?}",
            cert.region, region
        )));
    }
    let bound = KAPPA_CONV * cert.c_min * report.friction * (1.0 - GAP_SLACK);
    Ok(GapBoundReport {
        gap: report.gap,
        c_min: cert.c_min,
        friction: report.friction,
        kappa_conv: KAPPA_CONV,
        bound,
        pass: cert.pass && report.gap >= bound,
    })
}

/// Largest distance from each of the first `count` eigenvalues of `a` to
/// the nearest eigenvalue of `b`.
pub fn eigen_drift(a: &[c64], b: &[c64], count: usize) -> f64 {
    a.iter()
        .take(count)
        .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Sequence of values under refinement by a fixed ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub spacings: Vec<f64>,
    /// Error or drift at each level after the first.
    pub errors: Vec<f64>,
    /// `log(e_{k−1}/e_k) / log(h_{k−1}/h_k)` for the last two levels.
    pub order: f64,
    /// Every error is below `1e−12`.
    pub exact: bool,
}

impl RefinementStudy {
    pub fn new(spacings: Vec<f64>, errors: Vec<f64>) -> Self {
        let exact = errors.iter().all(|e| e.abs() < 1e-12);
        let n = errors.len();
        let order = if exact {
            f64::INFINITY
        } else if n >= 2 {
            let (sa, sb) = (spacings[spacings.len() - 2], spacings[spacings.len() - 1]);
            (errors[n - 2] / errors[n - 1]).ln() / (sa / sb).ln()
        } else {
            f64::NAN
        };
        Self {
            spacings,
            errors,
            order,
            exact,
        }
    }

    /// Converges at `order ≥ min_order`, or is exact.
    pub fn converges(&self, min_order: f64) -> bool {
        self.exact || self.order >= min_order
    }
}

/// `ε_disc = 3 × drift` between the two finest of three spectra, with the
/// order at which that drift shrinks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorStudy {
    pub margins: Vec<f64>,
    pub eps_disc: f64,
    pub study: RefinementStudy,
    pub pass: bool,
}

/// Sector containment on three nested resolutions `(h, spectrum)`, coarse
/// to fine: every margin on the finest level is at least `−ε_disc`, and the
/// drift shrinks at `min_order`.
pub fn sector_study(levels: &[(f64, &SpectralReport)], count: usize, min_order: f64) -> SectorStudy {
    let margins: Vec<f64> = levels.iter().map(|(_, r)| r.sector_margin).collect();
    let mut drifts = Vec::new();
    for w in levels.windows(2) {
        drifts.push(eigen_drift(&w[1].1.eigenvalues, &w[0].1.eigenvalues, count));
    }
    let spacings: Vec<f64> = levels.iter().skip(1).map(|(h, _)| *h).collect();
    let study = RefinementStudy::new(spacings, drifts.clone());
    let eps_disc = 3.0 * drifts.last().copied().unwrap_or(f64::NAN);
    let finest = *margins.last().unwrap();
    let pass = finest >= -eps_disc.max(1e-12) && study.converges(min_order);
    SectorStudy {
        margins,
        eps_disc,
        study,
        pass,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventReport {
    pub c0: f64,
    pub shifts: Vec<f64>,
    /// `min ‖(L − z)u‖ / ((c₀ − z)‖u‖)` over samples and shifts.
    pub min_ratio: f64,
    pub pass: bool,
}

/// `‖(L − z)u‖ ≥ (c₀ − z)‖u‖` for real `z < c₀`, on the given vectors
/// after projecting out the ground state.
pub fn resolvent_check(
    op: &DiscreteOperator,
    c0: f64,
    shifts: &[f64],
    samples: &[Vec<c64>],
    tol: f64,
) -> Result<ResolventReport> {
    let g = op
        .ground_state
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("operator carries no ground-state vector".into()))?;
    if let Some(z) = shifts.iter().find(|&&z| !(z < c0)) {
        return Err(Error::InvalidParams(format!("shift {z} is not below c0 = {c0}")));
    }
    let gn = norm(g);
    let mut min_ratio = f64::INFINITY;
    for s in samples {
        let mut u = s.clone();
        let c: c64 = g.iter().zip(&u).map(|(a, b)| a.conj() * b).sum::<c64>() / (gn * gn);
        for (ui, gi) in u.iter_mut().zip(g) {
            *ui -= c * gi;
        }
        let un = norm(&u);
        if !(un > 0.0) {
            continue;
        }
        let lu = op.apply(&u);
        for &z in shifts {
            let r: f64 = lu.iter().zip(&u).map(|(a, b)| (a - b * z).norm_sqr()).sum::<f64>().sqrt();
            min_ratio = min_ratio.min(r / ((c0 - z) * un));
        }
    }
    Ok(ResolventReport {
        c0,
        shifts: shifts.to_vec(),
        min_ratio,
        pass: min_ratio >= 1.0 - tol,
    })
}

/// Random smooth test vectors: `e^{−φ}` times random cubic polynomials in
/// the first two coordinates, sampled by `sample`.
pub fn smooth_samples(
    pot: &super::potential::PotentialDescriptor,
    sample: &dyn Fn(&dyn Fn(&[f64]) -> f64) -> Result<Vec<c64>>,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<c64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p = pot.clone();
            sample(&move |x: &[f64]| {
                let (a, b) = (x[0], x.get(1).copied().unwrap_or(0.0));
                let poly = c[0] + c[1] * a + c[2] * b + c[3] * a * a + c[4] * a * b + c[5] * b * b
                    + c[6] * a * a * a + c[7] * a * a * b + c[8] * a * b * b + c[9] * b * b * b;
                poly * (-p.value(x)).exp()
            })
        })
        .collect()
}

/// Identity defects of the Hermite–Galerkin complex at level `k`, each a
/// relative max-entry difference of exact rectangular maps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgebraReport {
    pub level: usize,
    /// Pointwise `L` against `Σ z_j^* Ã_jk z_k`.
    pub direct_vs_composed: f64,
    /// Pointwise `Σ z_j^* z_j` against `−Δ + |∇φ|² − Δφ`.
    pub sa_direct_vs_composed: f64,
    /// `d_φ d_φ` on 0-forms and `d_φ^* d_φ^*` on 2-forms.
    pub nilpotency: f64,
    /// `[z_i, z_j^*] − 2∂_i∂_jφ`.
    pub commutator: f64,
    /// `d_φ L − L¹ d_φ`.
    pub intertwining: f64,
    /// `d_φ Δ_sa − Δ¹_sa d_φ`.
    pub intertwining_sa: f64,
    /// `Δ¹_sa` against `d_φ d_φ^* + d_φ^* d_φ` on 1-forms.
    pub hodge_sa: f64,
    /// `d_φ^{*,A} d_φ` against `L`.
    pub deformed_factorisation: f64,
}

impl AlgebraReport {
    pub fn worst(&self) -> f64 {
        [
            self.direct_vs_composed,
            self.sa_direct_vs_composed,
            self.nilpotency,
            self.commutator,
            self.intertwining,
            self.intertwining_sa,
            self.hodge_sa,
            self.deformed_factorisation,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn witten_algebra(g: &HermiteGalerkin, k: usize) -> Result<AlgebraReport> {
    let s = g.raise();
    let d = g.dim();
    let (k1, k2, k3) = (k + s, k + 2 * s, k + 3 * s);
    let direct_vs_composed = relative_difference(&g.l_direct(k, k2)?, &g.l_composed(k, k2)?);
    let sa_direct_vs_composed = relative_difference(&g.delta0_sa_direct(k, k2)?, &g.delta0_sa(k, k2)?);

    // d d on 0-forms (K → K+2s) and d* d* via the transposed pattern.
    let zero = |nr: usize, nc: usize| Mat::<f64>::zeros(nr, nc);
    let dd = g.d1(k1, k2)? * g.d0(k, k1)?;
    let mut nil = relative_difference(&dd, &zero(dd.nrows(), dd.ncols()));
    for i in 0..d {
        for j in i + 1..d {
            let a = g.zstar(i, k1, k2)? * g.zstar(j, k, k1)?;
            let b = g.zstar(j, k1, k2)? * g.zstar(i, k, k1)?;
            nil = nil.max(relative_difference(&a, &b));
        }
    }

    let mut commutator = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let mut c = g.z(i, k1, k2)? * g.zstar(j, k, k1)?;
            axpy(&mut c, -1.0, &(g.zstar(j, k1, k2)? * g.z(i, k, k1)?));
            let h2 = g.mult(super::galerkin::Field::Hess(i, j), k, k2)?;
            let target = Mat::from_fn(h2.nrows(), h2.ncols(), |r, c| 2.0 * h2[(r, c)]);
            commutator = commutator.max(relative_difference(&target, &c));
        }
    }

    let lhs = g.d0(k2, k3)? * g.l_composed(k, k2)?;
    let rhs = g.one_form(k1, k3)? * g.d0(k, k1)?;
    let intertwining = relative_difference(&lhs, &rhs);
    let lhs = g.d0(k2, k3)? * g.delta0_sa(k, k2)?;
    let rhs = g.delta1_sa(k1, k3)? * g.d0(k, k1)?;
    let intertwining_sa = relative_difference(&lhs, &rhs);

    // On 1-forms V_K^d → V_{K+2s}^d.
    let dds = g.d0(k1, k2)? * g.d0_star(k, k1)?;
    let mut dsd = Mat::<f64>::zeros(d * g.size(k2), d * g.size(k));
    let d1 = g.d1(k, k1)?;
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    // (d*η)_i = Σ_j z_j^* η_ji, with η_ji = −η_ij.
    let n1 = g.size(k1);
    let n2 = g.size(k2);
    let mut dstar2 = Mat::<f64>::zeros(d * n2, pairs.len() * n1);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let zi = g.zstar(i, k1, k2)?;
        let zj = g.zstar(j, k1, k2)?;
        for c in 0..n1 {
            for r in 0..n2 {
                // component j gets z_i^* η_ij, component i gets −z_j^* η_ij.
                dstar2[(j * n2 + r, p * n1 + c)] += zi[(r, c)];
                dstar2[(i * n2 + r, p * n1 + c)] -= zj[(r, c)];
            }
        }
    }
    if !pairs.is_empty() {
        dsd = dstar2 * d1;
    }
    let mut hodge = dds;
    axpy(&mut hodge, 1.0, &dsd);
    let hodge_sa = relative_difference(&g.delta1_sa(k, k2)?, &hodge);

    let fact = g.d0_star_a(k1, k2)? * g.d0(k, k1)?;
    let deformed_factorisation = relative_difference(&g.l_composed(k, k2)?, &fact);

    Ok(AlgebraReport {
        level: k,
        direct_vs_composed,
        sa_direct_vs_composed,
        nilpotency: nil,
        commutator,
        intertwining,
        intertwining_sa,
        hodge_sa,
        deformed_factorisation,
    })
}

/// For the lowest `count` nonzero 0-form eigenvalues, the distance to the
/// nearest 1-form eigenvalue (worst case).
pub fn containment_defect(zero_form: &SpectralReport, one_form: &[c64], count: usize) -> f64 {
    let nz = zero_form.nonzero();
    eigen_drift(&nz, one_form, count)
}

/// `‖L¹ d_φu − κ d_φu‖ / ‖d_φu‖` with exact rectangular maps, worst over
/// the first `count` nonzero eigenpairs of `report` (computed on `V_K`).
pub fn pushforward_residual(g: &HermiteGalerkin, k: usize, report: &SpectralReport, count: usize) -> Result<f64> {
    let s = g.raise();
    let dz = g.d0(k, k + s)?;
    let l1 = g.one_form(k + s, k + 3 * s)?;
    let embed = block_diag(&g.embed(k + s, k + 3 * s), g.dim());
    let mut worst = 0.0f64;
    let mut used = 0;
    for (i, (kappa, v)) in report.eigenvalues.iter().zip(&report.vectors).enumerate() {
        if Some(i) == report.zero_index || used == count {
            continue;
        }
        used += 1;
        let du = mat_apply(&dz, v);
        let lhs = mat_apply(&l1, &du);
        let rhs = mat_apply(&embed, &du);
        let r: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b * kappa).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(r / norm(&du));
    }
    Ok(worst)
}

/// Overlap of the kernel eigenvector with a reference vector.
pub fn kernel_overlap(report: &SpectralReport, reference: &[c64]) -> Option<f64> {
    report.zero_index.map(|i| overlap(&report.vectors[i], reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DomainKind, ModelParams};
    use crate::spectral::potential::PotentialDescriptor;

    #[test]
    fn refinement_order_of_quadratic_errors() {
        let s = RefinementStudy::new(vec![0.1, 0.05, 0.025], vec![1e-2, 2.5e-3, 6.25e-4]);
        assert!((s.order - 2.0).abs() < 1e-12);
        assert!(s.converges(1.8));
        assert!(RefinementStudy::new(vec![0.1, 0.05], vec![1e-15, 0.0]).converges(1.8));
    }

    #[test]
    fn algebra_holds_for_the_defocusing_model() {
        let p = ModelParams {
            coupling: 0.5,
            domain: DomainKind::WholeSpace,
            ..ModelParams::default()
        };
        let g = HermiteGalerkin::new(&PotentialDescriptor::from_model(&p).unwrap(), 0.8).unwrap();
        let r = witten_algebra(&g, 4).unwrap();
        assert!(r.worst() < 1e-10, "{r:?}");
    }
}
