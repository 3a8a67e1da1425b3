//! Measurements behind `check-all`: each function runs one study and
//! returns raw numbers; [`check_all`] turns them into assertions.

use anyhow::Result;
use faer::c64;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use snls_core::convexity::{convexity_certificate, norm_equivalence_check, NormEquivalenceReport, Region};
use snls_core::gibbs::{metropolis_step, sample_expectations, Chain, McmcConfig, MomentReport};
use snls_core::langevin::{run_ensemble, RateEstimate, SdeConfig, TrajectoryRecord};
use snls_core::observables::Observable;
use snls_core::spectral::checks::{
    containment_defect, gap_bound_check, ground_state_check, pushforward_residual, resolvent_check, sector_study,
    smooth_samples, witten_algebra, AlgebraReport, GapBoundReport, GroundStateReport, RefinementStudy,
    ResolventReport, SectorStudy, KAPPA_CONV,
};
use snls_core::spectral::eigen::{compute_spectrum, SpectralReport};
use snls_core::spectral::galerkin::HermiteGalerkin;
use snls_core::spectral::grid::{FpGrid, GridBoundary, GridDomain};
use snls_core::spectral::operator::OperatorTag;
use snls_core::spectral::polar::PolarGrid;
use snls_core::spectral::potential::PotentialDescriptor;
use snls_core::spectral::semigroup::{evolve, fit_rate};
use snls_core::{DomainKind, FieldState64, Hamiltonian64, ModelParams, TangentVector64};

use crate::audit::convention_audit;
use crate::config::{CheckAllOptions, GapScanOptions};
use crate::output::Assertion;
use crate::runs::{langevin_moments, langevin_rate};
use crate::scan::gap_scan;

pub const GRID_CELLS: [usize; 3] = [20, 40, 80];
pub const POLAR_CELLS: [usize; 3] = [100, 200, 400];
pub const GALERKIN_LEVELS: [usize; 3] = [8, 16, 32];

fn focusing() -> ModelParams {
    ModelParams::default()
}

fn defocusing() -> ModelParams {
    ModelParams {
        coupling: 0.5,
        domain: DomainKind::WholeSpace,
        ..ModelParams::default()
    }
}

fn polar(model: &ModelParams, cells: usize, m_max: usize) -> Result<PolarGrid> {
    let pot = PotentialDescriptor::from_model(model)?;
    let r = PolarGrid::domain_radius(model, &pot, 0.0)?;
    Ok(PolarGrid::new(&pot, model.friction, r, cells, m_max)?)
}

fn grid(model: &ModelParams, cells: usize) -> Result<FpGrid> {
    let pot = PotentialDescriptor::from_model(model)?;
    let d = GridDomain::from_params(model, &pot)?;
    Ok(FpGrid::new(&pot, d, model.friction, cells)?)
}

/// Lowest eigenvalues of `L` for the free field `d = 1`, `N = 0`.
pub fn free_field_spectrum(friction: f64, count: usize) -> Result<SpectralReport> {
    let pot = PotentialDescriptor::from_model(&ModelParams::free_field(1, 0, friction))?;
    let g = HermiteGalerkin::new(&pot, friction)?;
    Ok(compute_spectrum(&g.operator(OperatorTag::L, 12)?, count)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorCase {
    pub name: String,
    pub study: SectorStudy,
}

fn study(name: &str, levels: Vec<(f64, SpectralReport)>) -> SectorCase {
    let refs: Vec<(f64, &SpectralReport)> = levels.iter().map(|(h, r)| (*h, r)).collect();
    SectorCase {
        name: name.into(),
        study: sector_study(&refs, 10, 1.8),
    }
}

/// Sector containment under refinement on every configured case.
pub fn sector_cases() -> Result<Vec<SectorCase>> {
    let mut out = Vec::new();
    for (name, model) in [
        ("free_field_galerkin", ModelParams::free_field(1, 0, 0.5)),
        ("defocusing_galerkin", defocusing()),
    ] {
        let g = HermiteGalerkin::new(&PotentialDescriptor::from_model(&model)?, model.friction)?;
        let levels = GALERKIN_LEVELS
            .iter()
            .map(|&k| Ok((1.0 / k as f64, compute_spectrum(&g.operator(OperatorTag::L, k)?, 10)?)))
            .collect::<Result<Vec<_>>>()?;
        out.push(study(name, levels));
    }
    let m = focusing();
    let levels = POLAR_CELLS
        .iter()
        .map(|&c| {
            let p = polar(&m, c, 4)?;
            Ok((p.radius / c as f64, compute_spectrum(&p.operator()?, 10)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(study("focusing_polar", levels));
    let levels = GRID_CELLS
        .iter()
        .map(|&c| {
            let g = grid(&m, c)?;
            Ok((g.h, compute_spectrum(&g.operator(GridBoundary::Neumann)?, 10)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(study("focusing_grid", levels));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundStudy {
    /// `‖L_h e^{−φ}‖` on the Neumann grid under refinement.
    pub neumann: RefinementStudy,
    /// The same with a Dirichlet mask.
    pub dirichlet: RefinementStudy,
    pub grid: GroundStateReport,
    pub polar: GroundStateReport,
    pub free_field: GroundStateReport,
}

pub fn ground_state_study() -> Result<GroundStudy> {
    let m = focusing();
    let (mut hs, mut rn, mut rd) = (Vec::new(), Vec::new(), Vec::new());
    let mut finest = None;
    for &c in &GRID_CELLS {
        let g = grid(&m, c)?;
        hs.push(g.h);
        rn.push(g.ground_state_residual(GridBoundary::Neumann)?);
        rd.push(g.ground_state_residual(GridBoundary::Dirichlet)?);
        finest = Some(g);
    }
    let g = finest.unwrap();
    let op = g.operator(GridBoundary::Neumann)?;
    let grid_report = ground_state_check(&op, &compute_spectrum(&op, 6)?, f64::INFINITY, 1e-6)?;
    let p = polar(&m, 400, 2)?.operator()?;
    let polar_report = ground_state_check(&p, &compute_spectrum(&p, 6)?, 1e-10, 1e-6)?;
    let f = HermiteGalerkin::new(&PotentialDescriptor::from_model(&ModelParams::free_field(1, 0, 1.0))?, 1.0)?
        .operator(OperatorTag::L, 10)?;
    let free_report = ground_state_check(&f, &compute_spectrum(&f, 6)?, 1e-10, 1e-10)?;
    Ok(GroundStudy {
        neumann: RefinementStudy::new(hs.clone(), rn),
        dirichlet: RefinementStudy::new(hs, rd),
        grid: grid_report,
        polar: polar_report,
        free_field: free_report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapBoundStudy {
    /// `gap / (c ν)` on the free field.
    pub calibration: f64,
    pub cases: Vec<(String, GapBoundReport)>,
    pub resolvent: ResolventReport,
}

pub fn gap_bound_study(samples: usize, seed: u64) -> Result<GapBoundStudy> {
    let free = ModelParams::free_field(1, 0, 1.0);
    let rf = free_field_spectrum(1.0, 6)?;
    let cf = convexity_certificate::<f64>(&free, Region::convexity_set(free.ball), samples, seed)?;
    let calibration = rf.gap / (cf.c_min * free.friction);

    let mut cases = Vec::new();
    let m = focusing();
    let region = Region::HamiltonianBall { ball: m.ball };
    let cert = convexity_certificate::<f64>(&m, region, samples, seed)?;
    let pg = polar(&m, 400, 4)?;
    let op = pg.operator()?;
    let rep = compute_spectrum(&op, 10)?;
    cases.push(("focusing_polar".to_string(), gap_bound_check(&rep, &cert, region)?));

    let d = defocusing();
    let dregion = Region::convexity_set(d.ball);
    let dcert = convexity_certificate::<f64>(&d, dregion, samples, seed)?;
    let g = HermiteGalerkin::new(&PotentialDescriptor::from_model(&d)?, d.friction)?;
    let drep = compute_spectrum(&g.operator(OperatorTag::L, 32)?, 10)?;
    cases.push(("defocusing_galerkin".to_string(), gap_bound_check(&drep, &dcert, dregion)?));

    // Resolvent bound with the certified constant on smooth vectors and the
    // computed eigenvectors.
    let c0 = KAPPA_CONV * cert.c_min * m.friction;
    let pot = PotentialDescriptor::from_model(&m)?;
    let mut vs = smooth_samples(&pot, &|f| Ok(pg.sample(f)), 20, seed)?;
    vs.extend(rep.vectors.iter().cloned());
    let shifts = [-1.0, 0.0, 0.5 * c0, 0.9 * c0];
    let resolvent = resolvent_check(&op, c0, &shifts, &vs, 1e-9)?;
    Ok(GapBoundStudy {
        calibration,
        cases,
        resolvent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossRoute {
    pub gap_polar: f64,
    pub gap_grid: f64,
    pub semigroup: RateEstimate,
    pub semigroup_retried: bool,
    pub langevin: RateEstimate,
}

/// Eigensolve gap, density decay and zero-mode autocorrelation on the
/// focusing `N = 0` model.
pub fn cross_route(t_max: f64, trajectories: usize, seed: u64) -> Result<CrossRoute> {
    let m = focusing();
    let pg = polar(&m, 400, 4)?;
    let op = pg.operator()?;
    let rep = compute_spectrum(&op, 8)?;
    let gop = grid(&m, 80)?.operator(GridBoundary::Neumann)?;
    let grep = compute_spectrum(&gop, 8)?;
    let pot = PotentialDescriptor::from_model(&m)?;
    let u0 = pg.sample(&move |x| (-pot.value(x)).exp() * (1.0 + 0.5 * x[0] + 0.3 * x[1]));
    let run = evolve(&op, &u0, 0.01, 15.0, 5)?;
    let semigroup = fit_rate(&run, 1e-2, 1e-8);
    let sde = SdeConfig {
        dt: 1e-3,
        t_max,
        record_stride: 10,
        burn_in: 5.0,
        rng_seed: seed,
        ..SdeConfig::default()
    };
    let (langevin, _) = langevin_rate(&m, &sde, trajectories)?;
    Ok(CrossRoute {
        gap_polar: rep.gap,
        gap_grid: grep.gap,
        semigroup,
        semigroup_retried: run.retried,
        langevin,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCase {
    pub model: ModelParams,
    pub langevin: Vec<MomentReport>,
    pub mcmc: Vec<MomentReport>,
    /// Largest `|Δ| / √(se₁² + se₂²)` over the observables.
    pub worst_z: f64,
}

/// The equilibrium comparison grid plus the unconstrained free field.
pub fn moment_models() -> Vec<ModelParams> {
    let mut v = Vec::new();
    for cutoff in [0, 2] {
        for coupling in [0.0, -0.05] {
            for domain in [DomainKind::HamiltonianBall, DomainKind::L2Ball] {
                v.push(ModelParams {
                    cutoff,
                    coupling,
                    domain,
                    ..ModelParams::default()
                });
            }
        }
        v.push(ModelParams::free_field(1, cutoff, 1.0));
    }
    v
}

pub fn equilibrium_case(model: &ModelParams, mcmc_steps: usize, t_max: f64, seed: u64) -> Result<MomentCase> {
    let ham = Hamiltonian64::new(model)?;
    let obs = Observable::standard_set(ham.len());
    let mc = McmcConfig {
        n_steps: mcmc_steps,
        burn_in: mcmc_steps / 10,
        rng_seed: seed,
        ..McmcConfig::default()
    };
    let mcmc = sample_expectations(&ham, &mc, &obs)?;
    // First-order reflection bias at this step is well below the error bars.
    let sde = SdeConfig {
        dt: 2.5e-4,
        t_max,
        record_stride: 20,
        burn_in: 5.0,
        rng_seed: seed,
        ..SdeConfig::default()
    };
    let records = run_ensemble(&ham, &ham.zero_state(), &sde, 2)?;
    let langevin = langevin_moments(&records, &obs, 40)?;
    let worst_z = langevin.iter().zip(&mcmc).map(|(a, b)| a.z_score(b)).fold(0.0, f64::max);
    Ok(MomentCase {
        model: model.clone(),
        langevin,
        mcmc,
        worst_z,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgebraStudy {
    pub reports: Vec<(String, AlgebraReport)>,
    /// `Δ_sa` spectrum of `φ = α|x|²` divided by `4α`.
    pub harmonic_levels: Vec<f64>,
    /// Containment and push-forward on the free field, where the basis is
    /// exact.
    pub containment_exact: f64,
    pub containment_sa_exact: f64,
    pub pushforward_exact: f64,
    /// Containment defect on the defocusing model at increasing levels.
    pub containment_defocusing: Vec<(usize, f64)>,
}

pub const HARMONIC_ALPHA: f64 = 0.7;

pub fn algebra_study(defocusing_levels: &[usize]) -> Result<AlgebraStudy> {
    let mut reports = Vec::new();
    let cases: Vec<(&str, PotentialDescriptor, f64)> = vec![
        ("free_field", PotentialDescriptor::from_model(&ModelParams::free_field(1, 0, 0.7))?, 0.7),
        ("defocusing", PotentialDescriptor::from_model(&defocusing())?, 1.0),
        ("cubic_quadratic", PotentialDescriptor::cubic_quadratic([0.1, -0.05, 0.07, 0.02])?, 0.7),
        ("harmonic", PotentialDescriptor::harmonic(HARMONIC_ALPHA, 2, true)?, 0.4),
    ];
    for (name, pot, nu) in &cases {
        reports.push((name.to_string(), witten_algebra(&HermiteGalerkin::new(pot, *nu)?, 6)?));
    }
    let h = HermiteGalerkin::new(&PotentialDescriptor::harmonic(HARMONIC_ALPHA, 2, false)?, 1.0)?;
    let hr = compute_spectrum(&h.operator(OperatorTag::Delta0Sa, 8)?, 15)?;
    let harmonic_levels = hr.eigenvalues.iter().map(|k| k.re / (4.0 * HARMONIC_ALPHA)).collect();

    let free = HermiteGalerkin::new(&PotentialDescriptor::from_model(&ModelParams::free_field(1, 0, 0.7))?, 0.7)?;
    let k = 10;
    let r0 = compute_spectrum(&free.operator(OperatorTag::L, k)?, 12)?;
    let r1 = compute_spectrum(&free.operator(OperatorTag::Delta1A, k)?, 40)?;
    let s0 = compute_spectrum(&free.operator(OperatorTag::Delta0Sa, k)?, 12)?;
    let s1 = compute_spectrum(&free.operator(OperatorTag::Delta1Sa, k)?, 40)?;
    let containment_exact = containment_defect(&r0, &r1.eigenvalues, 6);
    let containment_sa_exact = containment_defect(&s0, &s1.eigenvalues, 6);
    let pushforward_exact = pushforward_residual(&free, k, &r0, 6)?;

    let d = HermiteGalerkin::new(&PotentialDescriptor::from_model(&defocusing())?, 1.0)?;
    let containment_defocusing = defocusing_levels
        .iter()
        .map(|&k| {
            let r0 = compute_spectrum(&d.operator(OperatorTag::L, k)?, 12)?;
            let r1 = compute_spectrum(&d.operator(OperatorTag::Delta1A, k)?, 40)?;
            Ok((k, containment_defect(&r0, &r1.eigenvalues, 6)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlgebraStudy {
        reports,
        harmonic_levels,
        containment_exact,
        containment_sa_exact,
        pushforward_exact,
        containment_defocusing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeStudy {
    pub configurations: usize,
    /// Worst relative error of `dφ` against central differences.
    pub gradient: f64,
    /// Worst relative error of `φ'' v` against differences of the gradient.
    pub hessian: f64,
}

/// The three `(d, p, N)` families and random states in the unit box.
pub const DERIVATIVE_FAMILIES: [(usize, u32, usize); 3] = [(1, 4, 3), (1, 6, 2), (2, 4, 2)];

pub fn derivative_study(per_family: usize, seed: u64) -> Result<DerivativeStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let mut count = 0;
    for &(dim, p, n) in &DERIVATIVE_FAMILIES {
        let model = ModelParams {
            dim,
            exponent: p,
            cutoff: n,
            coupling: -0.3,
            ..ModelParams::default()
        };
        let ham = Hamiltonian64::new(&model)?;
        for _ in 0..per_family {
            let mut draw = |s: f64| -> Vec<Complex<f64>> {
                (0..ham.len())
                    .map(|_| Complex::new(rng.random_range(-s..s), rng.random_range(-s..s)))
                    .collect()
            };
            let a = draw(0.5);
            let v = draw(1.0);
            let (dphi, dg) = directional_differences(&ham, &a, &v, 3e-4);
            let (_, g) = ham.energy_and_gradient_unchecked(&a);
            let exact: f64 = 2.0 * g.iter().zip(&v).map(|(g, v)| (g.conj() * v).re).sum::<f64>();
            worst_g = worst_g.max((exact - dphi).abs() / exact.abs().max(1e-300));
            let hv = ham.hessian_apply_unchecked(&a, &TangentVector64::real_direction(v.clone()));
            let num: f64 = hv.w.iter().zip(&dg).map(|(h, d)| (h - d * 2.0).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = hv.w.iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt();
            worst_h = worst_h.max(num / den);
            count += 1;
        }
    }
    Ok(DerivativeStudy {
        configurations: count,
        gradient: worst_g,
        hessian: worst_h,
    })
}

/// Five-point central differences of `φ` and of `∂φ/∂ā` along `v`.
/// Directions with near-zero `dφ` need the O(h⁴) stencil to resolve `1e−6` relative error.
fn directional_differences(
    ham: &Hamiltonian64,
    a: &[Complex<f64>],
    v: &[Complex<f64>],
    eps: f64,
) -> (f64, Vec<Complex<f64>>) {
    let at = |s: f64| ham.energy_and_gradient_unchecked(&a.iter().zip(v).map(|(x, y)| x + y * s).collect::<Vec<_>>());
    let (f1, g1) = at(eps);
    let (fm1, gm1) = at(-eps);
    let (f2, g2) = at(2.0 * eps);
    let (fm2, gm2) = at(-2.0 * eps);
    let d = |p1: Complex<f64>, m1: Complex<f64>, p2: Complex<f64>, m2: Complex<f64>| {
        (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps)
    };
    let dg = (0..g1.len()).map(|k| d(g1[k], gm1[k], g2[k], gm2[k])).collect();
    let df = (8.0 * (f1 - fm1) - (f2 - fm2)) / (12.0 * eps);
    (df, dg)
}

/// Nonlinear part of the gradient, `g_n − (|n|²+1)a_n`, against
/// `λ Σ a_{k₁} ā_{k₂} a_{k₃} ⋯` over all mode tuples whose signed sum is `n`.
/// Returns the worst relative error over `count` random states per family.
pub fn convolution_study(count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &(dim, p, _) in &DERIVATIVE_FAMILIES {
        for n in 0..=2 {
            let model = ModelParams {
                dim,
                exponent: p,
                cutoff: n,
                coupling: -0.3,
                ..ModelParams::default()
            };
            let ham = Hamiltonian64::new(&model)?;
            let lat = ham.lattice();
            for _ in 0..count {
                let a: Vec<Complex<f64>> = (0..ham.len())
                    .map(|_| Complex::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                    .collect();
                let (_, g) = ham.energy_and_gradient_unchecked(&a);
                let brute = brute_force_nonlinearity(lat, &a, p as usize);
                let mut err = 0.0f64;
                let mut scale = 0.0f64;
                for k in 0..a.len() {
                    let lin = a[k] * (lat.norm_sq(k) + 1) as f64;
                    err = err.max((g[k] - lin - brute[k] * model.coupling).norm());
                    scale = scale.max((brute[k] * model.coupling).norm());
                }
                worst = worst.max(err / scale.max(1e-300));
            }
        }
    }
    Ok(worst)
}

/// Fourier coefficients of `|u|^{p−2}u` for `|n| ≤ N` by direct summation
/// over `p − 1` modes: `p/2` unconjugated and `p/2 − 1` conjugated.
pub fn brute_force_nonlinearity(lat: &snls_core::ModeLattice, a: &[Complex<f64>], p: usize) -> Vec<Complex<f64>> {
    let m = a.len();
    let factors = p - 1;
    let dim = lat.dim();
    let mut out = vec![Complex::new(0.0, 0.0); m];
    let mut idx = vec![0usize; factors];
    loop {
        let mut n = vec![0i32; dim];
        let mut prod = Complex::new(1.0, 0.0);
        for (j, &k) in idx.iter().enumerate() {
            let conj = j % 2 == 1;
            for (c, v) in n.iter_mut().zip(lat.mode(k)) {
                *c += if conj { -v } else { *v };
            }
            prod *= if conj { a[k].conj() } else { a[k] };
        }
        if let Some(t) = lat.index_of(&n) {
            out[t] += prod;
        }
        let mut j = 0;
        while j < factors {
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == factors {
            return out;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangencyStudy {
    pub configurations: usize,
    /// Worst `|⟨h_φ, ∇φ⟩| / (‖h_φ‖ ‖∇φ‖)`.
    pub energy: f64,
    /// Worst `|⟨h_φ, ∇‖a‖²⟩| / (‖h_φ‖ ‖∇‖a‖²‖)`.
    pub mass: f64,
    /// Worst tangency at points of the Hamiltonian-ball boundary.
    pub boundary: f64,
}

pub fn tangency_study(count: usize, seed: u64) -> Result<TangencyStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut e, mut m, mut b) = (0.0f64, 0.0f64, 0.0f64);
    let model = ModelParams {
        cutoff: 3,
        coupling: -0.3,
        ..ModelParams::default()
    };
    let ham = Hamiltonian64::new(&model)?;
    let ratio = |x: &TangentVector64, y: &TangentVector64| {
        x.inner(y).abs() / (x.inner(x).sqrt() * y.inner(y).sqrt()).max(1e-300)
    };
    for _ in 0..count {
        let a: Vec<Complex<f64>> = (0..ham.len())
            .map(|_| Complex::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)))
            .collect();
        let s = FieldState64::from_coeffs(a.clone());
        let h = ham.hamiltonian_vector_field(&s)?;
        e = e.max(ratio(&h, &ham.paired_gradient(&s)?));
        let mass = TangentVector64::real_direction(a.clone());
        m = m.max(ratio(&h, &mass));
        // Scale onto {φ = B} along the ray and test against the normal.
        let phi = |t: f64| ham.reduced_hamiltonian_unchecked(&a.iter().map(|c| c * t).collect::<Vec<_>>());
        let (mut lo, mut hi) = (0.0, 1.0);
        while phi(hi) < model.ball && hi < 1e6 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < model.ball {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sb = FieldState64::from_coeffs(a.iter().map(|c| c * lo).collect());
        if let Some((_, normal)) = ham.constraint_and_normal(&sb.coeffs) {
            let hb = ham.hamiltonian_vector_field(&sb)?;
            b = b.max(ratio(&hb, &TangentVector64::real_direction(normal)));
        }
    }
    Ok(TangencyStudy {
        configurations: count,
        energy: e,
        mass: m,
        boundary: b,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelStudy {
    /// Worst `|φ(e^{iθ}a) − φ(a)| / |φ(a)|`.
    pub gauge: f64,
    /// `λ = 0`: worst relative gap between `φ` and `Σ(|n|²+1)|a_n|²`.
    pub free_phi: f64,
    /// `λ = 0`: worst `|(e_k, φ'' e_k) − 2(|n|²+1)|`.
    pub free_hessian_diagonal: f64,
    /// Worst `|⟨v, φ''w⟩ − ⟨φ''v, w⟩|` relative to `‖φ''v‖‖w‖`.
    pub hessian_symmetry: f64,
    /// Worst `|⟨v, φ''v⟩ − (v, φ''v)|` relative to the form.
    pub hessian_form: f64,
    /// Worst relative error of the form against the second difference of `φ`.
    pub second_difference: f64,
}

pub fn model_study(count: usize, seed: u64) -> Result<ModelStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = ModelStudy {
        gauge: 0.0,
        free_phi: 0.0,
        free_hessian_diagonal: 0.0,
        hessian_symmetry: 0.0,
        hessian_form: 0.0,
        second_difference: 0.0,
    };
    for &(dim, p, n) in &DERIVATIVE_FAMILIES {
        for coupling in [0.0, -0.3] {
            let model = ModelParams {
                dim,
                exponent: p,
                cutoff: n,
                coupling,
                ..ModelParams::default()
            };
            let ham = Hamiltonian64::new(&model)?;
            let lat = ham.lattice();
            for _ in 0..count {
                let mut draw = || -> Vec<Complex<f64>> {
                    (0..ham.len())
                        .map(|_| Complex::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                        .collect()
                };
                let a = draw();
                let v = TangentVector64::real_direction(draw());
                let w = TangentVector64::real_direction(draw());
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let s = FieldState64::from_coeffs(a.clone());
                let phi = ham.reduced_hamiltonian(&s)?;
                st.gauge = st.gauge.max((ham.reduced_hamiltonian(&s.rotate(theta))? - phi).abs() / phi.abs());
                let hv = ham.hessian_apply(&s, &v)?;
                let hw = ham.hessian_apply(&s, &w)?;
                let sym = (v.inner(&hw) - hv.inner(&w)).abs() / (hv.inner(&hv).sqrt() * w.inner(&w).sqrt());
                st.hessian_symmetry = st.hessian_symmetry.max(sym);
                let form = ham.hessian_quadratic_form(&s, &v)?;
                st.hessian_form = st.hessian_form.max((v.inner(&hv) - form).abs() / form.abs());
                let eps = 1e-4;
                let at = |t: f64| ham.reduced_hamiltonian_unchecked(&a.iter().zip(&v.w).map(|(x, y)| x + y * t).collect::<Vec<_>>());
                let second = (at(eps) - 2.0 * phi + at(-eps)) / (eps * eps);
                st.second_difference = st.second_difference.max((second - form).abs() / form.abs());
                if coupling == 0.0 {
                    let closed: f64 = a.iter().enumerate().map(|(k, c)| (lat.norm_sq(k) + 1) as f64 * c.norm_sqr()).sum();
                    st.free_phi = st.free_phi.max((phi - closed).abs() / closed);
                    for k in 0..ham.len() {
                        let mut e = vec![Complex::new(0.0, 0.0); ham.len()];
                        e[k] = Complex::new(1.0, 0.0);
                        let q = ham.hessian_quadratic_form(&s, &TangentVector64::real_direction(e))?;
                        st.free_hessian_diagonal =
                            st.free_hessian_diagonal.max((q - 2.0 * (lat.norm_sq(k) + 1) as f64).abs());
                    }
                }
            }
        }
    }
    Ok(st)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LangevinStudy {
    pub bit_identical: bool,
    pub records: usize,
    /// Recorded states outside the domain, judged from the recorded `φ`,
    /// `‖a‖²` and `|a_n|²`.
    pub outside: usize,
    /// Worst moment `z` between `dt` and `dt/2`.
    pub dt_halving_z: f64,
    pub dt: f64,
}

fn recorded_inside(model: &ModelParams, r: &TrajectoryRecord<f64>, lat: &snls_core::ModeLattice) -> usize {
    (0..r.len())
        .filter(|&i| match model.domain {
            DomainKind::WholeSpace => true,
            DomainKind::L2Ball => r.l2sq[i] < model.ball,
            DomainKind::HamiltonianBall => {
                let h1: f64 = r.mode_power[i].iter().enumerate().map(|(k, p)| (lat.norm_sq(k) + 1) as f64 * p).sum();
                r.phi[i].abs() < model.ball && h1 < 5.0 * model.ball
            }
        })
        .count()
}

pub fn langevin_study(t_max: f64, seed: u64) -> Result<LangevinStudy> {
    let mut outside = 0;
    let mut records = 0;
    let mut bit_identical = true;
    for domain in [DomainKind::HamiltonianBall, DomainKind::L2Ball] {
        let model = ModelParams {
            cutoff: 2,
            domain,
            ..ModelParams::default()
        };
        let ham = Hamiltonian64::new(&model)?;
        let sde = SdeConfig {
            dt: 1e-3,
            t_max: 20.0,
            record_stride: 1,
            rng_seed: seed,
            ..SdeConfig::default()
        };
        let a = run_ensemble(&ham, &ham.zero_state(), &sde, 2)?;
        let b = run_ensemble(&ham, &ham.zero_state(), &sde, 2)?;
        bit_identical &= a.iter().zip(&b).all(|(x, y)| {
            x.phi.iter().map(|v| v.to_bits()).eq(y.phi.iter().map(|v| v.to_bits()))
                && x.final_state.coeffs == y.final_state.coeffs
        });
        for r in &a {
            records += r.len();
            outside += r.len() - recorded_inside(&model, r, ham.lattice());
        }
    }
    let model = ModelParams {
        cutoff: 2,
        ..ModelParams::default()
    };
    let ham = Hamiltonian64::new(&model)?;
    let obs = Observable::standard_set(ham.len());
    let dt = 5e-4;
    let moments = |dt: f64, seed: u64| -> Result<Vec<MomentReport>> {
        let sde = SdeConfig {
            dt,
            t_max,
            record_stride: (0.01 / dt).round() as usize,
            burn_in: 5.0,
            rng_seed: seed,
            ..SdeConfig::default()
        };
        langevin_moments(&run_ensemble(&ham, &ham.zero_state(), &sde, 2)?, &obs, 40)
    };
    let coarse = moments(dt, seed)?;
    let fine = moments(0.5 * dt, seed.wrapping_add(1))?;
    let dt_halving_z = coarse.iter().zip(&fine).map(|(a, b)| a.z_score(b)).fold(0.0, f64::max);
    Ok(LangevinStudy {
        bit_identical,
        records,
        outside,
        dt_halving_z,
        dt,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reversibility {
    /// `Σ (C_ij − C_ji)² / (C_ij + C_ji)` over bin pairs.
    pub statistic: f64,
    pub pairs: usize,
}

impl Reversibility {
    /// `statistic ≤ df + 4√(2 df)`.
    pub fn consistent(&self) -> bool {
        let df = self.pairs as f64;
        self.statistic <= df + 4.0 * (2.0 * df).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GibbsStudy {
    pub reversibility: Reversibility,
    /// The same counts with a phase rotation after every step: the measure is
    /// preserved but the chain is not reversible.
    pub rotated_control: Reversibility,
    /// `(case, observable, mcmc mean, se, quadrature value, z)`.
    pub quadrature: Vec<(String, String, f64, f64, f64, f64)>,
    pub deterministic: bool,
}

/// Transition counts between 4 radial × 6 angular bins of `a₀` on the
/// default `N = 0` model.
pub fn reversibility(steps: usize, seed: u64, rotate: f64) -> Result<Reversibility> {
    let model = ModelParams::default();
    let ham = Hamiltonian64::new(&model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Chain::new(&ham, ham.zero_state(), 0.5)?;
    let (nr, na) = (4usize, 6usize);
    let bin = |a: Complex<f64>| {
        let r = ((a.norm_sqr() / 0.4 * nr as f64) as usize).min(nr - 1);
        let t = (a.arg() + std::f64::consts::PI) / std::f64::consts::TAU;
        r * na + ((t * na as f64) as usize).min(na - 1)
    };
    for _ in 0..10_000 {
        metropolis_step(&ham, &mut chain, &mut rng);
    }
    let m = nr * na;
    let mut counts = vec![0u64; m * m];
    let mut prev = bin(chain.state.coeffs[0]);
    for _ in 0..steps {
        metropolis_step(&ham, &mut chain, &mut rng);
        if rotate != 0.0 {
            chain.state = chain.state.rotate(rotate);
        }
        let b = bin(chain.state.coeffs[0]);
        counts[prev * m + b] += 1;
        prev = b;
    }
    let (mut statistic, mut pairs) = (0.0, 0);
    for i in 0..m {
        for j in i + 1..m {
            let (x, y) = (counts[i * m + j] as f64, counts[j * m + i] as f64);
            if x + y >= 20.0 {
                statistic += (x - y) * (x - y) / (x + y);
                pairs += 1;
            }
        }
    }
    Ok(Reversibility { statistic, pairs })
}

/// `E f(|a₀|²)` under `e^{−2φ}` restricted to the domain, for `N = 0`, by
/// Simpson's rule in `s = |a₀|²` (the area element is `π ds`).
pub fn radial_expectation(model: &ModelParams, f: &dyn Fn(f64, f64) -> f64) -> Result<f64> {
    let ham = Hamiltonian64::new(model)?;
    let phi = |s: f64| ham.reduced_hamiltonian_unchecked(&[Complex::new(s.sqrt(), 0.0)]);
    let inside = |s: f64| ham.in_domain_unchecked(&[Complex::new(s.sqrt(), 0.0)]).inside;
    let (mut lo, mut hi) = (0.0, 1.0);
    while inside(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n = 20_000;
    let h = lo / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let s = i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let p = phi(s);
        let rho = (-2.0 * p).exp();
        num += w * f(s, p) * rho;
        den += w * rho;
    }
    Ok(num / den)
}

pub fn gibbs_study(steps: usize, seed: u64) -> Result<GibbsStudy> {
    let reversibility_main = reversibility(steps, seed, 0.0)?;
    let rotated_control = reversibility(steps, seed, 0.3)?;
    let mut quadrature = Vec::new();
    let mut deterministic = true;
    for (name, model) in [
        ("focusing_hamiltonian_ball", ModelParams::default()),
        ("focusing_l2_ball", ModelParams { domain: DomainKind::L2Ball, ..ModelParams::default() }),
        ("sextic_hamiltonian_ball", ModelParams { exponent: 6, coupling: -0.05, ..ModelParams::default() }),
    ] {
        let ham = Hamiltonian64::new(&model)?;
        let obs = Observable::standard_set(1);
        let cfg = McmcConfig {
            n_steps: steps,
            burn_in: steps / 10,
            rng_seed: seed,
            ..McmcConfig::default()
        };
        let m = sample_expectations(&ham, &cfg, &obs)?;
        deterministic &= sample_expectations(&ham, &cfg, &obs)? == m;
        let exact = [
            radial_expectation(&model, &|_, p| p)?,
            radial_expectation(&model, &|s, _| s)?,
            radial_expectation(&model, &|s, _| s)?,
        ];
        for (r, e) in m.iter().zip(exact) {
            quadrature.push((name.to_string(), r.observable.clone(), r.mean, r.se, e, (r.mean - e).abs() / r.se));
        }
    }
    Ok(GibbsStudy {
        reversibility: reversibility_main,
        rotated_control,
        quadrature,
        deterministic,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridAlgebraStudy {
    /// Direct against composed assembly on a smooth function, relative.
    pub direct_vs_composed: RefinementStudy,
    pub commutator: RefinementStudy,
    pub nilpotency: RefinementStudy,
}

pub fn grid_algebra_study() -> Result<GridAlgebraStudy> {
    let m = focusing();
    let pot = PotentialDescriptor::from_model(&m)?;
    let u = move |x: &[f64]| (-pot.value(x)).exp() * (1.0 + 0.3 * x[0] + 0.2 * x[1] * x[1]);
    let (mut hs, mut dc, mut cm, mut nl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &c in &GRID_CELLS {
        let g = grid(&m, c)?;
        let ks = g.deep_interior(3);
        let d = g.apply_direct_smooth(&u, &ks);
        let e = g.apply_composed_smooth(&u, &ks);
        let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        hs.push(g.h);
        dc.push(d.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max(g.commutator_defect(i, j, &u, &ks));
            }
        }
        cm.push(worst);
        nl.push(g.nilpotency_defect(&u, &ks));
    }
    Ok(GridAlgebraStudy {
        direct_vs_composed: RefinementStudy::new(hs.clone(), dc),
        commutator: RefinementStudy::new(hs.clone(), cm),
        nilpotency: RefinementStudy::new(hs, nl),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemigroupStudy {
    /// Largest deviation when started at the ground state.
    pub stationary_deviation: f64,
    /// Free-field rate from a shifted Gaussian, with `ν`.
    pub free_rate: RateEstimate,
    pub friction: f64,
}

pub fn semigroup_study() -> Result<SemigroupStudy> {
    let p = polar(&focusing(), 200, 2)?;
    let op = p.operator()?;
    let g = op.ground_state.clone().expect("polar operator carries e^{-phi}");
    let run = evolve(&op, &g, 0.01, 5.0, 5)?;
    let stationary_deviation = run.deviations.iter().fold(0.0f64, |a, v| a.max(*v));
    let nu = 0.8;
    let free = ModelParams::free_field(1, 0, nu);
    let pot = PotentialDescriptor::from_model(&free)?;
    let basis = HermiteGalerkin::new(&pot, nu)?;
    let op = basis.operator(OperatorTag::L, 16)?;
    let u0: Vec<c64> = basis
        .project(&move |x| (-pot.value(&[x[0] - 0.6, x[1]])).exp(), 16)?
        .into_iter()
        .map(|v| c64::new(v, 0.0))
        .collect();
    let run = evolve(&op, &u0, 0.01, 12.0, 5)?;
    Ok(SemigroupStudy {
        stationary_deviation,
        free_rate: fit_rate(&run, 1e-2, 1e-8),
        friction: nu,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityStudy {
    /// `λ = 0`: `(N, c_min, c_max)`.
    pub free: Vec<(usize, f64, f64)>,
    /// Defocusing `λ = 1`: `(N, c_min, pass)`.
    pub defocusing: Vec<(usize, f64, bool)>,
    pub norm_equivalence: NormEquivalenceReport,
}

pub fn convexity_study(samples: usize, seed: u64) -> Result<ConvexityStudy> {
    let mut free = Vec::new();
    for n in [2, 4, 8] {
        let m = ModelParams::free_field(1, n, 1.0);
        let c = convexity_certificate::<f64>(&m, Region::convexity_set(m.ball), samples, seed)?;
        free.push((n, c.c_min, c.c_max));
    }
    let mut defocusing = Vec::new();
    for n in [2, 4, 8, 16, 32] {
        let m = ModelParams {
            coupling: 1.0,
            cutoff: n,
            ..ModelParams::default()
        };
        let c = convexity_certificate::<f64>(&m, Region::convexity_set(m.ball), samples, seed)?;
        defocusing.push((n, c.c_min, c.pass));
    }
    let norm_equivalence = norm_equivalence_check::<f64>(
        &ModelParams {
            cutoff: 4,
            coupling: -0.01,
            ..ModelParams::default()
        },
        samples,
        seed,
    )?;
    Ok(ConvexityStudy {
        free,
        defocusing,
        norm_equivalence,
    })
}

/// A named group of assertions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub assertions: Vec<Assertion>,
}

impl Section {
    fn new(name: &str, assertions: Vec<Assertion>) -> Self {
        Self {
            name: name.into(),
            assertions,
        }
    }

    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Complex-OU levels `(ν + i)k + (ν − i)l` with `k + l ≤ total`.
pub fn ou_levels(friction: f64, total: usize) -> Vec<c64> {
    let mut v = Vec::new();
    for s in 0..=total {
        for k in 0..=s {
            let l = s - k;
            v.push(c64::new(friction * s as f64, k as f64 - l as f64));
        }
    }
    v
}

/// Runs every invariant once on the default focusing case and its
/// companions.
pub fn check_all(opts: &CheckAllOptions, seed: u64, mut log: impl FnMut(&Section)) -> Result<Vec<Section>> {
    let mut sections = Vec::new();
    let mut push = |s: Section, sections: &mut Vec<Section>| {
        log(&s);
        sections.push(s);
    };

    let mut a = Vec::new();
    for nu in [0.25, 1.0] {
        let r = free_field_spectrum(nu, 11)?;
        let oracle = ou_levels(nu, 3);
        let worst = oracle
            .iter()
            .filter(|k| k.norm() > 0.0)
            .map(|o| r.nonzero().iter().map(|k| (k - o).norm() / o.norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        a.push(Assertion::at_most(format!("ladder_nu_{nu}"), worst, 0.02));
        a.push(Assertion::at_most(format!("ladder_gap_nu_{nu}"), rel(r.gap, nu), 0.02));
    }
    push(Section::new("free_field_ladder", a), &mut sections);

    let a = sector_cases()?
        .into_iter()
        .map(|c| {
            let finest = *c.study.margins.last().unwrap();
            Assertion::holds(format!("sector_{}", c.name), c.study.pass).with_detail(format!(
                "margin {finest:.3e}, eps_disc {:.3e}, order {:.2}",
                c.study.eps_disc, c.study.study.order
            ))
        })
        .collect();
    push(Section::new("sector_containment", a), &mut sections);

    let g = ground_state_study()?;
    let a = vec![
        Assertion::at_least("ground_residual_order_grid", g.neumann.order, 1.8),
        Assertion::holds("dirichlet_control_fails", !g.dirichlet.converges(1.8))
            .with_detail(format!("residuals {:?}", g.dirichlet.errors)),
        Assertion::holds("kernel_simple_grid", g.grid.simple),
        Assertion::at_least("ground_overlap_grid", g.grid.overlap, 1.0 - 1e-6),
        Assertion::holds("ground_state_polar", g.polar.pass),
        Assertion::holds("ground_state_free_field", g.free_field.pass),
    ];
    push(Section::new("ground_state", a), &mut sections);

    let ms = model_study(4, seed)?;
    let cs = convexity_study(50, seed)?;
    let mut a = vec![
        Assertion::at_most("gauge_invariance", ms.gauge, 1e-13),
        Assertion::at_most("free_phi_closed_form", ms.free_phi, 1e-13),
        Assertion::at_most("free_hessian_diagonal", ms.free_hessian_diagonal, 1e-12),
        Assertion::at_most("hessian_symmetry", ms.hessian_symmetry, 1e-12),
        Assertion::at_most("hessian_apply_reproduces_form", ms.hessian_form, 1e-12),
        Assertion::at_most("hessian_vs_second_difference", ms.second_difference, 1e-5),
    ];
    for &(n, lo, hi) in &cs.free {
        let want_hi = 2.0 * ((n * n) as f64 + 1.0);
        a.push(Assertion::at_most(format!("free_certificate_N{n}"), (lo - 2.0).abs().max((hi - want_hi).abs() / want_hi), 1e-8));
    }
    for &(n, c, pass) in &cs.defocusing {
        a.push(Assertion::holds(format!("defocusing_certificate_N{n}"), pass).with_detail(format!("c_min {c:.6}")));
    }
    a.push(Assertion::holds("norm_equivalence", cs.norm_equivalence.pass).with_detail(format!(
        "ratios [{:.4}, {:.4}]",
        cs.norm_equivalence.worst_ratio_low, cs.norm_equivalence.worst_ratio_high
    )));
    push(Section::new("model_core", a), &mut sections);

    let ls = langevin_study(opts.moment_t_max, seed)?;
    let a = vec![
        Assertion::holds("langevin_bit_identical", ls.bit_identical),
        Assertion::at_most("langevin_records_outside_domain", ls.outside as f64, 0.0)
            .with_detail(format!("{} records", ls.records)),
        Assertion::at_most("langevin_dt_halving", ls.dt_halving_z, 3.0).with_detail(format!("dt {} vs {}", ls.dt, 0.5 * ls.dt)),
    ];
    push(Section::new("langevin", a), &mut sections);

    let gs = gibbs_study(opts.mcmc_steps, seed)?;
    let mut a = vec![
        Assertion::holds("metropolis_reversible", gs.reversibility.consistent())
            .with_detail(format!("chi2 {:.1} on {} pairs", gs.reversibility.statistic, gs.reversibility.pairs)),
        Assertion::holds("rotated_chain_detected", !gs.rotated_control.consistent()).with_detail(format!(
            "chi2 {:.1} on {} pairs",
            gs.rotated_control.statistic, gs.rotated_control.pairs
        )),
        Assertion::holds("metropolis_deterministic", gs.deterministic),
    ];
    for (case, obs, _, _, _, z) in &gs.quadrature {
        a.push(Assertion::at_most(format!("quadrature_{case}_{obs}"), *z, 3.0));
    }
    push(Section::new("gibbs_oracle", a), &mut sections);

    let gb = gap_bound_study(200, seed)?;
    let mut a = vec![Assertion::at_most("kappa_conv_calibration", (gb.calibration - KAPPA_CONV).abs(), 1e-9)];
    for (name, r) in &gb.cases {
        a.push(
            Assertion::at_least(format!("gap_bound_{name}"), r.gap, r.bound)
                .with_detail(format!("c_min {:.6}", r.c_min)),
        );
    }
    a.push(Assertion::at_least("resolvent_ratio", gb.resolvent.min_ratio, 1.0 - 1e-9));
    push(Section::new("gap_bound", a), &mut sections);

    let cr = cross_route(opts.langevin_t_max, 8, seed)?;
    let a = vec![
        Assertion::at_most("grid_vs_polar_gap", rel(cr.gap_grid, cr.gap_polar), 0.01),
        Assertion::at_most("semigroup_vs_gap", rel(cr.semigroup.rate, cr.gap_polar), 0.10),
        Assertion::at_most("langevin_vs_gap", rel(cr.langevin.rate, cr.gap_polar), 0.20).with_detail(format!(
            "rate {:.4} [{:.4}, {:.4}]",
            cr.langevin.rate, cr.langevin.ci_low, cr.langevin.ci_high
        )),
        Assertion::at_most("langevin_vs_semigroup", rel(cr.langevin.rate, cr.semigroup.rate), 0.20),
    ];
    let sg = semigroup_study()?;
    let mut a = a;
    a.push(Assertion::at_most("semigroup_stationary", sg.stationary_deviation, 1e-10));
    a.push(Assertion::at_most("semigroup_free_field_rate", rel(sg.free_rate.rate, sg.friction), 0.10));
    push(Section::new("cross_route", a), &mut sections);

    let mut a = Vec::new();
    for m in moment_models() {
        let c = equilibrium_case(&m, opts.mcmc_steps, opts.moment_t_max, seed)?;
        let name = format!("moments_N{}_lambda{}_{}", m.cutoff, m.coupling, m.domain.as_str());
        a.push(Assertion::at_most(name, c.worst_z, 3.0));
        if m.domain == DomainKind::WholeSpace {
            let ham = Hamiltonian64::new(&m)?;
            for (k, (l, s)) in c.langevin.iter().zip(&c.mcmc).skip(2).enumerate() {
                let exact = 1.0 / (2.0 * (ham.lattice().norm_sq(k) as f64 + 1.0));
                let z = ((l.mean - exact) / l.se).abs().max(((s.mean - exact) / s.se).abs());
                a.push(Assertion::at_most(format!("free_field_exact_N{}_{}", m.cutoff, l.observable), z, 3.0));
            }
        }
    }
    push(Section::new("equilibrium", a), &mut sections);

    if opts.gap_scan {
        let scan_opts = GapScanOptions {
            seed,
            ..GapScanOptions::default()
        };
        let model = ModelParams {
            coupling: -0.01,
            ..ModelParams::default()
        };
        let t = gap_scan(&model, &scan_opts)?;
        push(Section::new("gap_scan", t.assertions(&scan_opts)), &mut sections);
    }

    let al = algebra_study(&[20, 30])?;
    let mut a: Vec<Assertion> = al
        .reports
        .iter()
        .map(|(n, r)| Assertion::at_most(format!("algebra_{n}"), r.worst(), 1e-10))
        .collect();
    let harmonic = al
        .harmonic_levels
        .iter()
        .zip(harmonic_multiset(al.harmonic_levels.len()))
        .map(|(x, k)| (x - k as f64).abs())
        .fold(0.0, f64::max);
    a.push(Assertion::at_most("harmonic_levels", harmonic, 1e-6));
    a.push(Assertion::at_most("containment_free_field", al.containment_exact, 1e-8));
    a.push(Assertion::at_most("containment_sa_free_field", al.containment_sa_exact, 1e-8));
    a.push(Assertion::at_most("pushforward_free_field", al.pushforward_exact, 1e-8));
    let cd = &al.containment_defocusing;
    a.push(
        Assertion::holds("containment_defocusing_converges", cd.windows(2).all(|w| w[1].1 < 0.1 * w[0].1))
            .with_detail(format!("{cd:?}")),
    );
    let ga = grid_algebra_study()?;
    for (name, st) in [
        ("grid_direct_vs_composed_order", &ga.direct_vs_composed),
        ("grid_commutator_order", &ga.commutator),
        ("grid_nilpotency_order", &ga.nilpotency),
    ] {
        a.push(Assertion::at_least(name, st.order, 1.8).with_detail(format!("errors {:?}", st.errors)));
    }
    push(Section::new("witten_algebra", a), &mut sections);

    let d = derivative_study(17, seed)?;
    let t = tangency_study(50, seed)?;
    let a = vec![
        Assertion::at_most("gradient_vs_differences", d.gradient, 1e-6),
        Assertion::at_most("hessian_vs_differences", d.hessian, 1e-5),
        Assertion::at_most("dealiased_vs_convolution", convolution_study(3, seed)?, 1e-12),
        Assertion::at_most("tangency_energy", t.energy, 1e-12),
        Assertion::at_most("tangency_mass", t.mass, 1e-12),
        Assertion::at_most("tangency_boundary", t.boundary, 1e-12),
    ];
    push(Section::new("derivatives_and_tangency", a), &mut sections);

    let au = convention_audit()?;
    push(Section::new("convention_audit", au.assertions()), &mut sections);
    Ok(sections)
}

/// `0, 1, 1, 2, 2, 2, …`: level `k` repeated `k + 1` times.
pub fn harmonic_multiset(count: usize) -> Vec<usize> {
    (0..).flat_map(|k| std::iter::repeat_n(k, k + 1)).take(count).collect()
}
