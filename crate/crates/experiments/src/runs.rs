//! Single-purpose runs: simulate, sample, spectrum, convexity.

use anyhow::Result;
use serde_json::json;
use snls_core::convexity::{convexity_certificate, Region};
use snls_core::gibbs::{sample_expectations_with_acceptance, write_moments_csv, MomentReport};
use snls_core::langevin::{
    estimate_rate, run_ensemble, RateEstimate, RateMethod, RateObservable, SdeConfig, TrajectoryRecord,
};
use snls_core::observables::Observable;
use snls_core::spectral::eigen::{compute_spectrum_with, EigenOptions, SpectralReport};
use snls_core::spectral::operator::DiscreteOperator;
use snls_core::spectral::potential::PotentialDescriptor;
use snls_core::spectral::semigroup::{evolve, fit_rate};
use snls_core::stats;
use snls_core::{DomainKind, Hamiltonian64, ModelParams};

use crate::config::{ExperimentConfig, RegionChoice, SpectrumOptions};
use crate::discretise::Discretisation;
use crate::output::{Assertion, OutputDir};

/// Region a certificate is computed on.
pub fn region_for(model: &ModelParams, choice: RegionChoice) -> Region {
    match (choice, model.domain) {
        (RegionChoice::Domain, DomainKind::HamiltonianBall) => Region::HamiltonianBall { ball: model.ball },
        (RegionChoice::Domain, DomainKind::L2Ball) => Region::L2Ball { radius_sq: model.ball },
        _ => Region::convexity_set(model.ball),
    }
}

/// Stationary moments from post-burn-in records, batch means per
/// trajectory merged across trajectories.
pub fn langevin_moments(
    records: &[TrajectoryRecord<f64>],
    observables: &[Observable],
    batches: usize,
) -> Result<Vec<MomentReport>> {
    observables
        .iter()
        .map(|o| {
            let parts = records
                .iter()
                .map(|r| Ok(stats::batch_means(&r.series(o)?[r.stationary_start()..], batches)))
                .collect::<Result<Vec<_>>>()?;
            Ok(MomentReport::from_batch(o.to_string(), stats::combine(&parts)))
        })
        .collect()
}

/// Zero-mode autocorrelation rate of an ensemble started at the origin.
pub fn langevin_rate(model: &ModelParams, sde: &SdeConfig, trajectories: usize) -> Result<(RateEstimate, Vec<TrajectoryRecord<f64>>)> {
    let ham = Hamiltonian64::new(model)?;
    let zero = ham.lattice().zero_mode();
    let mut sde = sde.clone();
    if !sde.tracked_modes.contains(&zero) {
        sde.tracked_modes.push(zero);
    }
    let records = run_ensemble(&ham, &ham.zero_state(), &sde, trajectories)?;
    let rate = estimate_rate(&records, &RateObservable::Mode(zero), RateMethod::AutocorrelationFit)?;
    Ok((rate, records))
}

pub fn simulate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<Assertion>> {
    let ham = Hamiltonian64::new(&cfg.model)?;
    let (rate, records) = langevin_rate(&cfg.model, &cfg.simulate.sde, cfg.simulate.trajectories)?;
    for (i, r) in records.iter().enumerate() {
        let mut buf = Vec::new();
        r.write_jsonl(&mut buf)?;
        out.write(&format!("trajectory_{i:03}.jsonl"), &buf)?;
    }
    let moments = langevin_moments(&records, &Observable::standard_set(ham.len()), 20)?;
    let mut buf = Vec::new();
    write_moments_csv(&moments, &mut buf)?;
    out.write("moments.csv", &buf)?;
    out.write_json("rate.json", &rate)?;
    let steps = cfg.simulate.sde.steps() * records.len();
    let rejected: usize = records.iter().map(|r| r.rejections).sum();
    Ok(vec![
        Assertion::holds("rate_usable", rate.usable)
            .with_detail(format!("rate {:.6} in [{:.6}, {:.6}]", rate.rate, rate.ci_low, rate.ci_high)),
        Assertion::at_most("rejected_fraction", rejected as f64 / steps.max(1) as f64, 0.05),
    ])
}

pub fn sample(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<Assertion>> {
    let ham = Hamiltonian64::new(&cfg.model)?;
    let (moments, acceptance) =
        sample_expectations_with_acceptance(&ham, &cfg.sample, &Observable::standard_set(ham.len()))?;
    let mut buf = Vec::new();
    write_moments_csv(&moments, &mut buf)?;
    out.write("moments.csv", &buf)?;
    out.write_json("sample.json", &json!({ "acceptance": acceptance, "moments": moments }))?;
    let worst_ess = moments.iter().map(|m| m.ess).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Assertion::at_least("acceptance", acceptance, 0.2),
        Assertion::at_most("acceptance_upper", acceptance, 0.6),
        Assertion::at_least("min_ess", worst_ess, 100.0),
    ])
}

/// Spectrum of the configured operator, with the derived checks.
pub struct SpectrumRun {
    pub disc: Discretisation,
    pub op: DiscreteOperator,
    pub report: SpectralReport,
    pub ground_residual: Option<f64>,
    pub semigroup: Option<RateEstimate>,
    pub semigroup_retried: bool,
}

pub fn spectrum_run(model: &ModelParams, opts: &SpectrumOptions, seed: u64) -> Result<SpectrumRun> {
    let disc = Discretisation::new(model, opts)?;
    let op = disc.operator(opts.tag)?;
    let mut eo = EigenOptions::new(opts.count, model.friction);
    eo.seed = seed;
    let report = compute_spectrum_with(&op, &eo)?;
    let ground_residual = op.ground_state.as_ref().map(|g| {
        let r = op.apply(g);
        let n = |v: &[faer::c64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        n(&r) / n(g)
    });
    let (mut semigroup, mut retried) = (None, false);
    if opts.semigroup && op.ground_state.is_some() {
        let pot = PotentialDescriptor::from_model(model)?;
        let u0 = disc.sample(&move |x| (-pot.value(x)).exp() * (1.0 + 0.5 * x[0] + 0.3 * x[1]))?;
        let run = evolve(&op, &u0, opts.semigroup_dt, opts.semigroup_t_end, 5)?;
        retried = run.retried;
        semigroup = Some(fit_rate(&run, 1e-2, 1e-8));
    }
    Ok(SpectrumRun {
        disc,
        op,
        report,
        ground_residual,
        semigroup,
        semigroup_retried: retried,
    })
}

pub fn spectrum(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<Assertion>> {
    let s = &cfg.spectrum;
    let run = spectrum_run(&cfg.model, s, cfg.seed.unwrap_or(0x5eed))?;
    let r = &run.report;
    out.write_json(
        "spectrum.json",
        &json!({
            "spectrum": r.to_json(),
            "discretisation": run.disc.name(),
            "ground_state_residual": run.ground_residual,
            "semigroup": run.semigroup,
            "semigroup_retried": run.semigroup_retried,
        }),
    )?;
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    out.write("spectrum.csv", &buf)?;
    if s.dump_operator {
        let mut buf = Vec::new();
        run.op.write_coo(&mut buf)?;
        out.write("operator.coo", &buf)?;
    }
    let mut checks = vec![
        Assertion::at_most("eigen_residual", r.max_residual(), 1e-8),
        Assertion::at_least("sector_margin", r.sector_margin, -s.sector_tol),
    ];
    if run.op.ground_state.is_some() {
        checks.push(Assertion::holds("kernel_simple", r.simple).with_detail(format!("{} near zero", r.near_zero)));
        checks.push(Assertion::at_least("ground_overlap", r.ground_overlap.unwrap_or(0.0), 1.0 - 1e-6));
    }
    if let Some(sg) = &run.semigroup {
        checks.push(
            Assertion::at_most("semigroup_rate_vs_gap", (sg.rate - r.gap).abs() / r.gap, 0.10)
                .with_detail(format!("rate {:.6}, gap {:.6}", sg.rate, r.gap)),
        );
    }
    Ok(checks)
}

pub fn convexity(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<Assertion>> {
    let region = region_for(&cfg.model, cfg.convexity.region);
    let cert = convexity_certificate::<f64>(&cfg.model, region, cfg.convexity.samples, cfg.convexity.seed)?;
    out.write_json("convexity.json", &cert)?;
    Ok(vec![
        Assertion::holds("certificate_pass", cert.pass),
        Assertion::at_least("c_min", cert.c_min, 0.0),
    ])
}
