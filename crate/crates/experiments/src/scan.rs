//! Convexity floor and Langevin relaxation rate across mode cutoffs.

use anyhow::Result;
use serde::Serialize;
use snls_core::convexity::convexity_certificate;
use snls_core::io::fmt_f64;
use snls_core::langevin::SdeConfig;
use snls_core::stats::relative_spread;
use snls_core::{Hamiltonian64, ModelParams};

use crate::config::GapScanOptions;
use crate::output::Assertion;
use crate::runs::{langevin_rate, region_for};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub cutoff: usize,
    pub modes: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub certificate_pass: bool,
    pub dt: f64,
    pub t_max: f64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rate_usable: bool,
    pub mean_phi: f64,
    pub usable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub cmin_spread: f64,
    pub rate_spread: f64,
    pub complete: bool,
}

/// Step size keeping the expected noise increment of `φ` per step at
/// `budget · B`: each complex mode gains `ν dt` in `|a_n|²`.
pub fn scan_step(model: &ModelParams, ham: &Hamiltonian64, opts: &GapScanOptions) -> f64 {
    let weight: f64 = (0..ham.len()).map(|k| (ham.lattice().norm_sq(k) + 1) as f64).sum();
    let dt = opts.noise_budget * model.ball / (model.friction.max(f64::MIN_POSITIVE) * weight);
    dt.min(opts.dt_max)
}

pub fn gap_scan(model: &ModelParams, opts: &GapScanOptions) -> Result<ScanTable> {
    let mut rows = Vec::with_capacity(opts.cutoffs.len());
    for &n in &opts.cutoffs {
        let p = ModelParams {
            cutoff: n,
            ..model.clone()
        };
        let ham = Hamiltonian64::new(&p)?;
        let cert = convexity_certificate::<f64>(&p, region_for(&p, opts.region), opts.samples, opts.seed)?;
        let dt = scan_step(&p, &ham, opts);
        let t_max = opts.t_max.min(opts.max_steps as f64 * dt);
        let stride = ((0.01 / dt).round() as usize).max(1);
        let sde = SdeConfig {
            dt,
            t_max,
            record_stride: stride,
            burn_in: opts.burn_in.min(0.5 * t_max),
            rng_seed: opts.seed,
            ..SdeConfig::default()
        };
        let (rate, records) = langevin_rate(&p, &sde, opts.trajectories)?;
        let phis: Vec<f64> = records.iter().flat_map(|r| r.phi[r.stationary_start()..].to_vec()).collect();
        let mean_phi = phis.iter().sum::<f64>() / phis.len().max(1) as f64;
        rows.push(ScanRow {
            cutoff: n,
            modes: ham.len(),
            c_min: cert.c_min,
            c_max: cert.c_max,
            certificate_pass: cert.pass,
            dt,
            t_max,
            rate: rate.rate,
            ci_low: rate.ci_low,
            ci_high: rate.ci_high,
            rate_usable: rate.usable,
            mean_phi,
            usable: cert.pass && rate.usable,
        });
    }
    let cmins: Vec<f64> = rows.iter().map(|r| r.c_min).collect();
    let rates: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    Ok(ScanTable {
        cmin_spread: relative_spread(&cmins),
        rate_spread: relative_spread(&rates),
        complete: rows.iter().all(|r| r.usable),
        rows,
    })
}

impl ScanTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cutoff", "modes", "c_min", "c_max", "certificate_pass", "dt", "t_max", "rate", "ci_low", "ci_high",
            "rate_usable", "mean_phi", "usable",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.cutoff.to_string(),
                r.modes.to_string(),
                fmt_f64(r.c_min),
                fmt_f64(r.c_max),
                r.certificate_pass.to_string(),
                fmt_f64(r.dt),
                fmt_f64(r.t_max),
                fmt_f64(r.rate),
                fmt_f64(r.ci_low),
                fmt_f64(r.ci_high),
                r.rate_usable.to_string(),
                fmt_f64(r.mean_phi),
                r.usable.to_string(),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
    }

    pub fn assertions(&self, opts: &GapScanOptions) -> Vec<Assertion> {
        vec![
            Assertion::holds("scan_complete", self.complete),
            Assertion::at_most("cmin_spread", self.cmin_spread, opts.cmin_spread),
            Assertion::at_most("rate_spread", self.rate_spread, opts.rate_spread).with_detail(
                self.rows
                    .iter()
                    .map(|r| format!("N={}: {:.3}", r.cutoff, r.rate))
                    .collect::<Vec<_>>()
                    .join(", "),
            ),
        ]
    }
}
