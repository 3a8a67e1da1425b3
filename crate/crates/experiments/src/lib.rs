//! Experiment driver: configuration, runs, output manifests and the
//! `check-all` suite.

pub mod audit;
pub mod config;
pub mod discretise;
pub mod output;
pub mod runs;
pub mod scan;
pub mod suite;

use anyhow::Result;

use config::{ExperimentConfig, RunKind, SeedSource};
use output::{now, Assertion, FileDigest, OutputDir, RunManifest};

/// Outcome of a completed run; the manifest has been written.
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: std::path::PathBuf,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.manifest.pass
    }
}

/// Runs `cfg`, writes its outputs and then the manifest.
pub fn run(
    cfg: &ExperimentConfig,
    seed_source: SeedSource,
    inputs: Vec<FileDigest>,
    mut log: impl FnMut(&str),
) -> Result<RunOutcome> {
    let started_at = now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let seed = cfg.seed.unwrap_or(0);
    let assertions: Vec<Assertion> = match cfg.kind {
        RunKind::Simulate => runs::simulate(cfg, &mut out)?,
        RunKind::Sample => runs::sample(cfg, &mut out)?,
        RunKind::Spectrum => runs::spectrum(cfg, &mut out)?,
        RunKind::Convexity => runs::convexity(cfg, &mut out)?,
        RunKind::GapScan => {
            let table = scan::gap_scan(&cfg.model, &cfg.gap_scan)?;
            out.write("gap_scan.csv", &table.to_csv()?)?;
            out.write_json("gap_scan.json", &table)?;
            table.assertions(&cfg.gap_scan)
        }
        RunKind::Audit => {
            let report = audit::convention_audit()?;
            out.write_json("audit.json", &report)?;
            report.assertions()
        }
        RunKind::CheckAll => {
            let sections = suite::check_all(&cfg.check_all, seed, |s| {
                log(&format!("[{}]", s.name));
                for a in &s.assertions {
                    log(&format!("  {}", a.line()));
                }
            })?;
            out.write_json("check_all.json", &sections)?;
            sections.into_iter().flat_map(|s| s.assertions).collect()
        }
    };
    if cfg.kind != RunKind::CheckAll {
        for a in &assertions {
            log(&a.line());
        }
    }
    let manifest = RunManifest::new(cfg, seed_source, inputs, started_at, &out, assertions)?;
    let manifest_path = manifest.write(&out)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
    })
}
