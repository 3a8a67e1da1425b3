use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use snls_experiments::config::{ExperimentConfig, RunKind, SeedSource};
use snls_experiments::output::{sha256_hex, FileDigest};

/// Langevin, Metropolis and Fokker–Planck experiments on the truncated
/// stochastic NLS model.
///
/// Exit status: 0 when every assertion passes, 1 when a run fails or an
/// assertion does not hold, 2 when the configuration is rejected (nothing is
/// written in that case).
#[derive(Parser)]
#[command(name = "snls-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.cutoff=4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every random stream; takes precedence over SEED and the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Langevin trajectories, moments and relaxation rate.
    Simulate,
    /// Metropolis moments of the Gibbs measure.
    Sample,
    /// Low spectrum of a Fokker–Planck or Witten–Hodge operator.
    Spectrum,
    /// Sampled Hessian convexity certificate.
    Convexity,
    /// Convexity floor and Langevin rate across mode cutoffs.
    GapScan,
    /// Every invariant on the default cases.
    CheckAll,
    /// Stationarity of the Gibbs density under the implemented SDE.
    Audit,
}

impl Command {
    fn kind(self) -> RunKind {
        match self {
            Command::Simulate => RunKind::Simulate,
            Command::Sample => RunKind::Sample,
            Command::Spectrum => RunKind::Spectrum,
            Command::Convexity => RunKind::Convexity,
            Command::GapScan => RunKind::GapScan,
            Command::CheckAll => RunKind::CheckAll,
            Command::Audit => RunKind::Audit,
        }
    }
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, SeedSource, Vec<FileDigest>)> {
    let mut inputs = Vec::new();
    let text = match &cli.config {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            inputs.push(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len(),
            });
            Some(String::from_utf8(bytes).context("config is not UTF-8")?)
        }
        None => None,
    };
    let mut overrides = vec![format!("kind=\"{}\"", cli.command.kind().as_str())];
    if let Some(d) = &cli.output_dir {
        overrides.push(format!("output_dir={}", toml::Value::String(d.display().to_string())));
    }
    overrides.extend(cli.overrides.iter().cloned());
    let env = std::env::var("SEED").ok();
    let (cfg, source) = ExperimentConfig::assemble(text.as_deref(), &overrides, cli.seed, env.as_deref())?;
    Ok((cfg, source, inputs))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, source, inputs) = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match snls_experiments::run(&cfg, source, inputs, |line| println!("{line}")) {
        Ok(o) => {
            println!("manifest: {}", o.manifest_path.display());
            if o.pass() {
                ExitCode::SUCCESS
            } else {
                eprintln!("one or more assertions failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("run failed: {e:#}");
            ExitCode::from(1)
        }
    }
}
