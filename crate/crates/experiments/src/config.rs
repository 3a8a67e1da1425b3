//! Experiment configuration: one TOML document, overridable from the
//! command line.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use snls_core::gibbs::McmcConfig;
use snls_core::langevin::SdeConfig;
use snls_core::spectral::grid::GridBoundary;
use snls_core::spectral::operator::OperatorTag;
use snls_core::{DomainKind, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Simulate,
    Sample,
    Spectrum,
    Convexity,
    GapScan,
    CheckAll,
    Audit,
}

impl RunKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RunKind::Simulate => "simulate",
            RunKind::Sample => "sample",
            RunKind::Spectrum => "spectrum",
            RunKind::Convexity => "convexity",
            RunKind::GapScan => "gap-scan",
            RunKind::CheckAll => "check-all",
            RunKind::Audit => "audit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub trajectories: usize,
    pub sde: SdeConfig,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            trajectories: 4,
            sde: SdeConfig {
                dt: 2.5e-4,
                t_max: 200.0,
                record_stride: 40,
                burn_in: 5.0,
                ..SdeConfig::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    /// Hermite–Galerkin on the whole space, polar cells for radial potentials
    /// on a disk, the masked grid otherwise.
    Auto,
    Galerkin,
    Polar,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    pub basis: BasisChoice,
    pub tag: OperatorTag,
    /// Hermite level per coordinate.
    pub level: usize,
    /// Grid or radial cells per domain radius.
    pub cells: usize,
    pub m_max: usize,
    /// Disk radius for polar or grid runs on the whole space.
    pub whole_radius: f64,
    pub boundary: GridBoundary,
    pub count: usize,
    /// Allowed violation of the sector inequality.
    pub sector_tol: f64,
    pub dump_operator: bool,
    /// Also time-step a density and compare its decay with the gap.
    pub semigroup: bool,
    pub semigroup_dt: f64,
    pub semigroup_t_end: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            basis: BasisChoice::Auto,
            tag: OperatorTag::L,
            level: 30,
            cells: 200,
            m_max: 4,
            whole_radius: 6.0,
            boundary: GridBoundary::Neumann,
            count: 10,
            sector_tol: 1e-6,
            dump_operator: false,
            semigroup: false,
            semigroup_dt: 0.01,
            semigroup_t_end: 15.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionChoice {
    /// The dynamics' own domain (Hamiltonian or L² ball).
    Domain,
    /// `{Σ(|n|²+1)|a_n|² < 5B}`.
    ConvexitySet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexityOptions {
    pub samples: usize,
    pub region: RegionChoice,
    pub seed: u64,
}

impl Default for ConvexityOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            region: RegionChoice::Domain,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapScanOptions {
    pub cutoffs: Vec<usize>,
    pub samples: usize,
    pub region: RegionChoice,
    pub trajectories: usize,
    pub t_max: f64,
    /// Cap on Euler–Maruyama steps per trajectory.
    pub max_steps: usize,
    pub dt_max: f64,
    /// Expected noise increment of `φ` per step, in units of `B`.
    pub noise_budget: f64,
    pub burn_in: f64,
    pub rate_spread: f64,
    pub cmin_spread: f64,
    pub seed: u64,
}

impl Default for GapScanOptions {
    fn default() -> Self {
        Self {
            cutoffs: vec![2, 4, 8, 16, 32],
            samples: 200,
            region: RegionChoice::Domain,
            trajectories: 2,
            t_max: 200.0,
            max_steps: 1_000_000,
            dt_max: 2e-3,
            noise_budget: 0.2,
            burn_in: 2.0,
            rate_spread: 0.15,
            cmin_spread: 0.10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckAllOptions {
    /// Langevin time per trajectory for the cross-route rate.
    pub langevin_t_max: f64,
    /// Metropolis steps per chain for the equilibrium comparison.
    pub mcmc_steps: usize,
    /// Langevin time per trajectory for the equilibrium comparison.
    pub moment_t_max: f64,
    /// Include the N-scan (slow).
    pub gap_scan: bool,
}

impl Default for CheckAllOptions {
    fn default() -> Self {
        Self {
            langevin_t_max: 2000.0,
            mcmc_steps: 200_000,
            moment_t_max: 1000.0,
            gap_scan: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: RunKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub sample: McmcConfig,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub convexity: ConvexityOptions,
    #[serde(default)]
    pub gap_scan: GapScanOptions,
    #[serde(default)]
    pub check_all: CheckAllOptions,
}

/// Parses `value` as a TOML value, or as a bare string if that fails.
fn parse_value(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies `a.b.c=value` to a TOML table, creating sections as needed.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override '{assignment}' is not of the form key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override '{assignment}' has an empty key");
    }
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override '{assignment}': '{k}' is not a section"))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Where the effective seed came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Env,
    File,
    Default,
}

impl ExperimentConfig {
    /// Builds a config from an optional document, `--set` overrides and the
    /// seed sources, then validates it.
    pub fn assemble(
        text: Option<&str>,
        overrides: &[String],
        flag_seed: Option<u64>,
        env_seed: Option<&str>,
    ) -> Result<(Self, SeedSource)> {
        let mut doc: toml::Table = match text {
            Some(t) => t.parse().context("config is not valid TOML")?,
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: ExperimentConfig = doc.try_into().context("config does not match the schema")?;
        let env = match env_seed {
            Some(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| anyhow!("SEED='{s}' is not an unsigned integer"))?,
            ),
            None => None,
        };
        let source = if flag_seed.is_some() {
            SeedSource::Flag
        } else if env.is_some() {
            SeedSource::Env
        } else if cfg.seed.is_some() {
            SeedSource::File
        } else {
            SeedSource::Default
        };
        if let Some(s) = flag_seed.or(env) {
            cfg.seed = Some(s);
        }
        cfg.apply_seed();
        cfg.validate()?;
        Ok((cfg, source))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::assemble(Some(&text), &[], None, None)?.0)
    }

    /// Propagates the top-level seed into every section that draws random
    /// numbers.
    fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.simulate.sde.rng_seed = s;
            self.sample.rng_seed = s;
            self.convexity.seed = s;
            self.gap_scan.seed = s;
        }
    }

    /// Rejects inconsistent settings before anything runs.
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| anyhow!("model: {e}"))?;
        if self.output_dir.as_os_str().is_empty() {
            bail!("output_dir must not be empty");
        }
        match self.kind {
            RunKind::Simulate => {
                self.simulate.sde.validate().map_err(|e| anyhow!("simulate.sde: {e}"))?;
                if self.simulate.trajectories == 0 {
                    bail!("simulate.trajectories must be >= 1");
                }
                self.check_domain()?;
            }
            RunKind::Sample => {
                self.sample.validate().map_err(|e| anyhow!("sample: {e}"))?;
                self.check_domain()?;
            }
            RunKind::Spectrum => {
                let s = &self.spectrum;
                if s.count == 0 || s.cells < 4 || s.level < 2 {
                    bail!("spectrum needs count >= 1, cells >= 4 and level >= 2");
                }
                if !(s.whole_radius > 0.0) || !(s.sector_tol >= 0.0) {
                    bail!("spectrum.whole_radius must be > 0 and sector_tol >= 0");
                }
                if s.semigroup && !(s.semigroup_dt > 0.0 && s.semigroup_t_end > 2.0 * s.semigroup_dt) {
                    bail!("spectrum.semigroup_dt must be > 0 and semigroup_t_end > 2 semigroup_dt");
                }
            }
            RunKind::Convexity => {
                if self.convexity.samples == 0 {
                    bail!("convexity.samples must be >= 1");
                }
            }
            RunKind::GapScan => {
                let g = &self.gap_scan;
                if g.cutoffs.is_empty() || g.trajectories == 0 || g.samples == 0 {
                    bail!("gap_scan needs cutoffs, trajectories >= 1 and samples >= 1");
                }
                if self.model.dim != 1 {
                    bail!("gap_scan runs in dimension d = 1 only");
                }
                if !(g.noise_budget > 0.0 && g.dt_max > 0.0 && g.t_max > g.burn_in && g.burn_in >= 0.0) {
                    bail!("gap_scan needs noise_budget > 0, dt_max > 0 and t_max > burn_in >= 0");
                }
            }
            RunKind::CheckAll | RunKind::Audit => {}
        }
        Ok(())
    }

    /// Langevin and Metropolis runs need a normalisable measure.
    fn check_domain(&self) -> Result<()> {
        if self.model.domain == DomainKind::WholeSpace && self.model.coupling < 0.0 {
            bail!("model: focusing coupling (lambda < 0) needs a bounded domain, not whole_space");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "kind = \"spectrum\"\noutput_dir = \"out\"\n[model]\ncoupling = 0.0\ncutoff = 0\ndomain = \"whole_space\"\n";

    #[test]
    fn overrides_and_seed_precedence() {
        let (c, src) = ExperimentConfig::assemble(
            Some(BASE),
            &["model.friction=0.25".into(), "spectrum.basis=galerkin".into()],
            None,
            None,
        )
        .unwrap();
        assert_eq!(c.model.friction, 0.25);
        assert_eq!(c.spectrum.basis, BasisChoice::Galerkin);
        assert_eq!(src, SeedSource::Default);
        let text = format!("seed = 3\n{BASE}");
        let (c, src) = ExperimentConfig::assemble(Some(&text), &[], None, Some("5")).unwrap();
        assert_eq!((c.seed, src), (Some(5), SeedSource::Env));
        let (c, src) = ExperimentConfig::assemble(Some(&text), &[], Some(9), Some("5")).unwrap();
        assert_eq!((c.seed, src), (Some(9), SeedSource::Flag));
        assert_eq!(c.sample.rng_seed, 9);
        let (c, src) = ExperimentConfig::assemble(Some(&text), &[], None, None).unwrap();
        assert_eq!((c.seed, src), (Some(3), SeedSource::File));
    }

    #[test]
    fn unknown_keys_and_odd_exponent_are_rejected() {
        let bad = format!("{BASE}colour = 1\n");
        assert!(ExperimentConfig::assemble(Some(&bad), &[], None, None).is_err());
        let e = ExperimentConfig::assemble(Some(BASE), &["model.exponent=5".into()], None, None).unwrap_err();
        assert!(format!("{e:#}").contains("exponent p = 5"), "{e:#}");
        assert!(ExperimentConfig::assemble(Some(BASE), &[], None, Some("x")).is_err());
    }
}
