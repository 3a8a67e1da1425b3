//! Output directory bookkeeping, assertions and the run manifest.

use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use snls_core::io::to_json_string;

use crate::config::{ExperimentConfig, SeedSource};

pub const MANIFEST_SCHEMA: &str = "snls.manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One checked property of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    /// `value <relation> bound` is the pass condition.
    pub relation: String,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(name, value, "<=", bound, value <= bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(name, value, ">=", bound, value >= bound)
    }

    /// Boolean property; `value` is 1 or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::make(name, if ok { 1.0 } else { 0.0 }, "==", 1.0, ok)
    }

    fn make(name: impl Into<String>, value: f64, relation: &str, bound: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            relation: relation.into(),
            bound,
            pass,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// A single line: `PASS name: value <= bound (detail)`.
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{tag} {}: {:.6e} {} {:.6e}", self.name, self.value, self.relation, self.bound);
        if !self.detail.is_empty() {
            s.push_str(&format!(" ({})", self.detail));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Files written by one run. Names are relative and may not leave the
/// directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let rel = Path::new(name);
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) || name == MANIFEST_NAME {
            bail!("output name '{name}' must be a plain relative path other than {MANIFEST_NAME}");
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut s = to_json_string(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn files(&self) -> &[FileDigest] {
        &self.files
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub kind: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub seed_source: SeedSource,
    pub inputs: Vec<FileDigest>,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<FileDigest>,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
}

impl RunManifest {
    pub fn new(
        cfg: &ExperimentConfig,
        seed_source: SeedSource,
        inputs: Vec<FileDigest>,
        started_at: String,
        outputs: &OutputDir,
        assertions: Vec<Assertion>,
    ) -> Result<Self> {
        let config = serde_json::to_value(cfg)?;
        let config_sha256 = sha256_hex(to_json_string(&config)?.as_bytes());
        let pass = assertions.iter().all(|a| a.pass);
        let mut files = outputs.files().to_vec();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            schema: MANIFEST_SCHEMA.into(),
            kind: cfg.kind.as_str().into(),
            config,
            config_sha256,
            seed_source,
            inputs,
            code_version: env!("CARGO_PKG_VERSION").into(),
            started_at,
            finished_at: now(),
            outputs: files,
            assertions,
            pass,
        })
    }

    /// Written after every other file.
    pub fn write(&self, out: &OutputDir) -> Result<PathBuf> {
        let path = out.root().join(MANIFEST_NAME);
        let mut s = to_json_string(self)?;
        s.push('\n');
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Checks that every output listed in a manifest still has its digest.
pub fn verify_manifest(dir: &Path) -> Result<bool> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let outputs = v["outputs"].as_array().cloned().unwrap_or_default();
    for o in outputs {
        let path = o["path"].as_str().unwrap_or_default();
        let want = o["sha256"].as_str().unwrap_or_default();
        let bytes = fs::read(dir.join(path))?;
        if sha256_hex(&bytes) != want {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_must_stay_inside() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        assert!(out.write("../x.txt", b"x").is_err());
        assert!(out.write("/tmp/x.txt", b"x").is_err());
        assert!(out.write(MANIFEST_NAME, b"x").is_err());
        out.write("a/b.txt", b"abc").unwrap();
        assert_eq!(
            out.files()[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn assertion_lines() {
        assert!(Assertion::at_most("x", 1.0, 2.0).pass);
        assert!(!Assertion::at_least("x", 1.0, 2.0).pass);
        assert!(Assertion::holds("y", true).line().starts_with("PASS y"));
    }
}
