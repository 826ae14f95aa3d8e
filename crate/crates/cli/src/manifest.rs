//! Per-command run manifests. Wall-clock timings go to a separate sidecar
//! so that manifests stay byte-identical across reruns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL_NAME: &str = "hjd";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub backend: Option<String>,
    pub config: RunConfig,
    /// SHA-256 of every input file, keyed by path as configured.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed by name relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub command: String,
    pub stages: Vec<(String, f64)>,
    pub total_seconds: f64,
    /// Backend call and cache-hit counts; these depend on cache state, so
    /// they live here rather than in the manifest.
    pub runtime: BTreeMap<String, u64>,
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Accumulates what a command read and wrote.
#[derive(Debug, Default)]
pub struct Record {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub stages: Vec<(String, Duration)>,
    pub backend: Option<String>,
    pub runtime: BTreeMap<String, u64>,
}

impl Record {
    pub fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|q| q == p) {
            self.inputs.push(p.to_path_buf());
        }
    }

    pub fn output(&mut self, p: &Path) {
        if !self.outputs.iter().any(|q| q == p) {
            self.outputs.push(p.to_path_buf());
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).expect("summary value serializes"),
        );
    }

    pub fn absorb(&mut self, other: Record) {
        for p in other.inputs {
            self.input(&p);
        }
        for p in other.outputs {
            self.output(&p);
        }
        self.summary.extend(other.summary);
        self.stages.extend(other.stages);
        for (k, v) in other.runtime {
            *self.runtime.entry(k).or_default() += v;
        }
        if self.backend.is_none() {
            self.backend = other.backend;
        }
    }
}

/// Writes `manifest.<tag>.json` and `timings.<tag>.json` into `out_dir`.
pub fn write_manifest(
    cfg: &RunConfig,
    out_dir: &Path,
    tag: &str,
    record: &Record,
    total: Duration,
) -> Result<PathBuf, CliError> {
    let mut inputs = BTreeMap::new();
    for p in &record.inputs {
        inputs.insert(p.display().to_string(), file_digest(p)?);
    }
    let mut outputs = BTreeMap::new();
    for p in &record.outputs {
        let name = p.strip_prefix(out_dir).unwrap_or(p).display().to_string();
        outputs.insert(name, file_digest(p)?);
    }
    let manifest = RunManifest {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        command: tag.to_string(),
        seed: cfg.seed,
        backend: record.backend.clone(),
        config: cfg.clone(),
        inputs,
        outputs,
        summary: record.summary.clone(),
    };
    let path = out_dir.join(format!("manifest.{tag}.json"));
    write_text(
        &path,
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    let timings = Timings {
        command: tag.to_string(),
        stages: record
            .stages
            .iter()
            .map(|(s, d)| (s.clone(), d.as_secs_f64()))
            .collect(),
        total_seconds: total.as_secs_f64(),
        runtime: record.runtime.clone(),
    };
    let tpath = out_dir.join(format!("timings.{tag}.json"));
    write_text(
        &tpath,
        &(serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n"),
    )?;
    Ok(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
