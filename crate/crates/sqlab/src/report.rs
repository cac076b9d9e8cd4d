//! Experiment reports: per-trial records, aggregates, and JSON/CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

pub const SCHEMA_VERSION: u32 = 1;

/// Below this many trials an interval is flagged as low power.
pub const LOW_POWER_TRIALS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trial {
    pub index: u64,
    pub seed: u64,
    pub success: bool,
    #[serde(default)]
    pub queries: u64,
    #[serde(default)]
    pub samples: u64,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregates {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub low_power: bool,
    pub mean_queries: f64,
    pub max_queries: u64,
    pub mean_samples: f64,
    pub max_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment_id: String,
    pub command: String,
    /// Arguments that reproduce the run, resolved mode included.
    pub argv: Vec<String>,
    pub config: Value,
    pub parameters: BTreeMap<String, String>,
    pub trials: Vec<Trial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregates: Option<Aggregates>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub formula_values: Value,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(command: &str, argv: Vec<String>, config: Value, seed: u64) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            experiment_id: format!("{command}-{seed:016x}"),
            command: command.to_string(),
            argv,
            config,
            parameters: BTreeMap::new(),
            trials: Vec::new(),
            aggregates: None,
            formula_values: Value::Null,
            pass: true,
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    /// Sets the trials and their aggregates.
    pub fn set_trials(&mut self, trials: Vec<Trial>) -> Result<()> {
        self.aggregates = Some(aggregate(&trials)?);
        self.trials = trials;
        Ok(())
    }
}

/// Two-sided Wilson score interval at confidence `1 − alpha`.
pub fn wilson_interval(successes: usize, trials: usize, alpha: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        bail!("Wilson interval needs at least one trial");
    }
    let z = Normal::new(0.0, 1.0)?.inverse_cdf(1.0 - alpha / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Ok((low, high))
}

pub fn aggregate(trials: &[Trial]) -> Result<Aggregates> {
    if trials.is_empty() {
        bail!("cannot aggregate an empty trial list");
    }
    let n = trials.len();
    let successes = trials.iter().filter(|t| t.success).count();
    let (wilson_low, wilson_high) = wilson_interval(successes, n, 0.05)?;
    Ok(Aggregates {
        trials: n,
        successes,
        success_rate: successes as f64 / n as f64,
        wilson_low,
        wilson_high,
        low_power: n < LOW_POWER_TRIALS,
        mean_queries: trials.iter().map(|t| t.queries as f64).sum::<f64>() / n as f64,
        max_queries: trials.iter().map(|t| t.queries).max().unwrap_or(0),
        mean_samples: trials.iter().map(|t| t.samples as f64).sum::<f64>() / n as f64,
        max_samples: trials.iter().map(|t| t.samples).max().unwrap_or(0),
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// The CSV mirror of a JSON report path: same stem, `.csv` extension.
pub fn csv_path(json: &Path) -> PathBuf {
    json.with_extension("csv")
}

pub fn trials_csv(trials: &[Trial]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "seed", "success", "queries", "samples", "detail"])?;
    for t in trials {
        let detail = if t.detail.is_null() { String::new() } else { t.detail.to_string() };
        w.write_record([
            t.index.to_string(),
            t.seed.to_string(),
            t.success.to_string(),
            t.queries.to_string(),
            t.samples.to_string(),
            detail,
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Writes the JSON report and its CSV mirror. `table` replaces the per-trial
/// CSV when the run produces a table of its own.
pub fn write_report(report: &ExperimentReport, path: &Path, table: Option<Vec<u8>>) -> Result<()> {
    let json = serde_json::to_vec_pretty(report)?;
    write_atomic(path, &json)?;
    let csv = match table {
        Some(t) => t,
        None => trials_csv(&report.trials)?,
    };
    write_atomic(&csv_path(path), &csv)
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: ExperimentReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if report.schema_version != SCHEMA_VERSION {
        bail!("unsupported schemaVersion {} (expected {SCHEMA_VERSION})", report.schema_version);
    }
    Ok(report)
}
