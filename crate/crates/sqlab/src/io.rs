//! File formats: instance JSON, 0/1 row files with metadata sidecars,
//! transcript JSON lines and the dimension table.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sqlab_core::bits::IndexSet;
use sqlab_core::dimension::DimensionEstimate;
use sqlab_core::distributions::PlantedDistribution;
use sqlab_core::oracles::TranscriptRecord;
use sqlab_core::reductions::BitMatrix;
use sqlab_core::scalar::{parse_rational, ratio_to_f64, rational_from_f64, Prob};

use crate::report::write_atomic;

/// Parses a probability given as `"3/4"`, `"0.75"` or `"1"`.
pub fn parse_prob(s: &str) -> Result<Prob> {
    let r = parse_rational(s).ok_or_else(|| anyhow!("not a number: {s:?}"))?;
    Prob::from_rational(r).map_err(|e| anyhow!("{e}"))
}

/// A JSON number when the rational survives the round trip through a double,
/// otherwise its `a/b` string.
pub fn rational_json(r: &BigRational) -> Value {
    let f = ratio_to_f64(r);
    if rational_from_f64(f).as_ref() == Some(r) {
        serde_json::Number::from_f64(f).map(Value::Number).unwrap_or_else(|| Value::String(r.to_string()))
    } else {
        Value::String(r.to_string())
    }
}

fn prob_from_json(v: &Value) -> Result<Prob> {
    match v {
        // the shortest decimal of the double, so "0.6" stays 3/5
        Value::Number(n) => parse_prob(&n.to_string()),
        Value::String(s) => parse_prob(s),
        other => bail!("expected a probability, got {other}"),
    }
}

/// `{n, k, plant, p, q, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub k: usize,
    pub plant: Vec<usize>,
    pub p: Value,
    pub q: Value,
    pub seed: u64,
}

impl InstanceFile {
    pub fn new(n: usize, plant: &IndexSet, p: &Prob, q: &Prob, seed: u64) -> Self {
        InstanceFile { n, k: plant.len(), plant: plant.to_vec(), p: rational_json(p.exact()), q: rational_json(q.exact()), seed }
    }

    pub fn plant_set(&self) -> Result<IndexSet> {
        let s = IndexSet::new(self.n, self.plant.iter().copied()).map_err(|e| anyhow!("{e}"))?;
        if s.len() != self.k {
            bail!("plant has {} distinct indices but k = {}", s.len(), self.k);
        }
        Ok(s)
    }

    pub fn distribution(&self) -> Result<PlantedDistribution> {
        PlantedDistribution::new(self.n, self.plant_set()?, prob_from_json(&self.p)?, prob_from_json(&self.q)?).map_err(|e| anyhow!("{e}"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let inst: InstanceFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        inst.distribution()?;
        Ok(inst)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}

/// `{n, k, plantRows, plantCols, seed}` beside a matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixMeta {
    pub n: usize,
    pub k: usize,
    pub plant_rows: Vec<usize>,
    pub plant_cols: Vec<usize>,
    pub seed: u64,
}

pub fn sidecar_path(matrix: &Path) -> PathBuf {
    let mut s = matrix.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_matrix(path: &Path, m: &BitMatrix, meta: Option<&MatrixMeta>) -> Result<()> {
    write_atomic(path, m.to_lines().as_bytes())?;
    if let Some(meta) = meta {
        write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(meta)?)?;
    }
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<BitMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    BitMatrix::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// The matrix and its sidecar, when one exists.
pub fn read_matrix_with_meta(path: &Path) -> Result<(BitMatrix, Option<MatrixMeta>)> {
    let m = read_matrix(path)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let text = fs::read_to_string(&side)?;
        Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", side.display()))?)
    } else {
        None
    };
    Ok((m, meta))
}

pub fn transcript_jsonl(records: &[TranscriptRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// One row of the dimension table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionRow {
    pub n: String,
    pub k: String,
    pub p: String,
    pub q: String,
    #[serde(rename = "δ")]
    pub delta: String,
    #[serde(rename = "ℓ")]
    pub ell: String,
    pub gamma_bar: String,
    pub d: String,
    pub eta: String,
    pub vstat_param: String,
    pub query_bound: String,
    pub sample_bound: String,
    pub flags: String,
}

impl DimensionRow {
    pub fn from_estimate(n: usize, k: usize, p: &Prob, q: &Prob, delta: &BigRational, ell: usize, e: &DimensionEstimate) -> Self {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        DimensionRow {
            n: n.to_string(),
            k: k.to_string(),
            p: p.to_string(),
            q: q.to_string(),
            delta: delta.to_string(),
            ell: ell.to_string(),
            gamma_bar: e.gamma_bar.to_f64().to_string(),
            d: e.d.to_f64().to_string(),
            eta: e.eta.to_f64().to_string(),
            vstat_param: e.vstat_param.as_ref().map(|v| v.to_f64().to_string()).unwrap_or_default(),
            query_bound: opt(e.query_bound),
            sample_bound: opt(e.sample_bound),
            flags: e.flags.join(";"),
        }
    }
}

pub fn dimension_csv(rows: &[DimensionRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["n", "k", "p", "q", "δ", "ℓ", "gammaBar", "d", "eta", "vstatParam", "queryBound", "sampleBound", "flags"])?;
    }
    Ok(w.into_inner()?)
}
