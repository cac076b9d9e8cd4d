//! Statistical detection algorithms for the planted biclique, and a baseline
//! statistical solver for distributional MAX-XOR-SAT.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::bits::{Combinations, IndexSet, Point};
use crate::error::{invalid, precondition, Error, Result};
use crate::oracles::{OracleKind, OracleSession, Response};
use crate::query::Query;
use crate::scalar::{ratio_to_f64, Scalar};

/// Diagnostics are retained only up to this dimension.
pub const DIAGNOSTIC_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionResult {
    pub recovered: IndexSet,
    pub success: bool,
    pub queries_used: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub responses_by_coordinate: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted_subsets: Option<Vec<Vec<usize>>>,
}

/// `⌈16n²/k²⌉`, the VSTAT parameter at which the coordinate detector's
/// tolerance is at most `k/(4n)`.
pub fn coordinate_detector_t(n: u64, k: u64) -> u64 {
    (16 * n * n).div_ceil(k * k)
}

/// `⌈25n/k⌉`.
pub fn subset_detector_t(n: u64, k: u64) -> u64 {
    (25 * n).div_ceil(k)
}

/// `⌈log₂ n⌉`.
pub fn default_subset_size(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

fn require_vstat(session: &OracleSession) -> Result<()> {
    if session.spec().kind() != OracleKind::Vstat {
        return Err(precondition(format!("detector requires a VSTAT session, got {}", session.spec().kind())));
    }
    Ok(())
}

fn estimate(r: Response) -> Scalar {
    match r {
        Response::Estimate(s) => s,
        Response::Sample(v) => Scalar::Float(v),
    }
}

fn cmp_scalar(a: &Scalar, b: &Scalar) -> Ordering {
    match (a, b) {
        (Scalar::Exact(x), Scalar::Exact(y)) => x.cmp(y),
        _ => a.to_f64().partial_cmp(&b.to_f64()).unwrap_or(Ordering::Equal),
    }
}

/// Queries every coordinate and returns the `k` with the largest responses,
/// ties going to the lower index.
pub fn detect_by_coordinate_bias(session: &mut OracleSession, n: usize, k: usize) -> Result<DetectionResult> {
    require_vstat(session)?;
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    if session.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: session.dim() });
    }
    let before = session.query_count();
    let mut responses = Vec::with_capacity(n);
    for i in 0..n {
        responses.push(estimate(session.ask(&Query::coordinate(i))?));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_scalar(&responses[b], &responses[a]).then(a.cmp(&b)));
    let recovered = IndexSet::new(n, order[..k].iter().copied())?;
    Ok(DetectionResult {
        success: recovered.len() == k,
        recovered,
        queries_used: session.query_count() - before,
        responses_by_coordinate: (n <= DIAGNOSTIC_DIM).then(|| responses.iter().map(Scalar::to_f64).collect()),
        accepted_subsets: None,
    })
}

/// Queries the conjunction `g_T` for every size-`s` subset `T` and returns the
/// union of those whose response exceeds `3k/(4n)`.
pub fn detect_by_subset_enumeration(session: &mut OracleSession, n: usize, k: usize, s: usize) -> Result<DetectionResult> {
    require_vstat(session)?;
    if s == 0 {
        return Err(precondition("subset size must be at least 1"));
    }
    if k < s {
        return Err(precondition(format!("k = {k} must be at least the subset size s = {s}")));
    }
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    if session.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: session.dim() });
    }
    let threshold = BigRational::new(BigInt::from(3 * k), BigInt::from(4 * n));
    let threshold_f = ratio_to_f64(&threshold);
    let before = session.query_count();
    let mut union = IndexSet::empty(n);
    let mut accepted = Vec::new();
    for subset in Combinations::new(n, s) {
        let t = IndexSet::from_sorted(n, &subset)?;
        let v = estimate(session.ask(&Query::conjunction(t.clone()))?);
        let above = match &v {
            Scalar::Exact(r) => r > &threshold,
            Scalar::Float(f) => *f > threshold_f,
        };
        if above {
            union = union.union(&t);
            if n <= DIAGNOSTIC_DIM {
                accepted.push(subset);
            }
        }
    }
    Ok(DetectionResult {
        success: !union.is_empty() && union.len() == k,
        recovered: union,
        queries_used: session.query_count() - before,
        responses_by_coordinate: None,
        accepted_subsets: (n <= DIAGNOSTIC_DIM).then_some(accepted),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MaxXorSatResult {
    pub assignment: Point,
    /// Oracle response for `χ_x` at the returned assignment.
    pub best_response: f64,
    pub queries_used: u64,
    pub budget_exhausted: bool,
}

/// Fraction of clauses satisfied by `x` when `E[χ_x] = e`: `(1 + e)/2`.
pub fn satisfied_fraction(e: f64) -> f64 {
    (1.0 + e) / 2.0
}

/// Baseline solver: a greedy pass over single-variable flips, then a random
/// walk of flips with hill-climbing acceptance, each candidate scored by one
/// query of `χ_x`. Stops when `budget` queries are spent or every assignment
/// has been scored.
pub fn solve_max_xor_sat(session: &mut OracleSession, n: usize, budget: u64, rng: &mut dyn RngCore) -> Result<MaxXorSatResult> {
    if session.spec().kind() == OracleKind::Vstat {
        return Err(precondition("parity queries are not boolean; use a STAT or SAMPLE session"));
    }
    if n == 0 || session.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: session.dim() });
    }
    let total = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut scores: BTreeMap<Point, f64> = BTreeMap::new();
    let mut used = 0u64;
    // χ_0 ≡ −1, known without a query
    let mut current = Point::zeros(n);
    let mut current_score = -1.0;
    let mut best = (current.clone(), current_score);

    let mut score = |x: &Point, session: &mut OracleSession, used: &mut u64| -> Result<Option<f64>> {
        if let Some(v) = scores.get(x) {
            return Ok(Some(*v));
        }
        if *used >= budget {
            return Ok(None);
        }
        *used += 1;
        let v = session.ask_value(&Query::parity(x.clone()))?;
        scores.insert(x.clone(), v);
        Ok(Some(v))
    };

    for i in 0..n {
        let mut cand = current.clone();
        cand.set(i, !cand.get(i));
        if cand.is_zero() {
            continue;
        }
        match score(&cand, session, &mut used)? {
            Some(v) if v > current_score => {
                current = cand;
                current_score = v;
            }
            Some(_) => {}
            None => break,
        }
    }
    if current_score > best.1 {
        best = (current.clone(), current_score);
    }

    let mut stale = 0u32;
    while used < budget && used < total && stale < 10_000 {
        let i = rng.gen_range(0..n);
        let mut cand = current.clone();
        cand.set(i, !cand.get(i));
        if cand.is_zero() {
            continue;
        }
        let known = used;
        let Some(v) = score(&cand, session, &mut used)? else { break };
        stale = if used == known { stale + 1 } else { 0 };
        if v > best.1 {
            best = (cand.clone(), v);
        }
        if v >= current_score || rng.gen_bool(0.2) {
            current = cand;
            current_score = v;
        }
    }
    Ok(MaxXorSatResult { assignment: best.0, best_response: best.1, queries_used: used, budget_exhausted: used >= budget })
}
