//! STAT(τ), VSTAT(t) and SAMPLE oracles over exact, honest and adversarial
//! backends.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngCore;
use rand::SeedableRng;
use serde::Serialize;

use crate::distributions::{PointDistribution, MAX_ENUM_DIM};
use crate::error::{invalid, Error, Result};
use crate::query::{Query, RealQuery};
use crate::rng::StdRng;
use crate::scalar::{big, clamp_rational, max_rational, ratio_to_f64, rational_from_f64, sqrt_lower, ArithmeticMode, Scalar};

/// Default constant `c` in the honest backend's `c·t·ln(1/δ)` sample count.
pub const DEFAULT_HONEST_CONSTANT: f64 = 9.0;

/// Binary precision of rational square-root lower bounds used for band edges.
const SQRT_BITS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OracleKind {
    Stat,
    Vstat,
    Sample,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Stat => "STAT",
            OracleKind::Vstat => "VSTAT",
            OracleKind::Sample => "SAMPLE",
        })
    }
}

/// Oracle kind with its parameter: `τ` for STAT, `t` for VSTAT.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Stat { tau: BigRational },
    Vstat { t: u64 },
    Sample,
}

impl OracleSpec {
    pub fn stat(tau: f64) -> Result<Self> {
        let tau = rational_from_f64(tau).ok_or_else(|| invalid("tolerance must be finite"))?;
        Self::stat_exact(tau)
    }

    pub fn stat_exact(tau: BigRational) -> Result<Self> {
        if tau <= BigRational::zero() {
            return Err(invalid(format!("STAT tolerance must be positive, got {tau}")));
        }
        Ok(OracleSpec::Stat { tau })
    }

    pub fn vstat(t: u64) -> Result<Self> {
        if t == 0 {
            return Err(invalid("VSTAT sample-size parameter must be positive"));
        }
        Ok(OracleSpec::Vstat { t })
    }

    pub fn kind(&self) -> OracleKind {
        match self {
            OracleSpec::Stat { .. } => OracleKind::Stat,
            OracleSpec::Vstat { .. } => OracleKind::Vstat,
            OracleSpec::Sample => OracleKind::Sample,
        }
    }
}

/// `max{1/t, √(p(1−p)/t)}`.
pub fn tolerance_of(t: u64, p: f64) -> f64 {
    let t = t as f64;
    (1.0 / t).max(libm::sqrt(p * (1.0 - p) / t))
}

/// The squared VSTAT tolerance `max{1/t², p(1−p)/t}`, exactly.
pub fn tolerance_sq_exact(t: u64, p: &BigRational) -> BigRational {
    let t = big(t);
    let floor = BigRational::one() / (&t * &t);
    let var = p * (BigRational::one() - p) / t;
    max_rational(&floor, &var)
}

/// A rational lower bound on the VSTAT tolerance, tight to 2^-64 relative.
pub fn tolerance_lower_exact(t: u64, p: &BigRational) -> BigRational {
    let floor = BigRational::new(BigInt::one(), BigInt::from(t));
    let var = p * (BigRational::one() - p) / big(t);
    max_rational(&floor, &sqrt_lower(&var, SQRT_BITS))
}

/// Whether `v` lies in the VSTAT(t) band around `p`, decided exactly.
pub fn vstat_accepts(t: u64, p: &BigRational, v: &BigRational) -> bool {
    let d = v - p;
    &d * &d <= tolerance_sq_exact(t, p)
}

/// Clamps into `[1/t, 1 − 1/t]`. For `t = 1` the interval is empty and every
/// value in `[0, 1]` is legal; the midpoint is returned.
pub fn clamp_vstat_exact(t: u64, v: &BigRational) -> BigRational {
    if t < 2 {
        return BigRational::new(BigInt::one(), BigInt::from(2));
    }
    let lo = BigRational::new(BigInt::one(), BigInt::from(t));
    let hi = BigRational::one() - &lo;
    clamp_rational(v, &lo, &hi)
}

pub fn clamp_vstat(t: u64, v: f64) -> f64 {
    if t < 2 {
        return 0.5;
    }
    let lo = 1.0 / t as f64;
    v.clamp(lo, 1.0 - lo)
}

/// Draw count `⌈c·t·ln(1/δ)⌉` (at least one) for estimating to VSTAT(t) accuracy.
pub fn honest_sample_count(t: u64, delta: f64, constant: f64) -> u64 {
    let n = libm::ceil(constant * t as f64 * libm::log(1.0 / delta));
    if n.is_finite() && n >= 1.0 {
        n as u64
    } else {
        1
    }
}

/// Draw count `⌈2·ln(2/δ)/τ²⌉` for a `[−1, 1]`-valued query to be within `τ`
/// with probability at least `1 − δ` (Hoeffding).
pub fn stat_sample_count(tau: f64, delta: f64) -> u64 {
    let n = libm::ceil(2.0 * libm::log(2.0 / delta) / (tau * tau));
    if n.is_finite() && n >= 1.0 {
        n as u64
    } else {
        1
    }
}

/// Average of `query` over `⌈c·t·ln(1/δ)⌉` fresh draws.
pub fn estimate_from_samples(
    dist: &dyn PointDistribution,
    query: &Query,
    t: u64,
    delta: f64,
    constant: f64,
    rng: &mut dyn RngCore,
) -> Result<Scalar> {
    if !query.is_boolean() {
        return Err(Error::NonBooleanQuery { kind: "VSTAT", digest: query.digest() });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("failure probability must lie in (0, 1), got {delta}")));
    }
    let draws = honest_sample_count(t, delta, constant);
    let sum = dist.sample_query_sum(query, draws, rng)?;
    Ok(Scalar::Exact(average(sum, draws)))
}

fn average(sum: f64, draws: u64) -> BigRational {
    let sum = BigRational::from_float(sum).unwrap_or_default();
    sum / big(draws)
}

/// Splits a `[−1, 1]`-valued query into `⌈log₂(1/τ)⌉ + 2` boolean queries, bit
/// `j` being the coefficient of `2^−j` in the binary expansion of `1 + h(x)`.
/// The value `1 + h = 2` saturates to the largest representable value.
pub fn decompose_real_query(query: &Query, tau: f64, n: usize) -> Result<Vec<Query>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tolerance must lie in (0, 1), got {tau}")));
    }
    query.check_dim(n)?;
    let bits = libm::ceil(libm::log2(1.0 / tau)) as usize + 2;
    let top = 2.0 - libm::ldexp(1.0, -(bits as i32 - 1));
    let base = query.digest();
    Ok((0..bits)
        .map(|j| {
            let inner = query.clone();
            Query::RealValued(RealQuery::boolean(format!("{base}#bit{j}"), n, move |x| {
                let y = (1.0 + inner.evaluate(x)).clamp(0.0, top);
                let scaled = libm::floor(libm::ldexp(y, j as i32)) as u64;
                (scaled & 1) as f64
            }))
        })
        .collect())
}

/// Inverse of [`decompose_real_query`]: `Σ_j a_j 2^−j − 1`.
pub fn recombine_bits(answers: &[f64]) -> f64 {
    answers.iter().enumerate().map(|(j, a)| a * libm::ldexp(1.0, -(j as i32))).sum::<f64>() - 1.0
}

#[derive(Clone)]
pub enum Backend {
    /// Answers every query with its true expectation.
    Exact { dist: Arc<dyn PointDistribution> },
    /// Answers with sample averages over fresh draws. VSTAT uses
    /// `⌈c·t·ln(1/δ)⌉` draws, STAT uses the Hoeffding count.
    Honest { dist: Arc<dyn PointDistribution>, delta: f64, constant: f64 },
    /// Answers with the legal value closest to the reference expectation.
    Adversarial { dist: Arc<dyn PointDistribution>, reference: Arc<dyn PointDistribution> },
}

impl Backend {
    pub fn exact(dist: Arc<dyn PointDistribution>) -> Self {
        Backend::Exact { dist }
    }

    pub fn honest(dist: Arc<dyn PointDistribution>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("failure probability must lie in (0, 1), got {delta}")));
        }
        Ok(Backend::Honest { dist, delta, constant: DEFAULT_HONEST_CONSTANT })
    }

    pub fn adversarial(dist: Arc<dyn PointDistribution>, reference: Arc<dyn PointDistribution>) -> Result<Self> {
        if dist.dim() != reference.dim() {
            return Err(Error::DimensionMismatch { expected: dist.dim(), actual: reference.dim() });
        }
        Ok(Backend::Adversarial { dist, reference })
    }

    pub fn dist(&self) -> &Arc<dyn PointDistribution> {
        match self {
            Backend::Exact { dist } | Backend::Honest { dist, .. } | Backend::Adversarial { dist, .. } => dist,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Exact { .. } => "exact",
            Backend::Honest { .. } => "honest",
            Backend::Adversarial { .. } => "adversarial",
        }
    }
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend").field("kind", &self.name()).field("dist", self.dist()).finish()
    }
}

/// One oracle reply.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Estimate(Scalar),
    /// `h(x)` for one fresh draw `x`.
    Sample(f64),
}

impl Response {
    pub fn to_f64(&self) -> f64 {
        match self {
            Response::Estimate(s) => s.to_f64(),
            Response::Sample(v) => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TranscriptRecord {
    pub index: u64,
    pub kind: OracleKind,
    pub query_digest: String,
    pub response: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_expectation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance_used: Option<f64>,
}

pub struct OracleSession {
    spec: OracleSpec,
    backend: Backend,
    mode: ArithmeticMode,
    rng: StdRng,
    transcript: Vec<TranscriptRecord>,
    recording: bool,
    query_count: u64,
    sample_count: u64,
    draws: u64,
    draw_budget: Option<u64>,
}

impl fmt::Debug for OracleSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleSession")
            .field("spec", &self.spec)
            .field("backend", &self.backend)
            .field("mode", &self.mode)
            .field("query_count", &self.query_count)
            .field("sample_count", &self.sample_count)
            .finish()
    }
}

impl OracleSession {
    /// A session in exact arithmetic when the dimension permits enumeration,
    /// double precision otherwise.
    pub fn new(spec: OracleSpec, backend: Backend, seed: u64) -> Self {
        let mode = if backend.dist().dim() <= MAX_ENUM_DIM { ArithmeticMode::Exact } else { ArithmeticMode::Float };
        Self::with_rng(spec, backend, StdRng::seed_from_u64(seed), mode)
    }

    pub fn with_rng(spec: OracleSpec, backend: Backend, rng: StdRng, mode: ArithmeticMode) -> Self {
        OracleSession {
            spec,
            backend,
            mode,
            rng,
            transcript: Vec::new(),
            recording: true,
            query_count: 0,
            sample_count: 0,
            draws: 0,
            draw_budget: None,
        }
    }

    pub fn with_mode(mut self, mode: ArithmeticMode) -> Self {
        self.mode = mode;
        self
    }

    /// Caps the total number of distribution draws (SAMPLE calls plus honest
    /// estimation draws).
    pub fn with_draw_budget(mut self, budget: u64) -> Self {
        self.draw_budget = Some(budget);
        self
    }

    /// Disables transcript recording; counters are still maintained.
    pub fn without_transcript(mut self) -> Self {
        self.recording = false;
        self
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn mode(&self) -> ArithmeticMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.backend.dist().dim()
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    fn consume(&mut self, draws: u64) -> Result<()> {
        if let Some(budget) = self.draw_budget {
            if self.draws.saturating_add(draws) > budget {
                return Err(Error::BudgetExhausted { budget });
            }
        }
        self.draws += draws;
        Ok(())
    }

    pub fn ask(&mut self, query: &Query) -> Result<Response> {
        query.check_dim(self.dim())?;
        let kind = self.spec.kind();
        if kind != OracleKind::Stat && !query.is_boolean() {
            let kind = if kind == OracleKind::Vstat { "VSTAT" } else { "SAMPLE" };
            return Err(Error::NonBooleanQuery { kind, digest: query.digest() });
        }
        let (response, truth, tol) = match self.spec.clone() {
            OracleSpec::Sample => {
                self.consume(1)?;
                self.sample_count += 1;
                let x = self.backend.dist().draw(&mut self.rng);
                (Response::Sample(query.evaluate(&x)), None, None)
            }
            OracleSpec::Vstat { t } => {
                let (v, truth) = self.answer_vstat(query, t)?;
                let tol = truth.as_ref().map(|p| tolerance_of(t, p.to_f64()));
                (Response::Estimate(v), truth, tol)
            }
            OracleSpec::Stat { tau } => {
                let (v, truth) = self.answer_stat(query, &tau)?;
                (Response::Estimate(v), truth, Some(ratio_to_f64(&tau)))
            }
        };
        self.query_count += 1;
        if self.recording {
            let response_exact = match &response {
                Response::Estimate(Scalar::Exact(r)) => Some(r.to_string()),
                _ => None,
            };
            self.transcript.push(TranscriptRecord {
                index: self.transcript.len() as u64,
                kind,
                query_digest: query.digest(),
                response: response.to_f64(),
                response_exact,
                true_expectation: truth.map(|s| s.to_f64()),
                tolerance_used: tol,
            });
        }
        Ok(response)
    }

    /// Convenience wrapper returning the numeric response.
    pub fn ask_value(&mut self, query: &Query) -> Result<f64> {
        Ok(self.ask(query)?.to_f64())
    }

    fn answer_vstat(&mut self, query: &Query, t: u64) -> Result<(Scalar, Option<Scalar>)> {
        let mode = self.mode;
        let backend = self.backend.clone();
        let truth = backend.dist().expectation(query, mode)?;
        let v = match (&backend, &truth) {
            (Backend::Exact { .. }, Scalar::Exact(p)) => Scalar::Exact(clamp_vstat_exact(t, p)),
            (Backend::Exact { .. }, Scalar::Float(p)) => Scalar::Float(clamp_vstat(t, *p)),
            (Backend::Honest { dist, delta, constant }, _) => {
                let draws = honest_sample_count(t, *delta, *constant);
                self.consume(draws)?;
                let sum = dist.sample_query_sum(query, draws, &mut self.rng)?;
                match mode {
                    ArithmeticMode::Exact => Scalar::Exact(clamp_vstat_exact(t, &average(sum, draws))),
                    ArithmeticMode::Float => Scalar::Float(clamp_vstat(t, sum / draws as f64)),
                }
            }
            (Backend::Adversarial { reference, .. }, Scalar::Exact(p)) => {
                let r = reference.expectation(query, ArithmeticMode::Exact)?.into_exact().unwrap_or_default();
                let v = if vstat_accepts(t, p, &r) {
                    r
                } else {
                    let tau = tolerance_lower_exact(t, p);
                    if r > *p {
                        p + tau
                    } else {
                        p - tau
                    }
                };
                Scalar::Exact(clamp_vstat_exact(t, &v))
            }
            (Backend::Adversarial { reference, .. }, Scalar::Float(p)) => {
                let r = reference.expectation_f64(query)?;
                let tau = tolerance_of(t, *p);
                Scalar::Float(clamp_vstat(t, r.clamp(p - tau, p + tau)))
            }
        };
        Ok((v, Some(truth)))
    }

    fn answer_stat(&mut self, query: &Query, tau: &BigRational) -> Result<(Scalar, Option<Scalar>)> {
        let mode = self.mode;
        let backend = self.backend.clone();
        let truth = backend.dist().expectation(query, mode)?;
        let v = match (&backend, &truth) {
            (Backend::Exact { .. }, _) => truth.clone(),
            (Backend::Honest { dist, delta, .. }, _) => {
                let draws = stat_sample_count(ratio_to_f64(tau), *delta);
                self.consume(draws)?;
                let sum = dist.sample_query_sum(query, draws, &mut self.rng)?;
                match mode {
                    ArithmeticMode::Exact => Scalar::Exact(average(sum, draws)),
                    ArithmeticMode::Float => Scalar::Float(sum / draws as f64),
                }
            }
            (Backend::Adversarial { reference, .. }, Scalar::Exact(p)) => {
                let r = reference.expectation(query, ArithmeticMode::Exact)?.into_exact().unwrap_or_default();
                Scalar::Exact(clamp_rational(&r, &(p - tau), &(p + tau)))
            }
            (Backend::Adversarial { reference, .. }, Scalar::Float(p)) => {
                let r = reference.expectation_f64(query)?;
                let tau = ratio_to_f64(tau);
                Scalar::Float(r.clamp(p - tau, p + tau))
            }
        };
        Ok((v, Some(truth)))
    }
}
