//! Simulating SAMPLE with VSTAT, and exact transcript-law diagnostics.
//!
//! An algorithm making `m` adaptive boolean SAMPLE queries is run against
//! VSTAT(`⌈m/δ'²⌉`) by flipping a coin of bias `p'` for each response `p'`.
//! The law of the resulting bit string is compared with the law under true
//! SAMPLE access by enumerating all `2^m` transcripts.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::bits::IndexSet;
use crate::distributions::PointDistribution;
use crate::error::{invalid, precondition, Error, Result};
use crate::oracles::{clamp_vstat_exact, tolerance_lower_exact, tolerance_sq_exact, vstat_accepts, OracleKind, OracleSession};
use crate::query::{Query, Table};
use crate::rng::SeedStream;
use crate::scalar::{big, min_rational, ratio_to_f64, rational_from_f64};

/// Largest transcript length enumerated exhaustively.
pub const MAX_TRANSCRIPT_LEN: usize = 16;

/// `⌈m/δ'²⌉`.
pub fn vstat_parameter(m: u64, delta_prime: &BigRational) -> Result<u64> {
    if !delta_prime.is_positive() || delta_prime > &BigRational::new(BigInt::one(), BigInt::from(2)) {
        return Err(invalid(format!("δ' = {delta_prime} must lie in (0, 1/2]")));
    }
    let v = big(m) / (delta_prime * delta_prime);
    let t = v.ceil().to_integer();
    u64::try_from(t).map_err(|_| invalid("VSTAT parameter overflows u64"))
}

/// A deterministic algorithm whose `i`-th boolean query may depend on the
/// bits received so far.
pub trait AdaptiveAlgorithm {
    fn queries(&self) -> usize;

    fn query(&self, prefix: &[bool]) -> Query;
}

/// Information available to a response policy for one VSTAT query.
#[derive(Debug, Clone)]
pub struct ResponseContext<'a> {
    pub t: u64,
    /// True expectation under the sampled distribution.
    pub p: &'a BigRational,
    /// Expectation under the reference distribution, when one is supplied.
    pub reference: Option<&'a BigRational>,
    pub prefix: &'a [bool],
}

/// A legal VSTAT(t) answering strategy.
pub trait ResponsePolicy: fmt::Debug {
    fn name(&self) -> String;

    fn respond(&self, ctx: &ResponseContext<'_>) -> BigRational;
}

/// Answers with the true expectation.
#[derive(Debug, Clone, Copy)]
pub struct ExactPolicy;

/// Answers at the upper edge of the band, `p + τ`.
#[derive(Debug, Clone, Copy)]
pub struct BandEdgeHigh;

/// Answers at the lower edge of the band, `p − τ`.
#[derive(Debug, Clone, Copy)]
pub struct BandEdgeLow;

/// Answers with the legal value closest to the reference expectation.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceProjection;

/// Alternates band edges by the parity of the number of ones received so far.
#[derive(Debug, Clone, Copy)]
pub struct AlternatingEdges;

impl ResponsePolicy for ExactPolicy {
    fn name(&self) -> String {
        "exact".into()
    }

    fn respond(&self, ctx: &ResponseContext<'_>) -> BigRational {
        ctx.p.clone()
    }
}

impl ResponsePolicy for BandEdgeHigh {
    fn name(&self) -> String {
        "band-edge-high".into()
    }

    fn respond(&self, ctx: &ResponseContext<'_>) -> BigRational {
        ctx.p + tolerance_lower_exact(ctx.t, ctx.p)
    }
}

impl ResponsePolicy for BandEdgeLow {
    fn name(&self) -> String {
        "band-edge-low".into()
    }

    fn respond(&self, ctx: &ResponseContext<'_>) -> BigRational {
        ctx.p - tolerance_lower_exact(ctx.t, ctx.p)
    }
}

impl ResponsePolicy for ReferenceProjection {
    fn name(&self) -> String {
        "adversarial".into()
    }

    fn respond(&self, ctx: &ResponseContext<'_>) -> BigRational {
        let Some(r) = ctx.reference else { return ctx.p.clone() };
        if vstat_accepts(ctx.t, ctx.p, r) {
            r.clone()
        } else if r > ctx.p {
            ctx.p + tolerance_lower_exact(ctx.t, ctx.p)
        } else {
            ctx.p - tolerance_lower_exact(ctx.t, ctx.p)
        }
    }
}

impl ResponsePolicy for AlternatingEdges {
    fn name(&self) -> String {
        "alternating-edges".into()
    }

    fn respond(&self, ctx: &ResponseContext<'_>) -> BigRational {
        let ones = ctx.prefix.iter().filter(|b| **b).count();
        if ones % 2 == 0 {
            BandEdgeHigh.respond(ctx)
        } else {
            BandEdgeLow.respond(ctx)
        }
    }
}

/// The four policies exercised by the transcript-law checks.
pub fn standard_policies() -> Vec<Box<dyn ResponsePolicy>> {
    alloc::vec![Box::new(ExactPolicy), Box::new(BandEdgeHigh), Box::new(BandEdgeLow), Box::new(ReferenceProjection)]
}

/// Which law a transcript distribution describes.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    /// Bits from true SAMPLE access: bit `i` is Bernoulli(`p_{z^{i−1}}`).
    Sample,
    /// Bits from coins of bias `p'`, where `p'` is the policy's VSTAT(t)
    /// response clamped into `[1/t, 1 − 1/t]`.
    Simulated { t: u64, policy: &'a dyn ResponsePolicy },
}

/// Exact law over `{0,1}^m`; transcript `z` is stored at the index whose bit
/// `i` is `z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptDistribution {
    m: usize,
    masses: Vec<BigRational>,
}

impl TranscriptDistribution {
    pub fn from_masses(m: usize, masses: Vec<BigRational>) -> Result<Self> {
        if m > MAX_TRANSCRIPT_LEN {
            return Err(Error::EnumerationGuard { n: m, limit: MAX_TRANSCRIPT_LEN });
        }
        if masses.len() != 1usize << m {
            return Err(invalid(format!("{} masses given for transcripts of length {m}", masses.len())));
        }
        Ok(TranscriptDistribution { m, masses })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn masses(&self) -> &[BigRational] {
        &self.masses
    }

    pub fn mass(&self, z: &[bool]) -> &BigRational {
        &self.masses[encode(z)]
    }

    pub fn total(&self) -> BigRational {
        self.masses.iter().sum()
    }
}

fn encode(z: &[bool]) -> usize {
    z.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i))
}

/// Exact law of the transcript of `alg` over `dist` under `law`. Each mass
/// is the product of the conditional Bernoulli masses along the transcript.
pub fn transcript_distribution(
    alg: &dyn AdaptiveAlgorithm,
    dist: &dyn PointDistribution,
    reference: Option<&dyn PointDistribution>,
    law: Law<'_>,
) -> Result<TranscriptDistribution> {
    let m = alg.queries();
    if m > MAX_TRANSCRIPT_LEN {
        return Err(Error::EnumerationGuard { n: m, limit: MAX_TRANSCRIPT_LEN });
    }
    let mut masses = alloc::vec![BigRational::zero(); 1usize << m];
    let mut prefix = Vec::with_capacity(m);
    descend(alg, dist, reference, &law, &mut prefix, BigRational::one(), &mut masses)?;
    TranscriptDistribution::from_masses(m, masses)
}

fn descend(
    alg: &dyn AdaptiveAlgorithm,
    dist: &dyn PointDistribution,
    reference: Option<&dyn PointDistribution>,
    law: &Law<'_>,
    prefix: &mut Vec<bool>,
    acc: BigRational,
    masses: &mut [BigRational],
) -> Result<()> {
    if prefix.len() == alg.queries() {
        masses[encode(prefix)] = acc;
        return Ok(());
    }
    let q = alg.query(prefix);
    if !q.is_boolean() {
        return Err(Error::NonBooleanQuery { kind: "SAMPLE", digest: q.digest() });
    }
    let p = dist.exact_expectation(&q)?.into_exact().unwrap_or_default();
    let bias = match law {
        Law::Sample => p,
        Law::Simulated { t, policy } => {
            let r = match reference {
                Some(d) => Some(d.exact_expectation(&q)?.into_exact().unwrap_or_default()),
                None => None,
            };
            let ctx = ResponseContext { t: *t, p: &p, reference: r.as_ref(), prefix };
            let v = policy.respond(&ctx);
            if !vstat_accepts(*t, &p, &v) {
                return Err(precondition(format!("policy {} answered {v} outside the VSTAT({t}) band around {p}", policy.name())));
            }
            clamp_vstat_exact(*t, &v)
        }
    };
    let one = BigRational::one();
    for bit in [false, true] {
        let step = if bit { bias.clone() } else { &one - &bias };
        if step.is_zero() {
            // every completion of this prefix has mass zero
            continue;
        }
        prefix.push(bit);
        descend(alg, dist, reference, law, prefix, &acc * &step, masses)?;
        prefix.pop();
    }
    Ok(())
}

/// `(1/2) Σ_z |a(z) − b(z)|`.
pub fn tv_distance(a: &TranscriptDistribution, b: &TranscriptDistribution) -> Result<BigRational> {
    if a.m != b.m {
        return Err(Error::DimensionMismatch { expected: a.m, actual: b.m });
    }
    tv_distance_masses(&a.masses, &b.masses)
}

/// Total variation between two distributions on a common finite support.
pub fn tv_distance_masses(a: &[BigRational], b: &[BigRational]) -> Result<BigRational> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let sum: BigRational = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / big(2))
}

/// `Σ a(z)²/b(z) − 1`, the χ²-divergence of `a` from `b`. Requires `b > 0`
/// wherever `a > 0`.
pub fn chi_square(a: &[BigRational], b: &[BigRational]) -> Result<BigRational> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let mut s = BigRational::zero();
    for (x, y) in a.iter().zip(b) {
        if x.is_zero() {
            continue;
        }
        if y.is_zero() {
            return Err(Error::VanishingReference);
        }
        s += x * x / y;
    }
    Ok(s - BigRational::one())
}

/// Whether `Δ_TV(a, b) ≤ √ρ/2` with `ρ = χ²(a‖b)`, decided exactly as
/// `4·TV² ≤ ρ`.
pub fn tv_within_chi_square_bound(a: &[BigRational], b: &[BigRational]) -> Result<bool> {
    let tv = tv_distance_masses(a, b)?;
    let rho = chi_square(a, b)?;
    Ok(big(4) * &tv * &tv <= rho)
}

/// `E_a[a/b]`, the expected likelihood ratio of the true law over the
/// simulated law; equals `1 + χ²(a‖b)`.
pub fn expected_ratio(a: &TranscriptDistribution, b: &TranscriptDistribution) -> Result<BigRational> {
    Ok(chi_square(&a.masses, &b.masses)? + BigRational::one())
}

/// `1 + (p − p')²/(p'(1 − p'))`, which equals `p²/p' + (1−p)²/(1−p')`.
pub fn bernoulli_ratio(p: &BigRational, p_prime: &BigRational) -> Result<BigRational> {
    let one = BigRational::one();
    if !p_prime.is_positive() || p_prime >= &one {
        return Err(invalid(format!("p' = {p_prime} must lie strictly between 0 and 1")));
    }
    let d = p - p_prime;
    Ok(&one + &d * &d / (p_prime * (&one - p_prime)))
}

pub fn bernoulli_ratio_f64(p: f64, p_prime: f64) -> Result<f64> {
    let p = rational_from_f64(p).ok_or_else(|| invalid("p must be finite"))?;
    let pp = rational_from_f64(p_prime).ok_or_else(|| invalid("p' must be finite"))?;
    Ok(ratio_to_f64(&bernoulli_ratio(&p, &pp)?))
}

/// Outcome of the flip-probability check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipVerdict {
    Holds,
    Fails,
    /// `|p' − p|` is below the VSTAT(t) tolerance, so the claim says nothing.
    NotApplicable,
}

/// For `|p' − p| ≥ max{1/t, √(p(1−p)/t)}`, checks
/// `|p' − p| ≥ √(min{p', 1−p'}/(3t))`, comparing squares exactly.
pub fn flip_bound_holds(p: &BigRational, p_prime: &BigRational, t: u64) -> Result<FlipVerdict> {
    let one = BigRational::one();
    for v in [p, p_prime] {
        if v.is_negative() || v > &one {
            return Err(invalid(format!("probability {v} outside [0, 1]")));
        }
    }
    if t == 0 {
        return Err(invalid("t must be positive"));
    }
    let d = p_prime - p;
    let d2 = &d * &d;
    if d2 < tolerance_sq_exact(t, p) {
        return Ok(FlipVerdict::NotApplicable);
    }
    let m = min_rational(p_prime, &(&one - p_prime));
    Ok(if d2 * big(3 * t) >= m { FlipVerdict::Holds } else { FlipVerdict::Fails })
}

/// Runs `m` adaptive queries against a VSTAT session, emitting one
/// Bernoulli(`p'`) bit per query with `p'` the clamped response.
pub fn simulate_samples_via_vstat(
    session: &mut OracleSession,
    m: usize,
    mut next_query: impl FnMut(&[bool]) -> Query,
    rng: &mut dyn RngCore,
) -> Result<Vec<bool>> {
    let t = match session.spec() {
        crate::oracles::OracleSpec::Vstat { t } => *t,
        _ => return Err(precondition(format!("simulation requires a VSTAT session, got {}", session.spec().kind()))),
    };
    debug_assert_eq!(session.spec().kind(), OracleKind::Vstat);
    let lo = 1.0 / t as f64;
    let mut bits = Vec::with_capacity(m);
    for _ in 0..m {
        let q = next_query(&bits);
        let v = session.ask_value(&q)?;
        let p = if t < 2 { 0.5 } else { v.clamp(lo, 1.0 - lo) };
        bits.push(rng.gen::<f64>() < p);
    }
    Ok(bits)
}

/// A pseudo-random deterministic adaptive algorithm: the query asked after
/// prefix `z` is derived from `(seed, z)` and is a coordinate, a small
/// conjunction, or a random boolean truth table over `{0,1}^n`.
#[derive(Debug, Clone, Copy)]
pub struct SeededAdaptiveAlgorithm {
    n: usize,
    m: usize,
    seed: u64,
}

impl SeededAdaptiveAlgorithm {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > crate::query::MAX_TABLE_DIM {
            return Err(invalid(format!("dimension {n} outside 1..={}", crate::query::MAX_TABLE_DIM)));
        }
        if m > MAX_TRANSCRIPT_LEN {
            return Err(Error::EnumerationGuard { n: m, limit: MAX_TRANSCRIPT_LEN });
        }
        Ok(SeededAdaptiveAlgorithm { n, m, seed })
    }
}

impl AdaptiveAlgorithm for SeededAdaptiveAlgorithm {
    fn queries(&self) -> usize {
        self.m
    }

    fn query(&self, prefix: &[bool]) -> Query {
        let key = (1u64 << prefix.len()) | encode(prefix) as u64;
        let mut rng = SeedStream::new(self.seed).rng(key);
        let n = self.n;
        match rng.gen_range(0..3) {
            0 => Query::coordinate(rng.gen_range(0..n)),
            1 => {
                let size = rng.gen_range(1..=n.min(3));
                let mut set = IndexSet::empty(n);
                while set.len() < size {
                    set.insert(rng.gen_range(0..n));
                }
                Query::conjunction(set)
            }
            _ => {
                let density = rng.gen_range(1..8) as f64 / 8.0;
                let values: Vec<f64> = (0..1u64 << n).map(|_| if rng.gen::<f64>() < density { 1.0 } else { 0.0 }).collect();
                match Table::new(n, values) {
                    Ok(t) => Query::Tabulated(t),
                    Err(_) => Query::coordinate(0),
                }
            }
        }
    }
}

/// JSON diagnostic for one transcript-law comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationDiagnostic {
    pub m: usize,
    pub t: u64,
    pub delta_prime: f64,
    pub policy: String,
    pub tv: f64,
    pub bound: f64,
    pub pass: bool,
    pub expected_ratio: f64,
    pub ratio_bound: f64,
    pub ratio_pass: bool,
}

/// Compares the true SAMPLE law of `alg` with its simulated law under
/// `policy`, exactly: `TV ≤ δ'` and `E[Π/Π'] ≤ (1 + 2/t)^m`.
pub fn diagnose(
    alg: &dyn AdaptiveAlgorithm,
    dist: &dyn PointDistribution,
    reference: Option<&dyn PointDistribution>,
    policy: &dyn ResponsePolicy,
    delta_prime: &BigRational,
) -> Result<SimulationDiagnostic> {
    let m = alg.queries();
    let t = vstat_parameter(m as u64, delta_prime)?;
    let truth = transcript_distribution(alg, dist, reference, Law::Sample)?;
    let sim = transcript_distribution(alg, dist, reference, Law::Simulated { t, policy })?;
    let tv = tv_distance(&truth, &sim)?;
    let ratio = expected_ratio(&truth, &sim)?;
    let base = BigRational::one() + BigRational::new(BigInt::from(2), BigInt::from(t));
    let ratio_bound = num_traits::pow(base, m);
    Ok(SimulationDiagnostic {
        m,
        t,
        delta_prime: ratio_to_f64(delta_prime),
        policy: policy.name(),
        tv: ratio_to_f64(&tv),
        bound: ratio_to_f64(delta_prime),
        pass: &tv <= delta_prime,
        expected_ratio: ratio_to_f64(&ratio),
        ratio_bound: ratio_to_f64(&ratio_bound),
        ratio_pass: ratio <= ratio_bound,
    })
}

/// The transcript law of a trivially non-adaptive algorithm asking the same
/// point-independent bias at every step; handy for closed-form checks.
#[derive(Debug, Clone)]
pub struct FixedQueries(pub Vec<Query>);

impl AdaptiveAlgorithm for FixedQueries {
    fn queries(&self) -> usize {
        self.0.len()
    }

    fn query(&self, prefix: &[bool]) -> Query {
        self.0[prefix.len()].clone()
    }
}

/// An adaptive algorithm given by a closure.
pub struct FnAlgorithm<F: Fn(&[bool]) -> Query> {
    pub m: usize,
    pub f: F,
}

impl<F: Fn(&[bool]) -> Query> AdaptiveAlgorithm for FnAlgorithm<F> {
    fn queries(&self) -> usize {
        self.m
    }

    fn query(&self, prefix: &[bool]) -> Query {
        (self.f)(prefix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{PlantedDistribution, ReferenceDistribution};
    use crate::scalar::ratio;

    #[test]
    fn uniform_two_query_transcript() {
        let d = ReferenceDistribution::uniform(1).unwrap();
        let alg = FixedQueries(alloc::vec![Query::coordinate(0), Query::coordinate(0)]);
        let law = transcript_distribution(&alg, &d, None, Law::Sample).unwrap();
        assert!(law.masses().iter().all(|m| *m == ratio(1, 4)));
        assert_eq!(law.total(), BigRational::one());
    }

    #[test]
    fn adaptive_conditionals() {
        // coordinate means over the rows: 0.5, 0.3, 0.7
        let rows = ["111", "101", "111", "101", "101", "000", "010", "001", "000", "001"];
        let d = crate::distributions::EmpiricalDistribution::new(3, rows.iter().map(|r| crate::bits::Point::parse(r).unwrap()).collect())
            .unwrap();
        let alg = FnAlgorithm {
            m: 2,
            f: |z: &[bool]| match z {
                [] => Query::coordinate(0),
                [false] => Query::coordinate(1),
                _ => Query::coordinate(2),
            },
        };
        let law = transcript_distribution(&alg, &d, None, Law::Sample).unwrap();
        assert_eq!(law.mass(&[false, false]), &ratio(35, 100));
        assert_eq!(law.mass(&[false, true]), &ratio(15, 100));
        assert_eq!(law.mass(&[true, false]), &ratio(15, 100));
        assert_eq!(law.mass(&[true, true]), &ratio(35, 100));
        assert_eq!(law.total(), BigRational::one());
    }

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli_ratio(&ratio(1, 2), &ratio(1, 2)).unwrap(), BigRational::one());
        let r = bernoulli_ratio(&ratio(1, 2), &ratio(55, 100)).unwrap();
        assert_eq!(r, ratio(100, 99));
        assert!(r <= ratio(102, 100));
        let r = bernoulli_ratio(&BigRational::zero(), &ratio(1, 100)).unwrap();
        assert_eq!(r, ratio(100, 99));
        assert!(bernoulli_ratio(&ratio(1, 2), &BigRational::one()).is_err());
    }

    #[test]
    fn tv_and_bernoulli_example() {
        let a = [ratio(1, 2), ratio(1, 2)];
        let b = [ratio(45, 100), ratio(55, 100)];
        assert_eq!(tv_distance_masses(&a, &b).unwrap(), ratio(1, 20));
        let rho = chi_square(&a, &b).unwrap();
        assert_eq!(rho, ratio(1, 99));
        assert!((libm::sqrt(ratio_to_f64(&rho)) / 2.0 - 0.05025).abs() < 1e-5);
        assert!(tv_within_chi_square_bound(&a, &b).unwrap());
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip_bound_holds(&ratio(1, 4), &ratio(1, 5), 100).unwrap(), FlipVerdict::Holds);
        assert_eq!(flip_bound_holds(&BigRational::zero(), &ratio(1, 100), 100).unwrap(), FlipVerdict::Holds);
        assert_eq!(flip_bound_holds(&ratio(3, 4), &ratio(4, 5), 100).unwrap(), FlipVerdict::Holds);
        assert_eq!(flip_bound_holds(&ratio(1, 2), &ratio(51, 100), 100).unwrap(), FlipVerdict::NotApplicable);
    }

    #[test]
    fn exact_policy_has_zero_tv() {
        let d = PlantedDistribution::clique(4, IndexSet::prefix(4, 2).unwrap()).unwrap();
        let alg = SeededAdaptiveAlgorithm::new(4, 3, 11).unwrap();
        let diag = diagnose(&alg, &d, None, &ExactPolicy, &ratio(1, 4)).unwrap();
        assert_eq!(diag.t, 48);
        assert_eq!(diag.tv, 0.0);
        assert!(diag.pass && diag.ratio_pass);
    }

    #[test]
    fn vstat_parameter_examples() {
        assert_eq!(vstat_parameter(8, &ratio(1, 4)).unwrap(), 128);
        assert_eq!(vstat_parameter(1, &ratio(1, 10)).unwrap(), 100);
        assert!(vstat_parameter(1, &ratio(3, 4)).is_err());
    }
}
