//! Pairwise and average correlations of planted distributions, and the
//! statistical-dimension and lower-bound calculators.
//!
//! Only the specific witnesses used for the planted families are evaluated;
//! the outer maximization over reference distributions in the general
//! definitions is not computable and is not attempted.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::bits::IndexSet;
use crate::error::{invalid, precondition, Result};
use crate::scalar::{big, int, pow, ratio_to_f64, rational_from_f64, Prob, Scalar};

/// Slack for the log-space comparison `ln k ≤ (1/2 − δ) ln n`, so that exact
/// boundary cases such as `k = n^{1/2−δ}` pass despite rounding.
pub const LOG_EPS: f64 = 1e-12;

fn check_pq(p: &Prob, q: &Prob) -> Result<()> {
    if q.exact().is_zero() || q.exact() >= &BigRational::one() {
        return Err(invalid(format!("q = {q} must lie in (0, 1)")));
    }
    if p.exact() < q.exact() || p.exact().is_zero() {
        return Err(invalid(format!("need 0 < q <= p <= 1, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// `χ = (p − q)²/(q(1 − q))`.
pub fn chi(p: &Prob, q: &Prob) -> BigRational {
    let d = p.exact() - q.exact();
    &d * &d / (q.exact() * (BigRational::one() - q.exact()))
}

/// `⟨D̂_i, D̂_j⟩ = ((1 + χ)^λ − 1)·k²/n²` for supports overlapping in `λ` indices.
pub fn pairwise_correlation(n: usize, k: usize, lambda: usize, p: &Prob, q: &Prob) -> Result<BigRational> {
    check_pq(p, q)?;
    if lambda > k || k > n || n == 0 {
        return Err(invalid(format!("need 0 <= λ <= k <= n, got λ = {lambda}, k = {k}, n = {n}")));
    }
    let base = BigRational::one() + chi(p, q);
    let alpha = BigRational::new(BigInt::from(k * k), BigInt::from(n * n));
    Ok((pow(&base, lambda) - BigRational::one()) * alpha)
}

/// `2^λ k²/n²`, the clique-case correlation bound.
pub fn clique_correlation_bound(n: usize, k: usize, lambda: usize) -> BigRational {
    BigRational::new(BigInt::from(k * k) << lambda, BigInt::from(n * n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrelationRecord {
    pub overlap: usize,
    pub exact_value: Scalar,
    pub clique_bound: Scalar,
}

pub fn correlation_record(n: usize, k: usize, lambda: usize, p: &Prob, q: &Prob) -> Result<CorrelationRecord> {
    Ok(CorrelationRecord {
        overlap: lambda,
        exact_value: Scalar::Exact(pairwise_correlation(n, k, lambda, p, q)?),
        clique_bound: Scalar::Exact(clique_correlation_bound(n, k, lambda)),
    })
}

/// `|T_λ| = C(k, λ)·C(n − k, k − λ)`.
pub fn overlap_class_size(n: usize, k: usize, lambda: usize) -> Result<BigInt> {
    if lambda > k || k > n {
        return Err(invalid(format!("need 0 <= λ <= k <= n, got λ = {lambda}, k = {k}, n = {n}")));
    }
    if k - lambda > n - k {
        return Ok(BigInt::zero());
    }
    Ok(binomial(BigInt::from(k), BigInt::from(lambda)) * binomial(BigInt::from(n - k), BigInt::from(k - lambda)))
}

pub fn n_choose_k(n: usize, k: usize) -> BigInt {
    if k > n {
        BigInt::zero()
    } else {
        binomial(BigInt::from(n), BigInt::from(k))
    }
}

/// Average absolute pairwise correlation `(1/m²) Σ_{i,j} |⟨D̂_i, D̂_j⟩|` over the
/// given supports, or with `reference` the one-vs-set average
/// `(1/|A|) Σ_i ⟨D̂_S, D̂_i⟩`. Uses the closed form per pair.
pub fn average_correlation(
    supports: &[IndexSet],
    n: usize,
    k: usize,
    p: &Prob,
    q: &Prob,
    reference: Option<&IndexSet>,
) -> Result<BigRational> {
    if supports.is_empty() {
        return Err(invalid("average correlation of an empty set"));
    }
    for s in supports.iter().chain(reference) {
        if s.dim() != n || s.len() != k {
            return Err(invalid(format!("support {s:?} is not a size-{k} subset of [{n}]")));
        }
    }
    let by_overlap: Vec<BigRational> = (0..=k).map(|l| pairwise_correlation(n, k, l, p, q).map(|v| v.abs())).collect::<Result<_>>()?;
    let mut counts = vec![0u64; k + 1];
    match reference {
        Some(s) => {
            for t in supports {
                counts[s.intersection_len(t)] += 1;
            }
        }
        None => {
            for a in supports {
                for b in supports {
                    counts[a.intersection_len(b)] += 1;
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let sum: BigRational = counts.iter().zip(&by_overlap).map(|(&c, v)| v * big(c)).sum();
    Ok(sum / big(total))
}

/// The proof's worst case for a set of `size` supports against `s`: `s`
/// itself, then every support meeting `s` in `k − 1` indices, then `k − 2`,
/// and so on, each class in lexicographic order.
pub fn greedy_worst_case_set(s: &IndexSet, size: usize) -> Vec<IndexSet> {
    let n = s.dim();
    let k = s.len();
    let mut out = Vec::with_capacity(size);
    for lambda in (0..=k).rev() {
        if out.len() >= size {
            break;
        }
        for c in crate::bits::Combinations::new(n, k) {
            let t = IndexSet::from_sorted(n, &c).expect("combinations are sorted");
            if t.intersection_len(s) == lambda {
                out.push(t);
                if out.len() >= size {
                    break;
                }
            }
        }
    }
    out
}

/// Overlap-class composition of the greedy worst-case set of a given size:
/// entry `λ` counts members meeting `s` in `λ` indices.
pub fn greedy_class_counts(n: usize, k: usize, size: &BigInt) -> Result<Vec<BigInt>> {
    let mut left = size.clone();
    let mut counts = vec![BigInt::zero(); k + 1];
    for lambda in (0..=k).rev() {
        if !left.is_positive() {
            break;
        }
        let avail = overlap_class_size(n, k, lambda)?;
        let take = if avail < left { avail } else { left.clone() };
        left -= &take;
        counts[lambda] = take;
    }
    Ok(counts)
}

/// `n^e` as an exact rational when `e` is rational with denominator `b` and
/// `n` is a perfect `b`-th power; otherwise a double.
pub fn power_of(n: usize, e: &BigRational) -> Scalar {
    let (num, den) = (e.numer(), e.denom());
    if let (Some(a), Some(b)) = (num.to_i64(), den.to_u32()) {
        let nb = BigInt::from(n);
        let root = if b == 1 { nb.clone() } else { nb.nth_root(b) };
        if Pow::pow(&root, b) == nb && a.unsigned_abs() <= 4096 {
            let v = BigRational::from_integer(Pow::pow(root, a.unsigned_abs()));
            return Scalar::Exact(if a < 0 { v.recip() } else { v });
        }
    }
    Scalar::Float(libm::pow(n as f64, ratio_to_f64(e)))
}

/// Whether `k ≤ n^{1/2 − δ}`, compared in log space.
pub fn clique_size_admissible(n: usize, k: usize, delta: f64) -> bool {
    libm::log(k as f64) <= (0.5 - delta) * libm::log(n as f64) + LOG_EPS
}

/// Success probability used for the integer bounds carried in a
/// [`DimensionEstimate`].
pub const DEFAULT_SUCCESS: (i64, i64) = (2, 3);

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionEstimate {
    pub gamma_bar: Scalar,
    pub d: Scalar,
    pub eta: Scalar,
    /// `1/(3γ̄)`; absent when `γ̄ = 0`.
    pub vstat_param: Option<Scalar>,
    /// `⌊(δ−η)/(1−η)·d⌋` at success probability 2/3.
    pub query_bound: Option<f64>,
    /// `⌊min{d(δ−η)/(2(1−η)), (δ−η)²/(12γ̄)}⌋` at success probability 2/3.
    pub sample_bound: Option<f64>,
    pub flags: Vec<String>,
}

fn floor_f64(s: &Scalar) -> f64 {
    libm::floor(s.to_f64())
}

fn estimate(gamma_bar: BigRational, d: Scalar, eta: BigRational, mut flags: Vec<String>) -> DimensionEstimate {
    let success = crate::scalar::ratio(DEFAULT_SUCCESS.0, DEFAULT_SUCCESS.1);
    let vstat_param = (!gamma_bar.is_zero()).then(|| Scalar::Exact((int(3) * &gamma_bar).recip()));
    if gamma_bar.is_zero() {
        flags.push("vacuous:gamma-zero".into());
    }
    if d.to_f64() < 1.0 {
        flags.push("vacuous:d-below-one".into());
    }
    if !d.is_exact() {
        flags.push("float:d".into());
    }
    let d_exact = match &d {
        Scalar::Exact(r) => Some(r.clone()),
        Scalar::Float(v) => rational_from_f64(*v),
    };
    let (query_bound, sample_bound) = match d_exact {
        Some(dr) if success > eta => {
            let qb = query_lower_bound(&dr, &success, &eta).ok();
            let sb = sample_lower_bound(&dr, &gamma_bar, &success, &eta).ok();
            (qb.map(|v| floor_f64(&Scalar::Exact(v))), sb.map(|v| floor_f64(&Scalar::Exact(v))))
        }
        _ => (None, None),
    };
    DimensionEstimate { gamma_bar: Scalar::Exact(gamma_bar), d, eta: Scalar::Exact(eta), vstat_param, query_bound, sample_bound, flags }
}

fn d_from_exponent(n: usize, ell: usize, delta: &BigRational) -> Scalar {
    let e = big(2 * ell as u64) * delta;
    match power_of(n, &e) {
        Scalar::Exact(v) => Scalar::Exact(v / big(4)),
        Scalar::Float(v) => Scalar::Float(v / 4.0),
    }
}

/// Planted bipartite clique: `γ̄ = 2^{ℓ+2}k²/n²`, `d = n^{2ℓδ}/4`,
/// `η = 1/C(n, k)`, VSTAT parameter `1/(3γ̄)`.
pub fn sda_clique_bound(n: usize, k: usize, delta: &BigRational, ell: usize) -> Result<DimensionEstimate> {
    let df = ratio_to_f64(delta);
    if !(df > 0.0 && df < 0.5) {
        return Err(invalid(format!("δ = {delta} must lie in (0, 1/2)")));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if !clique_size_admissible(n, k, df) {
        return Err(precondition(format!("k = {k} exceeds n^(1/2-δ) = {}", libm::pow(n as f64, 0.5 - df))));
    }
    if ell == 0 || ell > k {
        return Err(precondition(format!("need 1 <= ℓ <= k, got ℓ = {ell}")));
    }
    let gamma_bar = clique_correlation_bound(n, k, ell + 2);
    let eta = BigRational::new(BigInt::one(), n_choose_k(n, k));
    Ok(estimate(gamma_bar, d_from_exponent(n, ell, delta), eta, Vec::new()))
}

fn check_success(delta: &BigRational, eta: &BigRational) -> Result<()> {
    if delta <= eta {
        return Err(precondition(format!("success probability {delta} must exceed η = {eta}")));
    }
    if eta >= &BigRational::one() || eta.is_negative() {
        return Err(invalid(format!("η = {eta} must lie in [0, 1)")));
    }
    Ok(())
}

/// `(δ − η)/(1 − η)·d`.
pub fn query_lower_bound(d: &BigRational, delta: &BigRational, eta: &BigRational) -> Result<BigRational> {
    check_success(delta, eta)?;
    Ok((delta - eta) / (BigRational::one() - eta) * d)
}

/// `min{d(δ − η)/(2(1 − η)), (δ − η)²/(12γ̄)}`; the second branch is absent
/// when `γ̄ = 0`.
pub fn sample_lower_bound(d: &BigRational, gamma_bar: &BigRational, delta: &BigRational, eta: &BigRational) -> Result<BigRational> {
    let (a, b) = sample_lower_bound_branches(d, gamma_bar, delta, eta)?;
    Ok(match b {
        Some(b) if b < a => b,
        _ => a,
    })
}

pub fn sample_lower_bound_branches(
    d: &BigRational,
    gamma_bar: &BigRational,
    delta: &BigRational,
    eta: &BigRational,
) -> Result<(BigRational, Option<BigRational>)> {
    check_success(delta, eta)?;
    if gamma_bar.is_negative() {
        return Err(invalid("γ̄ must be nonnegative"));
    }
    let gap = delta - eta;
    let a = d * &gap / (int(2) * (BigRational::one() - eta));
    let b = (!gamma_bar.is_zero()).then(|| &gap * &gap / (int(12) * gamma_bar));
    Ok((a, b))
}

/// The simplified form `min{d/4, 1/(48γ̄)}`.
pub fn sample_lower_bound_simplified(d: &BigRational, gamma_bar: &BigRational) -> BigRational {
    let a = d / big(4);
    if gamma_bar.is_zero() {
        return a;
    }
    let b = (int(48) * gamma_bar).recip();
    if b < a {
        b
    } else {
        a
    }
}

/// `m(τ² − γ)/(β − γ)` calls to STAT(τ).
pub fn stat_lower_bound_from_sd(m: &BigRational, gamma: &BigRational, beta: &BigRational, tau: &BigRational) -> Result<BigRational> {
    if gamma.is_negative() || beta <= gamma {
        return Err(precondition(format!("need β > γ >= 0, got β = {beta}, γ = {gamma}")));
    }
    let tau2 = tau * tau;
    if tau2 <= *gamma {
        return Err(precondition(format!("need τ² > γ, got τ² = {tau2}, γ = {gamma}")));
    }
    Ok(m * (tau2 - gamma) / (beta - gamma))
}

/// `SDA(Z, γ') ≥ m(γ' − γ)/(β − γ)`.
pub fn sd_to_sda(m: &BigRational, gamma: &BigRational, beta: &BigRational, gamma_prime: &BigRational) -> Result<BigRational> {
    if beta <= gamma || gamma_prime <= gamma {
        return Err(precondition(format!("need β > γ and γ' > γ, got β = {beta}, γ = {gamma}, γ' = {gamma_prime}")));
    }
    Ok(m * (gamma_prime - gamma) / (beta - gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DenseSubgraphEstimate {
    #[serde(flatten)]
    pub estimate: DimensionEstimate,
    pub chi: Scalar,
    /// `n²(1 + χ)^{−ℓ−1}/k²`.
    pub vstat_corollary: Scalar,
    /// `n²/(ℓα²k²)` for `q = 1/2`, `p = 1/2 + α`.
    pub vstat_half_bias: Option<Scalar>,
    /// `1/(48γ̄)`.
    pub sample_bound_simple: Option<Scalar>,
    /// `n^{2+2c}/(24ℓk²)` with `p − 1/2 = n^{−c}`.
    pub sample_bound_bias: Option<Scalar>,
    /// The clique-case factor `2(2^{ℓ+1} − 1)` set against `2^{ℓ+2}`.
    pub specialization: Option<(Scalar, Scalar)>,
}

/// Generalized planted dense subgraph:
/// `γ̄ = (2k²/n²)((1 + χ)^{ℓ+1} − 1)`, `d = n^{2ℓδ}/4`, `η = 1/C(n, k)`.
pub fn dense_subgraph_sda_bound(n: usize, k: usize, delta: &BigRational, ell: usize, p: &Prob, q: &Prob) -> Result<DenseSubgraphEstimate> {
    check_pq(p, q)?;
    let df = ratio_to_f64(delta);
    if !(df > 0.0 && df < 0.5) {
        return Err(invalid(format!("δ = {delta} must lie in (0, 1/2)")));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let x = chi(p, q);
    let one = BigRational::one();
    let base = &one + &x;
    if 2.0 * df * libm::log(n as f64) + LOG_EPS < libm::log(ratio_to_f64(&base)) {
        return Err(precondition(format!("n^(2δ) < 1 + χ = {}", ratio_to_f64(&base))));
    }
    if !clique_size_admissible(n, k, df) {
        return Err(precondition(format!("k = {k} exceeds n^(1/2-δ)")));
    }
    if ell == 0 || ell > k {
        return Err(precondition(format!("need 1 <= ℓ <= k, got ℓ = {ell}")));
    }
    let k2n2 = BigRational::new(BigInt::from(k * k), BigInt::from(n * n));
    let gamma_bar = int(2) * &k2n2 * (pow(&base, ell + 1) - &one);
    let eta = BigRational::new(BigInt::one(), n_choose_k(n, k));
    let mut flags = Vec::new();
    if x.is_zero() {
        flags.push("vacuous:no-plant".into());
    }
    let vstat_corollary = Scalar::Exact(k2n2.recip() / pow(&base, ell + 1));
    let half = crate::scalar::ratio(1, 2);
    let alpha = p.exact() - &half;
    let (vstat_half_bias, sample_bound_bias) = if q.exact() == &half && alpha.is_positive() {
        let a2 = &alpha * &alpha;
        let ell_r = big(ell as u64);
        (Some(Scalar::Exact((&ell_r * &a2 * &k2n2).recip())), Some(Scalar::Exact((int(24) * &ell_r * &a2 * &k2n2).recip())))
    } else {
        (None, None)
    };
    let sample_bound_simple = (!gamma_bar.is_zero()).then(|| Scalar::Exact((int(48) * &gamma_bar).recip()));
    let specialization = (p.exact().is_one() && q.exact() == &half).then(|| {
        let lhs = int(2) * (pow(&int(2), ell + 1) - &one);
        (Scalar::Exact(lhs), Scalar::Exact(pow(&int(2), ell + 2)))
    });
    Ok(DenseSubgraphEstimate {
        estimate: estimate(gamma_bar, d_from_exponent(n, ell, delta), eta, flags),
        chi: Scalar::Exact(x),
        vstat_corollary,
        vstat_half_bias,
        sample_bound_simple,
        sample_bound_bias,
        specialization,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SqDimBridge {
    pub d_prime: Scalar,
    /// `d' − 1/(1/d'^{2/3} − 1/d')`.
    pub sd_lower_bound: Scalar,
    /// `d'^{1/3} − 2`.
    pub query_bound: Scalar,
    /// `d'^{1/3}/2 − 2`.
    pub randomized_query_bound: Scalar,
    pub vacuous: bool,
}

/// Statistical dimension and query bounds implied by an SQ-DIM of `d'`.
pub fn sqdim_bridge(d_prime: &BigRational) -> Result<SqDimBridge> {
    if d_prime < &int(2) {
        return Err(invalid(format!("d' = {d_prime} must be at least 2")));
    }
    let cube = d_prime.is_integer().then(|| d_prime.to_integer()).and_then(|d| {
        let r = d.cbrt();
        (&r * &r * &r == d).then_some(r)
    });
    let (sd, qb, rqb) = match cube {
        Some(r) => {
            let r = BigRational::from_integer(r);
            let two_thirds = &r * &r;
            let sd = d_prime - (two_thirds.recip() - d_prime.recip()).recip();
            (Scalar::Exact(sd), Scalar::Exact(&r - int(2)), Scalar::Exact(r / int(2) - int(2)))
        }
        None => {
            let d = ratio_to_f64(d_prime);
            let r = libm::cbrt(d);
            let sd = d - 1.0 / (1.0 / (r * r) - 1.0 / d);
            (Scalar::Float(sd), Scalar::Float(r - 2.0), Scalar::Float(r / 2.0 - 2.0))
        }
    };
    Ok(SqDimBridge {
        d_prime: Scalar::Exact(d_prime.clone()),
        vacuous: sd.to_f64() <= 0.0 || qb.to_f64() <= 0.0,
        sd_lower_bound: sd,
        query_bound: qb,
        randomized_query_bound: rqb,
    })
}

/// Outcome of checking one `(n, k, δ, ℓ)` point of the average-correlation
/// bound against greedy worst-case sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AverageBoundCheck {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub ell: usize,
    pub min_size: u64,
    pub sizes_checked: u64,
    pub worst_average: Scalar,
    pub bound: Scalar,
    pub holds: bool,
}

/// Checks `(1/|A|) Σ_{S_i ∈ A} ⟨D̂_S, D̂_i⟩ < 2^{ℓ+2}k²/n²` at `p = 1, q = 1/2`
/// for the greedy worst-case set of every size from `⌈4(m−1)/n^{2ℓδ}⌉` to
/// `m = C(n, k)`.
pub fn check_average_bound(n: usize, k: usize, delta: f64, ell: usize) -> Result<AverageBoundCheck> {
    let p = Prob::one();
    let q = Prob::half();
    let m = n_choose_k(n, k).to_u64().ok_or_else(|| invalid("C(n, k) too large for the greedy check"))?;
    let threshold = 4.0 * (m - 1) as f64 / libm::pow(n as f64, 2.0 * ell as f64 * delta);
    // rounding down by a hair only adds sizes to the check
    let min_size = (libm::ceil(threshold * (1.0 - 1e-12)) as u64).clamp(1, m);
    let corr: Vec<BigRational> = (0..=k).map(|l| pairwise_correlation(n, k, l, &p, &q)).collect::<Result<_>>()?;
    let classes: Vec<u64> = (0..=k).map(|l| overlap_class_size(n, k, l).map(|c| c.to_u64().unwrap_or(0))).collect::<Result<_>>()?;
    let bound = clique_correlation_bound(n, k, ell + 2);
    // walk sizes 1..=m adding supports in greedy order; track the running sum
    let mut sum = BigRational::zero();
    let mut size = 0u64;
    let mut worst = BigRational::zero();
    let mut holds = true;
    let mut checked = 0u64;
    for lambda in (0..=k).rev() {
        let c = &corr[lambda];
        let avail = classes[lambda];
        if size + avail < min_size {
            sum += c * big(avail);
            size += avail;
            continue;
        }
        // sizes inside this class: the average is monotone along the class
        // (constant increments), so its extremes are at the class endpoints
        let start = min_size.max(size + 1);
        let end = size + avail;
        if start <= end {
            for s in [start, end] {
                let avg = (&sum + c * big(s - size)) / big(s);
                if avg > worst {
                    worst = avg.clone();
                }
                if avg >= bound {
                    holds = false;
                }
            }
            checked += end - start + 1;
        }
        sum += c * big(avail);
        size += avail;
    }
    Ok(AverageBoundCheck {
        n,
        k,
        delta,
        ell,
        min_size,
        sizes_checked: checked,
        worst_average: Scalar::Exact(worst),
        bound: Scalar::Exact(bound),
        holds,
    })
}

/// `|T_j|/|T_{j+1}| ≥ (j + 1)n^{2δ}/2`, with the ratio exact and the right
/// side in double precision.
pub fn overlap_ratio_holds(n: usize, k: usize, delta: f64, j: usize) -> Result<bool> {
    if j + 1 > k {
        return Err(invalid(format!("need j + 1 <= k, got j = {j}, k = {k}")));
    }
    let a = overlap_class_size(n, k, j)?;
    let b = overlap_class_size(n, k, j + 1)?;
    if b.is_zero() {
        return Ok(true);
    }
    let ratio = ratio_to_f64(&BigRational::new(a, b));
    Ok(ratio >= (j + 1) as f64 * libm::pow(n as f64, 2.0 * delta) / 2.0)
}
