//! Acceptance run: one PASS/FAIL line per criterion, each checked against an
//! oracle computed here rather than by the library.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use sqlab_core::algorithms::{detect_by_coordinate_bias, detect_by_subset_enumeration};
use sqlab_core::bits::{IndexSet, Point};
use sqlab_core::dimension::{
    average_correlation, check_average_bound, dense_subgraph_sda_bound, greedy_worst_case_set, pairwise_correlation, query_lower_bound,
    sample_lower_bound, sample_lower_bound_simplified, sd_to_sda, sda_clique_bound, sqdim_bridge, stat_lower_bound_from_sd,
};
use sqlab_core::distributions::{ratio_deviation, ParityDistribution, PlantedDistribution, PointDistribution, ReferenceDistribution};
use sqlab_core::oracles::{estimate_from_samples, tolerance_lower_exact, Backend, OracleSession, OracleSpec, DEFAULT_HONEST_CONSTANT};
use sqlab_core::query::Query;
use sqlab_core::reductions::{
    generate_average_instance_unique, generate_planted_samples, solve_average_via_distributional, solve_distributional_via_average,
    GroundTruthAverageSolver, GroundTruthDistributionalSolver, DEFAULT_DRAW_RETRIES,
};
use sqlab_core::rng::SeedStream;
use sqlab_core::scalar::{ArithmeticMode, Prob, Scalar};
use sqlab_core::simulation::{
    bernoulli_ratio, diagnose, flip_bound_holds, standard_policies, vstat_parameter, AdaptiveAlgorithm, FlipVerdict, ResponseContext,
    SeededAdaptiveAlgorithm,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn int(a: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(a))
}

fn f64_of(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn core(e: sqlab_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

fn masks(n: usize, k: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

fn set_of(n: usize, mask: u32) -> IndexSet {
    IndexSet::from_mask(n, mask as u64)
}

fn random_set(n: usize, k: usize, rng: &mut impl Rng) -> IndexSet {
    IndexSet::new(n, rand::seq::index::sample(rng, n, k).iter()).unwrap()
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

// ----- criterion 1 -----

/// `f(a) = (2r)^a (2(s−r))^{k−a} − s^k`: `s^k` times the likelihood ratio
/// minus one, at `p = r/s`, `q = 1/2`, for a point with `a` ones in the
/// support.
fn deviation_numerators(k: usize, r: i128, s: i128) -> Vec<i128> {
    (0..=k).map(|a| (2 * r).pow(a as u32) * (2 * (s - r)).pow((k - a) as u32) - s.pow(k as u32)).collect()
}

fn correlations() -> Result<Verdict> {
    let mut pairs = 0u64;
    let mut mismatches = 0u64;
    let mut bound_violations = 0u64;
    let mut full = 0u64;
    let mut rng = SeedStream::new(1).rng(0);
    for (r, s) in [(1i64, 1i64), (3, 4)] {
        let p = Prob::from_ratio(r, s).map_err(core)?;
        for n in 1..=14usize {
            for k in 1..=n.min(4) {
                let expected: Vec<BigRational> =
                    (0..=k).map(|l| pairwise_correlation(n, k, l, &p, &Prob::half())).collect::<Result<_, _>>().map_err(core)?;
                let f = deviation_numerators(k, r as i128, s as i128);
                let s2k = BigInt::from(s).pow(2 * k as u32);
                let supports = masks(n, k);
                let scale = |sum: i128, bits: usize| {
                    BigRational::new(BigInt::from((k * k) as i64) * sum, BigInt::from((n * n) as i64) * (&s2k << bits))
                };
                let mut reps: Vec<Vec<(u32, u32)>> = vec![Vec::new(); k + 1];
                for (i, &a) in supports.iter().enumerate() {
                    for &b in &supports[i..] {
                        let u = a | b;
                        let lambda = (a & b).count_ones() as usize;
                        // points outside A ∪ B do not change either deviation
                        let mut sum = 0i128;
                        let mut x = u;
                        loop {
                            sum += f[(x & a).count_ones() as usize] * f[(x & b).count_ones() as usize];
                            if x == 0 {
                                break;
                            }
                            x = (x - 1) & u;
                        }
                        let value = scale(sum, u.count_ones() as usize);
                        pairs += 1;
                        mismatches += (value != expected[lambda]) as u64;
                        if r == s && value > int(1 << lambda) * q((k * k) as i64, (n * n) as i64) {
                            bound_violations += 1;
                        }
                        if reps[lambda].len() < 2 && (reps[lambda].is_empty() || rng.gen_bool(0.01)) {
                            reps[lambda].push((a, b));
                        }
                    }
                }
                // whole-cube enumeration for a couple of pairs per overlap
                for (lambda, list) in reps.iter().enumerate() {
                    for &(a, b) in list {
                        let sum: i128 = (0u32..1 << n).map(|x| f[(x & a).count_ones() as usize] * f[(x & b).count_ones() as usize]).sum();
                        full += 1;
                        mismatches += (scale(sum, n) != expected[lambda]) as u64;
                    }
                }
            }
        }
    }
    verdict(
        mismatches == 0 && bound_violations == 0,
        format!("{pairs} support pairs, {full} whole-cube checks, {mismatches} mismatches, {bound_violations} bound violations"),
    )
}

// ----- criterion 2 -----

fn admissible(n: usize, k: usize, delta: f64) -> bool {
    (k as f64).ln() <= (0.5 - delta) * (n as f64).ln() + 1e-12
}

fn greedy_average_bound() -> Result<Verdict> {
    let deltas = [0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let (mut points, mut sizes, mut violations, mut disagreements, mut sets) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for n in 1..=24usize {
        for k in 1..=n.min(4) {
            let m = binomial(n as u64, k as u64);
            for &delta in &deltas {
                if !admissible(n, k, delta) {
                    continue;
                }
                for ell in 1..=k {
                    points += 1;
                    let threshold = 4.0 * (m - 1) as f64 / (n as f64).powf(2.0 * ell as f64 * delta);
                    let min_size = ((threshold * (1.0 - 1e-12)).ceil() as u128).clamp(1, m);
                    // at p = 1, q = 1/2 an overlap-λ pair has correlation (2^λ − 1)k²/n², so the
                    // average bound reads Σ (2^λ − 1) < 2^{ℓ+2}|A|
                    let cap = 1u128 << (ell + 2);
                    let (mut size, mut sum) = (0u128, 0u128);
                    let mut holds = true;
                    for lambda in (0..=k).rev() {
                        let class = binomial(k as u64, lambda as u64) * binomial((n - k) as u64, (k - lambda) as u64);
                        let w = (1u128 << lambda) - 1;
                        for _ in 0..class {
                            size += 1;
                            sum += w;
                            if size >= min_size {
                                sizes += 1;
                                if sum >= cap * size {
                                    holds = false;
                                }
                            }
                        }
                    }
                    violations += !holds as u64;
                    let lib = check_average_bound(n, k, delta, ell).map_err(core)?;
                    disagreements += (lib.holds != holds || lib.min_size as u128 != min_size) as u64;
                    // the library's greedy set at the threshold size has the same average
                    if n <= 12 {
                        let s = IndexSet::prefix(n, k).map_err(core)?;
                        let a = greedy_worst_case_set(&s, min_size as usize);
                        let avg = average_correlation(&a, n, k, &Prob::one(), &Prob::half(), Some(&s)).map_err(core)?;
                        let mut own = 0u128;
                        for t in &a {
                            own += (1u128 << t.intersection_len(&s)) - 1;
                        }
                        let own = BigRational::new(BigInt::from(own * (k * k) as u128), BigInt::from((n * n) as u128 * min_size));
                        sets += 1;
                        disagreements += (own != avg) as u64;
                    }
                }
            }
        }
    }
    verdict(
        violations == 0 && disagreements == 0,
        format!(
            "{points} (n, k, δ, ℓ) points, {sizes} set sizes, {sets} explicit sets, {violations} violations, {disagreements} disagreements"
        ),
    )
}

// ----- criterion 3 -----

fn detectors() -> Result<Verdict> {
    let (n, k) = (100usize, 10usize);
    let t = (16 * n * n / (k * k)) as u64;
    let seeds = SeedStream::new(3);
    let mut coords = 0;
    for i in 0..100 {
        let mut rng = seeds.child(0).rng(i);
        let plant = random_set(n, k, &mut rng);
        let d: Arc<dyn PointDistribution> = Arc::new(PlantedDistribution::clique(n, plant.clone()).map_err(core)?);
        let mut s = OracleSession::with_rng(OracleSpec::vstat(t).map_err(core)?, Backend::exact(d), rng, ArithmeticMode::Exact)
            .without_transcript();
        coords += (detect_by_coordinate_bias(&mut s, n, k).map_err(core)?.recovered == plant) as u32;
    }
    let (n2, k2, size) = (32usize, 8usize, 5usize);
    let t2 = (25 * n2).div_ceil(k2) as u64;
    let mut subsets = 0;
    let mut stray = 0;
    for i in 0..100 {
        let mut rng = seeds.child(1).rng(i);
        let plant = random_set(n2, k2, &mut rng);
        let d: Arc<dyn PointDistribution> = Arc::new(PlantedDistribution::clique(n2, plant.clone()).map_err(core)?);
        let mut s = OracleSession::with_rng(OracleSpec::vstat(t2).map_err(core)?, Backend::exact(d), rng, ArithmeticMode::Float)
            .without_transcript();
        let out = detect_by_subset_enumeration(&mut s, n2, k2, size).map_err(core)?;
        subsets += (out.recovered == plant) as u32;
        // accepted sets lie inside the plant when the backend is exact
        stray += out.accepted_subsets.iter().flatten().filter(|a| !a.iter().all(|j| plant.contains(*j))).count();
    }
    verdict(
        coords == 100 && subsets == 100 && stray == 0,
        format!(
            "coordinates {coords}/100 at t = {t}; subsets {subsets}/100 at t = {t2}, s = {size}; {stray} accepted sets outside the plant"
        ),
    )
}

// ----- criterion 4 -----

/// Query digests with responses, and the recovered set.
type DetectorView = (Vec<(String, String)>, Vec<usize>);

fn adversarial_blindness() -> Result<Verdict> {
    let (n, k) = (12usize, 3usize);
    let t = (n * n / (2 * k * k)) as u64;
    let mut seen: Option<DetectorView> = None;
    let mut plants = 0;
    let mut differing = 0;
    for mask in masks(n, k) {
        let d = PlantedDistribution::clique(n, set_of(n, mask)).map_err(core)?;
        let reference: Arc<dyn PointDistribution> = Arc::new(d.reference());
        let backend = Backend::adversarial(Arc::new(d), reference).map_err(core)?;
        let mut s = OracleSession::with_rng(OracleSpec::vstat(t).map_err(core)?, backend, SeedStream::new(4).rng(0), ArithmeticMode::Exact);
        let out = detect_by_coordinate_bias(&mut s, n, k).map_err(core)?;
        let view: Vec<(String, String)> = s
            .transcript()
            .iter()
            .map(|r| (r.query_digest.clone(), r.response_exact.clone().unwrap_or_else(|| r.response.to_string())))
            .collect();
        let this = (view, out.recovered.to_vec());
        plants += 1;
        match &seen {
            None => seen = Some(this),
            Some(first) => differing += (first != &this) as u32,
        }
    }
    verdict(plants == 220 && differing == 0, format!("{plants} plants at t = {t}, {differing} transcripts differ from the first"))
}

// ----- criterion 5 -----

struct Laws {
    truth: Vec<BigRational>,
    sim: Vec<BigRational>,
    illegal: u64,
}

/// Exhaustive transcript laws: bit `i` is Bernoulli(`p`) under SAMPLE access
/// and Bernoulli(`p'`) under the simulation, `p'` the policy's answer
/// clamped into `[1/t, 1 − 1/t]`.
fn transcript_laws(
    alg: &dyn AdaptiveAlgorithm,
    points: &[(Point, BigRational, BigRational)],
    policy: &dyn sqlab_core::simulation::ResponsePolicy,
    t: u64,
) -> Laws {
    let m = alg.queries();
    let lo = q(1, t as i64);
    let hi = BigRational::one() - &lo;
    let mut laws = Laws { truth: Vec::new(), sim: Vec::new(), illegal: 0 };
    let mut frontier = vec![(Vec::<bool>::new(), BigRational::one(), BigRational::one())];
    for _ in 0..m {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (prefix, a, b) in frontier {
            let query = alg.query(&prefix);
            let mut p = BigRational::zero();
            let mut p_ref = BigRational::zero();
            for (x, mass, ref_mass) in points {
                if query.evaluate(x) != 0.0 {
                    p += mass;
                    p_ref += ref_mass;
                }
            }
            let ctx = ResponseContext { t, p: &p, reference: Some(&p_ref), prefix: &prefix };
            let raw = policy.respond(&ctx);
            let pp = if raw < lo {
                lo.clone()
            } else if raw > hi {
                hi.clone()
            } else {
                raw
            };
            let d = &pp - &p;
            let tol2 = std::cmp::max(q(1, (t * t) as i64), &p * (BigRational::one() - &p) / int(t as i64));
            laws.illegal += (&d * &d > tol2) as u64;
            for bit in [false, true] {
                let (pa, pb) = if bit { (p.clone(), pp.clone()) } else { (BigRational::one() - &p, BigRational::one() - &pp) };
                let mut z = prefix.clone();
                z.push(bit);
                next.push((z, &a * pa, &b * pb));
            }
        }
        frontier = next;
    }
    for (_, a, b) in frontier {
        laws.truth.push(a);
        laws.sim.push(b);
    }
    laws
}

fn simulation() -> Result<Verdict> {
    let (n, m) = (6usize, 8usize);
    let dp = q(1, 4);
    let t = (m as u64) * 16;
    let lib_t = vstat_parameter(m as u64, &dp).map_err(core)?;
    let chained = num_traits::pow(BigRational::one() + q(2, t as i64), m);
    let (mut cases, mut tv_fail, mut ratio_fail, mut illegal, mut disagree) = (0, 0, 0, 0u64, 0);
    let mut worst_tv = BigRational::zero();
    let mut worst_ratio = BigRational::zero();
    let seeds = SeedStream::new(5);
    for a in 0..20u64 {
        let mut rng = seeds.rng(a);
        let k = rng.gen_range(1..=n);
        let d = PlantedDistribution::clique(n, random_set(n, k, &mut rng)).map_err(core)?;
        let reference = d.reference();
        let points: Vec<(Point, BigRational, BigRational)> = (0..1u64 << n)
            .map(|w| {
                let x = Point::from_word(n, w);
                Ok((x.clone(), d.mass(&x)?, reference.mass(&x)?))
            })
            .collect::<Result<_, sqlab_core::Error>>()
            .map_err(core)?;
        let alg = SeededAdaptiveAlgorithm::new(n, m, seeds.child(a).seed()).map_err(core)?;
        for policy in standard_policies() {
            cases += 1;
            let laws = transcript_laws(&alg, &points, policy.as_ref(), t);
            let tv: BigRational = laws.truth.iter().zip(&laws.sim).map(|(x, y)| (x - y).abs()).sum::<BigRational>() / int(2);
            let ratio: BigRational = laws.truth.iter().zip(&laws.sim).map(|(x, y)| x * x / y).sum();
            tv_fail += (tv > dp) as u32;
            ratio_fail += (ratio > chained) as u32;
            illegal += laws.illegal;
            let lib = diagnose(&alg, &d, Some(&reference), policy.as_ref(), &dp).map_err(core)?;
            disagree += ((lib.tv - f64_of(&tv)).abs() > 1e-12 || (lib.expected_ratio - f64_of(&ratio)).abs() > 1e-12) as u32;
            worst_tv = worst_tv.max(tv);
            worst_ratio = worst_ratio.max(ratio);
        }
    }
    verdict(
        t == lib_t && tv_fail == 0 && ratio_fail == 0 && illegal == 0 && disagree == 0,
        format!(
            "{cases} algorithm-policy cases at t = {t}; max TV {:.6} (bound 0.25), {tv_fail} over; max ratio {:.6} vs (1+2/t)^m = {:.6}, {ratio_fail} over; {illegal} illegal answers; {disagree} library disagreements",
            f64_of(&worst_tv),
            f64_of(&worst_ratio),
            f64_of(&chained)
        ),
    )
}

// ----- criterion 6 -----

fn flip_and_ratio_grids() -> Result<Verdict> {
    let ts = [1u64, 2, 5, 10, 20, 50, 100, 200, 500, 1000];
    let one = BigRational::one();
    let (mut flip_points, mut applicable, mut flip_fail, mut disagree) = (0u64, 0u64, 0u64, 0u64);
    for a in 0..=100i64 {
        for b in 0..=100i64 {
            let t = ts[((a + b) % 10) as usize];
            let (p, pp) = (q(a, 100), q(b, 100));
            flip_points += 1;
            let d2 = (&pp - &p) * (&pp - &p);
            let tol2 = std::cmp::max(q(1, (t * t) as i64), &p * (&one - &p) / int(t as i64));
            let own = if d2 < tol2 {
                FlipVerdict::NotApplicable
            } else {
                applicable += 1;
                let m = std::cmp::min(pp.clone(), &one - &pp);
                if &d2 * int(3 * t as i64) >= m {
                    FlipVerdict::Holds
                } else {
                    flip_fail += 1;
                    FlipVerdict::Fails
                }
            };
            disagree += (flip_bound_holds(&p, &pp, t).map_err(core)? != own) as u64;
        }
    }
    // legal answers inside the band, clamped into [1/t, 1 − 1/t]
    let (mut ratio_points, mut over_two, mut over_golden) = (0u64, 0u64, 0u64);
    let mut worst = 0.0f64;
    let golden = (3.0 + 5f64.sqrt()) / 2.0;
    for &t in &ts {
        let lo = q(1, t as i64);
        let hi = &one - &lo;
        for a in 0..=100i64 {
            let p = q(a, 100);
            let tol = tolerance_lower_exact(t, &p);
            for f in -5..=5i64 {
                let raw = &p + &tol * q(f, 5);
                let pp = if t == 1 {
                    q(1, 2)
                } else if raw < lo {
                    lo.clone()
                } else if raw > hi {
                    hi.clone()
                } else {
                    raw
                };
                let d = &pp - &p;
                let tol2 = std::cmp::max(q(1, (t * t) as i64), &p * (&one - &p) / int(t as i64));
                if &d * &d > tol2 {
                    continue;
                }
                ratio_points += 1;
                let ratio = &p * &p / &pp + (&one - &p) * (&one - &p) / (&one - &pp);
                disagree += (bernoulli_ratio(&p, &pp).map_err(core)? != ratio) as u64;
                let excess = f64_of(&((&ratio - &one) * int(t as i64)));
                worst = worst.max(excess);
                over_two += (ratio > &one + q(2, t as i64)) as u64;
                over_golden += (excess > golden + 1e-12) as u64;
            }
        }
    }
    verdict(
        flip_fail == 0 && over_two == 0 && disagree == 0,
        format!(
            "flip grid {flip_points} points ({applicable} applicable), {flip_fail} violations; ratio grid {ratio_points} legal answers, {over_two} exceed 1 + 2/t (largest t(ratio − 1) = {worst:.6}, {over_golden} exceed (3+√5)/(2t)); {disagree} library disagreements"
        ),
    )
}

// ----- criterion 7 -----

fn honest_estimation() -> Result<Verdict> {
    let t = 100u64;
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, (a, b)) in [(1i64, 20i64), (1, 2), (11, 20)].into_iter().enumerate() {
        let dist = ReferenceDistribution::new(1, Prob::from_ratio(a, b).map_err(core)?).map_err(core)?;
        let p = a as f64 / b as f64;
        let tol = (1.0 / t as f64).max((p * (1.0 - p) / t as f64).sqrt());
        let query = Query::coordinate(0);
        let seeds = SeedStream::new(7).child(i as u64);
        let mut within = 0;
        for trial in 0..1000 {
            let v = estimate_from_samples(&dist, &query, t, 0.01, DEFAULT_HONEST_CONSTANT, &mut seeds.rng(trial)).map_err(core)?.to_f64();
            within += ((v - p).abs() <= tol) as u32;
        }
        pass &= within >= 990;
        parts.push(format!("p = {p}: {within}/1000 within {tol:.5}"));
    }
    verdict(pass, parts.join("; "))
}

// ----- criterion 8 -----

fn binomial_tail(n: usize, k: usize, m: usize) -> f64 {
    let p = q(k as i64, n as i64);
    let r = BigRational::one() - &p;
    let total: BigRational = (m..=n)
        .map(|j| {
            BigRational::from_integer(BigInt::from(binomial(n as u64, j as u64)))
                * num_traits::pow(p.clone(), j)
                * num_traits::pow(r.clone(), n - j)
        })
        .sum();
    f64_of(&total)
}

fn reductions() -> Result<Verdict> {
    let (n, k, trials) = (64usize, 16usize, 500u64);
    let bound = 1.0 - 2.0 * (-(k as f64) / 8.0).exp();
    let seeds = SeedStream::new(8);
    let (mut d2a, mut a2d) = (0u32, 0u32);
    for i in 0..trials {
        let mut rng = seeds.child(0).rng(i);
        let plant = random_set(n, k, &mut rng);
        let s = generate_planted_samples(n, &plant, true, &mut rng).map_err(core)?;
        let out =
            solve_distributional_via_average(&s.matrix, k, &mut GroundTruthAverageSolver, Some(&s.as_plant()), &mut rng).map_err(core)?;
        d2a += (out.success == Some(true)) as u32;
        let mut rng = seeds.child(1).rng(i);
        let inst = generate_average_instance_unique(n, k, &mut rng).map_err(core)?;
        let out = solve_average_via_distributional(&inst, k, &mut GroundTruthDistributionalSolver, DEFAULT_DRAW_RETRIES, &mut rng)
            .map_err(core)?;
        a2d += (out.success == Some(true)) as u32;
    }
    let se = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
    let rate1 = d2a as f64 / trials as f64;
    let rate2 = a2d as f64 / trials as f64;
    let bound2 = bound * bound;
    // the ground-truth solver succeeds exactly when ⌈k/2⌉ rows carry the plant
    let witness = binomial_tail(n, k, k.div_ceil(2));
    let ok1 = rate1 >= bound - 3.0 * se(bound) && (rate1 - witness).abs() <= 3.0 * se(witness).max(1.0 / trials as f64);
    let ok2 = rate2 >= bound2 - 3.0 * se(bound2);
    verdict(
        ok1 && ok2,
        format!(
            "distributional via average {rate1:.3} (lower bound {bound:.4}, {:.1} SE above; exact witness law {witness:.4}); average via distributional {rate2:.3} (lower bound {bound2:.4}, {:.1} SE above)",
            (rate1 - bound) / se(bound),
            (rate2 - bound2) / se(bound2)
        ),
    )
}

// ----- criterion 9 -----

fn chi(c: u64, x: u64) -> i64 {
    if (c & x).count_ones() % 2 == 0 {
        -1
    } else {
        1
    }
}

fn parity_structure() -> Result<Verdict> {
    let (mut checks, mut bad) = (0u64, 0u64);
    for n in 1..=10usize {
        let size = 1u64 << n;
        for c in 1..size {
            for target in [1i8, -1] {
                let d = ParityDistribution::new(Point::from_word(n, c), target).map_err(core)?;
                let support: Vec<u64> = (0..size).filter(|&x| chi(c, x) == target as i64).collect();
                for cp in 1..size {
                    let sum: i64 = support.iter().map(|&x| chi(cp, x)).sum();
                    let direct = q(sum, support.len() as i64);
                    let expected = if cp == c { int(target as i64) } else { BigRational::zero() };
                    let lib = d.closed_form(&Query::parity(Point::from_word(n, cp))).map_err(core)?;
                    checks += 1;
                    bad += (direct != expected || lib.as_ref() != Some(&direct)) as u64;
                }
                if n <= 5 {
                    for cp in 0..size {
                        let lib = d.brute_force_expectation(&Query::parity(Point::from_word(n, cp))).map_err(core)?;
                        let sum: i64 = support.iter().map(|&x| chi(cp, x)).sum();
                        checks += 1;
                        bad += (lib != q(sum, support.len() as i64)) as u64;
                    }
                }
            }
        }
    }
    // ratio deviations of the +1 family against uniform, as sign bitsets
    let mut gram_bad = 0u64;
    let mut family = 0u64;
    for n in 1..=10usize {
        let size = 1u64 << n;
        let u = ReferenceDistribution::uniform(n).map_err(core)?;
        let words = (size as usize).div_ceil(64);
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for c in 1..size {
            let d = ParityDistribution::new(Point::from_word(n, c), 1).map_err(core)?;
            let mut row = vec![0u64; words];
            for x in 0..size {
                let v = ratio_deviation(&d, &u, &Point::from_word(n, x)).map_err(core)?;
                if v == int(1) {
                    row[(x / 64) as usize] |= 1 << (x % 64);
                } else if v != int(-1) {
                    gram_bad += 1;
                }
            }
            rows.push(row);
        }
        family = rows.len() as u64;
        for (i, a) in rows.iter().enumerate() {
            for (j, b) in rows.iter().enumerate() {
                let differ: u64 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as u64).sum();
                let inner = size as i64 - 2 * differ as i64;
                checks += 1;
                gram_bad += (inner != if i == j { size as i64 } else { 0 }) as u64;
            }
        }
    }
    verdict(
        bad == 0 && gram_bad == 0,
        format!("{checks} checks, {bad} expectation mismatches, {gram_bad} correlation mismatches; family of {family} at n = 10"),
    )
}

// ----- criterion 10 -----

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
}

fn exact_eq(s: &Scalar, r: &BigRational) -> bool {
    s.exact() == Some(r)
}

fn calculators() -> Result<Verdict> {
    let mut failed: Vec<&str> = Vec::new();
    let mut check = |ok: bool, name: &'static str| {
        if !ok {
            failed.push(name);
        }
    };
    let e = sda_clique_bound(1 << 20, 1 << 8, &q(1, 10), 5).map_err(core)?;
    check(exact_eq(&e.d, &int(1 << 18)), "sdaClique d");
    check(exact_eq(&e.gamma_bar, &q(1, 1 << 17)), "sdaClique gammaBar");
    check(e.vstat_param.as_ref().is_some_and(|v| exact_eq(v, &q(1 << 17, 3))), "sdaClique vstat");
    let e = sda_clique_bound(100, 5, &q(15, 100), 1).map_err(core)?;
    check(close(e.d.to_f64(), 100f64.powf(0.3) / 4.0) && (e.d.to_f64() - 0.995).abs() < 5e-4, "sdaClique sub-1 d");

    check(query_lower_bound(&int(1000), &int(1), &int(0)).map_err(core)? == int(1000), "queryLowerBound δ = 1");
    check(query_lower_bound(&int(1000), &q(1, 2), &q(1, 3)).map_err(core)? == int(250), "queryLowerBound");
    let sb = sample_lower_bound(&int(400), &q(1, 1000), &q(2, 3), &q(1, 6)).map_err(core)?;
    check(sb == q(125, 6), "sampleLowerBound");
    let simple = sample_lower_bound_simplified(&int(400), &q(1, 1000));
    check(simple == q(125, 6) && sb >= simple, "sampleLowerBound simplified");

    check(stat_lower_bound_from_sd(&int(511), &int(0), &int(1), &q(1, 8)).map_err(core)? == q(511, 64), "statLowerBoundFromSd");
    check(close(f64_of(&q(511, 64)), 7.984375), "statLowerBoundFromSd value");
    check(stat_lower_bound_from_sd(&int(7), &int(0), &int(1), &int(1)).map_err(core)? == int(7), "statLowerBoundFromSd τ² = β");
    // m = 8, γ = m^{−2/3}/2, τ = m^{−1/3}: the formula gives 8/7, at least m^{1/3}/2 = 1
    let cor = stat_lower_bound_from_sd(&int(8), &q(1, 8), &int(1), &q(1, 2)).map_err(core)?;
    check(cor == q(8, 7) && cor >= int(1), "statLowerBoundFromSd corollary");

    let v = sd_to_sda(&int(100), &q(1, 100), &int(1), &q(2, 100)).map_err(core)?;
    check(v == q(100, 99) && close(f64_of(&v), 1.01010101010101), "sdToSda");
    check(sd_to_sda(&int(100), &q(1, 100), &int(1), &int(1)).map_err(core)? == int(100), "sdToSda γ' = β");

    let dense = dense_subgraph_sda_bound(1000, 10, &q(1, 10), 4, &Prob::from_ratio(3, 5).map_err(core)?, &Prob::half()).map_err(core)?;
    let want = 2e-4 * (1.04f64.powi(5) - 1.0);
    check(close(dense.estimate.gamma_bar.to_f64(), want) && (want - 4.333e-5).abs() < 1e-8, "denseSubgraph gammaBar");
    let flat = dense_subgraph_sda_bound(1000, 10, &q(1, 10), 4, &Prob::half(), &Prob::half()).map_err(core)?;
    check(flat.estimate.gamma_bar.to_f64() == 0.0 && !flat.estimate.flags.is_empty(), "denseSubgraph p = q");
    for ell in 1..=8usize {
        let clique = sda_clique_bound(1 << 20, 1 << 8, &q(1, 10), ell).map_err(core)?;
        let dense = dense_subgraph_sda_bound(1 << 20, 1 << 8, &q(1, 10), ell, &Prob::one(), &Prob::half()).map_err(core)?;
        let factor = int(2) * (int(1 << (ell + 1)) - int(1));
        let ok = match &dense.specialization {
            Some((a, b)) => exact_eq(a, &factor) && exact_eq(b, &int(1 << (ell + 2))) && factor <= int(1 << (ell + 2)),
            None => false,
        };
        check(ok, "specialization factor");
        check(dense.estimate.gamma_bar.to_f64() <= clique.gamma_bar.to_f64() && dense.estimate.d == clique.d, "specialization γ̄ and d");
    }

    let b = sqdim_bridge(&int(1000)).map_err(core)?;
    check(exact_eq(&b.sd_lower_bound, &q(8000, 9)) && close(b.sd_lower_bound.to_f64(), 888.888888888889), "sqdim sd");
    check(close(b.query_bound.to_f64(), 8.0) && close(b.randomized_query_bound.to_f64(), 3.0) && !b.vacuous, "sqdim queries");
    let b = sqdim_bridge(&int(8)).map_err(core)?;
    check(b.sd_lower_bound.to_f64() == 0.0 && b.vacuous, "sqdim vacuous");
    let n_failed = failed.len();
    verdict(
        n_failed == 0,
        if n_failed == 0 { "all worked examples reproduced".to_string() } else { format!("mismatched: {}", failed.join(", ")) },
    )
}

/// Number, time limit in seconds, name and check.
type Criterion = (u32, f64, &'static str, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, 60.0, "correlation exactness", correlations),
        (2, 120.0, "greedy average bound", greedy_average_bound),
        (3, 120.0, "detector upper bounds", detectors),
        (4, 10.0, "adversarial blindness", adversarial_blindness),
        (5, 60.0, "simulation transcript laws", simulation),
        (6, 5.0, "flip and ratio grids", flip_and_ratio_grids),
        (7, 30.0, "honest estimation", honest_estimation),
        (8, 300.0, "reduction round trips", reductions),
        (9, 30.0, "parity structure", parity_structure),
        (10, 1.0, "calculator examples", calculators),
    ];
    let mut all = true;
    for (id, limit, name, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run);
        let elapsed = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(Ok(v)) => (v.pass, v.detail),
            Ok(Err(e)) => (false, format!("error: {e:#}")),
            Err(_) => (false, "panicked".to_string()),
        };
        let pass = pass && elapsed <= limit;
        all &= pass;
        println!("criterion {id}: {} {name} ({detail}; {elapsed:.2} s, limit {limit} s)", if pass { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
