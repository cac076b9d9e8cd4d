//! Exact-arithmetic invariant suites behind `sqlab verify`.

use std::collections::HashMap;
use std::time::Instant;

use anyhow::{anyhow, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sqlab_core::bits::{subset_masks, IndexSet, Point};
use sqlab_core::dimension::{check_average_bound, clique_correlation_bound, overlap_ratio_holds, pairwise_correlation};
use sqlab_core::distributions::{ratio_deviation, ParityDistribution, PlantedDistribution, PointDistribution, ReferenceDistribution};
use sqlab_core::oracles::{clamp_vstat_exact, vstat_accepts};
use sqlab_core::query::Query;
use sqlab_core::reductions::{
    generate_average_instance_unique, generate_planted_samples, solve_average_via_distributional, solve_distributional_via_average,
    GroundTruthAverageSolver, GroundTruthDistributionalSolver, DEFAULT_DRAW_RETRIES,
};
use sqlab_core::rng::SeedStream;
use sqlab_core::scalar::{ratio, Prob};
use sqlab_core::simulation::{
    bernoulli_ratio, diagnose, expected_ratio, flip_bound_holds, standard_policies, transcript_distribution, FlipVerdict, Law,
    SeededAdaptiveAlgorithm,
};

/// Per-query ratio constant that legal VSTAT answers actually satisfy:
/// `sup t(ratio − 1) = (3 + √5)/2 < 131/50`.
pub const RATIO_CONSTANT: (i64, i64) = (131, 50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Distributions,
    Correlations,
    Simulation,
    Lemma5,
    Reductions,
    Parity,
    All,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => {
                vec![Suite::Distributions, Suite::Correlations, Suite::Simulation, Suite::Lemma5, Suite::Reductions, Suite::Parity]
            }
            s => vec![s],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteResult {
    pub suite: Suite,
    pub checks: u64,
    pub violations: u64,
    pub pass: bool,
    pub seconds: f64,
    pub detail: Value,
}

pub fn run_suite(suite: Suite, nmax: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    suite
        .expand()
        .into_iter()
        .map(|s| {
            let start = Instant::now();
            let (checks, violations, detail) = match s {
                Suite::Distributions => distributions(nmax, seed)?,
                Suite::Correlations => correlations(nmax)?,
                Suite::Simulation => simulation(seed)?,
                Suite::Lemma5 => flip_and_ratio()?,
                Suite::Reductions => reductions(seed)?,
                Suite::Parity => parity(nmax)?,
                Suite::All => unreachable!("expanded above"),
            };
            Ok(SuiteResult { suite: s, checks, violations, pass: violations == 0, seconds: start.elapsed().as_secs_f64(), detail })
        })
        .collect()
}

fn core_err(e: sqlab_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

type Tally = (u64, u64, Value);

fn distributions(nmax: usize, seed: u64) -> Result<Tally> {
    let seeds = SeedStream::new(seed);
    let pqs = [(ratio(1, 1), ratio(1, 2)), (ratio(3, 4), ratio(1, 2)), (ratio(3, 5), ratio(1, 2)), (ratio(9, 10), ratio(1, 4))];
    let results: Vec<(u64, u64)> = (1..=nmax.min(10))
        .into_par_iter()
        .map(|n| -> Result<(u64, u64)> {
            let mut rng = seeds.rng(n as u64);
            let (mut checks, mut bad) = (0u64, 0u64);
            for (p, q) in &pqs {
                let k = rng.gen_range(1..=n);
                let plant = IndexSet::new(n, rand::seq::index::sample(&mut rng, n, k).iter()).map_err(core_err)?;
                let d = PlantedDistribution::new(
                    n,
                    plant,
                    Prob::from_rational(p.clone()).map_err(core_err)?,
                    Prob::from_rational(q.clone()).map_err(core_err)?,
                )
                .map_err(core_err)?;
                let total: BigRational = (0..1u64 << n)
                    .map(|x| d.mass(&Point::from_word(n, x)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(core_err)?
                    .into_iter()
                    .sum();
                checks += 1;
                bad += !total.is_one() as u64;
                for _ in 0..8 {
                    let mask = rng.gen_range(0..1u64 << n);
                    for query in [
                        Query::coordinate(rng.gen_range(0..n)),
                        Query::conjunction(IndexSet::from_mask(n, mask)),
                        Query::parity(Point::from_word(n, mask)),
                    ] {
                        let closed = d.closed_form(&query).map_err(core_err)?;
                        let brute = d.brute_force_expectation(&query).map_err(core_err)?;
                        checks += 1;
                        bad += (closed.as_ref() != Some(&brute)) as u64;
                    }
                }
            }
            Ok((checks, bad))
        })
        .collect::<Result<_>>()?;
    let checks = results.iter().map(|r| r.0).sum();
    let bad = results.iter().map(|r| r.1).sum();
    Ok((checks, bad, json!({ "nmax": nmax.min(10) })))
}

/// `(2r)^a (2(s − r))^{k−a} − s^k` for `p = r/s`, `q = 1/2`: the planted
/// likelihood ratio on `S` minus one, scaled by `s^k`.
fn scaled_deviation(r: i128, s: i128, k: usize) -> Vec<i128> {
    (0..=k).map(|a| (2 * r).pow(a as u32) * (2 * (s - r)).pow((k - a) as u32) - s.pow(k as u32)).collect()
}

/// Every pair of size-`k` supports over `[n]`, each evaluated by summing over
/// the union of the two supports only. Returns the number of pairs checked and
/// the number disagreeing with the closed form.
pub fn correlation_pairs_agree(n: usize, k: usize, r: i64, s: i64) -> Result<(u64, u64)> {
    let p = Prob::from_ratio(r, s).map_err(core_err)?;
    let q = Prob::half();
    let f = scaled_deviation(r as i128, s as i128, k);
    let masks: Vec<u64> = subset_masks(n, k).collect();
    let mut classes: HashMap<(usize, u32, i128), u64> = HashMap::new();
    for (i, &a) in masks.iter().enumerate() {
        for &b in &masks[i..] {
            let u = a | b;
            let mut sum = 0i128;
            // sub-masks of the union
            let mut x = u;
            loop {
                sum += f[(x & a).count_ones() as usize] * f[(x & b).count_ones() as usize];
                if x == 0 {
                    break;
                }
                x = (x - 1) & u;
            }
            *classes.entry(((a & b).count_ones() as usize, u.count_ones(), sum)).or_default() += 1;
        }
    }
    let (mut checks, mut bad) = (0, 0);
    for ((lambda, u, sum), count) in classes {
        let closed = pairwise_correlation(n, k, lambda, &p, &q).map_err(core_err)?;
        let denom = BigInt::from(n * n) * (BigInt::one() << u) * num_traits::pow(BigInt::from(s), 2 * k);
        let direct = BigRational::new(BigInt::from(k * k) * BigInt::from(sum), denom);
        checks += count;
        if closed != direct {
            bad += count;
        }
    }
    Ok((checks, bad))
}

fn correlations(nmax: usize) -> Result<Tally> {
    let top = nmax.min(14);
    let jobs: Vec<(usize, usize, i64, i64)> = (1..=top)
        .flat_map(|n| (1..=4.min(n)).flat_map(move |k| [(1, 1), (3, 4), (3, 5)].into_iter().map(move |(r, s)| (n, k, r, s))))
        .collect();
    let pairs: Vec<(u64, u64)> = jobs.par_iter().map(|&(n, k, r, s)| correlation_pairs_agree(n, k, r, s)).collect::<Result<_>>()?;
    let mut checks: u64 = pairs.iter().map(|p| p.0).sum();
    let mut bad: u64 = pairs.iter().map(|p| p.1).sum();
    let pair_checks = checks;

    // full point enumeration for one pair per overlap
    for n in 2..=top.min(10) {
        for k in 1..=4.min(n / 2) {
            let a = IndexSet::prefix(n, k).map_err(core_err)?;
            for lambda in 0..=k {
                let b = IndexSet::new(n, k - lambda..2 * k - lambda).map_err(core_err)?;
                let da = PlantedDistribution::clique(n, a.clone()).map_err(core_err)?;
                let db = PlantedDistribution::clique(n, b).map_err(core_err)?;
                let reference = da.reference();
                let mut e = BigRational::zero();
                for x in 0..1u64 << n {
                    let x = Point::from_word(n, x);
                    e += reference.mass(&x).map_err(core_err)?
                        * ratio_deviation(&da, &reference, &x).map_err(core_err)?
                        * ratio_deviation(&db, &reference, &x).map_err(core_err)?;
                }
                let closed = pairwise_correlation(n, k, lambda, &Prob::one(), &Prob::half()).map_err(core_err)?;
                checks += 2;
                bad += (e != closed) as u64 + (closed > clique_correlation_bound(n, k, lambda)) as u64;
            }
        }
    }

    // average-correlation bound over greedy worst-case sets, and the class ratios
    let mut greedy = 0u64;
    for n in 2..=24usize {
        for k in 1..=4.min(n) {
            let dmax = 0.5 - (k as f64).ln() / (n as f64).ln();
            for i in 1..=10 {
                let delta = (dmax * i as f64 / 10.0).min(0.499);
                if delta <= 0.0 {
                    continue;
                }
                for ell in 1..=k {
                    checks += 1;
                    greedy += 1;
                    bad += !check_average_bound(n, k, delta, ell).map_err(core_err)?.holds as u64;
                }
                if n + 2 >= 4 * k {
                    for j in 0..k {
                        checks += 1;
                        bad += !overlap_ratio_holds(n, k, delta, j).map_err(core_err)? as u64;
                    }
                }
            }
        }
    }
    Ok((checks, bad, json!({ "nmax": top, "pairChecks": pair_checks, "greedyChecks": greedy })))
}

fn simulation(seed: u64) -> Result<Tally> {
    let n = 6;
    let dp = ratio(1, 4);
    let c = ratio(RATIO_CONSTANT.0, RATIO_CONSTANT.1);
    let seeds = SeedStream::new(seed);
    let outcomes: Vec<(u64, u64, u64)> = (0..20u64)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64, u64)> {
            let mut rng = seeds.rng(i);
            let k = rng.gen_range(1..=n);
            let plant = IndexSet::new(n, rand::seq::index::sample(&mut rng, n, k).iter()).map_err(core_err)?;
            let d = PlantedDistribution::clique(n, plant).map_err(core_err)?;
            let reference = d.reference();
            let alg = SeededAdaptiveAlgorithm::new(n, 8, seeds.child(1).seed() ^ i).map_err(core_err)?;
            let (mut checks, mut bad, mut over_two) = (0, 0, 0);
            for policy in standard_policies() {
                let diag = diagnose(&alg, &d, Some(&reference), policy.as_ref(), &dp).map_err(core_err)?;
                checks += 2;
                bad += !diag.pass as u64;
                over_two += !diag.ratio_pass as u64;
                let truth = transcript_distribution(&alg, &d, Some(&reference), Law::Sample).map_err(core_err)?;
                let sim = transcript_distribution(&alg, &d, Some(&reference), Law::Simulated { t: diag.t, policy: policy.as_ref() })
                    .map_err(core_err)?;
                let corrected = num_traits::pow(BigRational::one() + &c / BigRational::from_integer(BigInt::from(diag.t)), diag.m);
                bad += (expected_ratio(&truth, &sim).map_err(core_err)? > corrected) as u64;
            }
            Ok((checks, bad, over_two))
        })
        .collect::<Result<_>>()?;
    let over_two: u64 = outcomes.iter().map(|o| o.2).sum();
    Ok((outcomes.iter().map(|o| o.0).sum(), outcomes.iter().map(|o| o.1).sum(), json!({ "ratioAboveTwoOverT": over_two })))
}

/// The `10⁴`-point grid: `p` and `p'` in steps of 1/100, `t` in a fixed list.
pub fn flip_grid() -> impl Iterator<Item = (BigRational, BigRational, u64)> {
    [1u64, 2, 10, 100, 1000].into_iter().flat_map(|t| {
        (0..=100i64)
            .flat_map(move |a| (0..=100i64).filter(move |b| (a + b + t as i64) % 5 == 0).map(move |b| (ratio(a, 100), ratio(b, 100), t)))
    })
}

fn flip_and_ratio() -> Result<Tally> {
    let (mut checks, mut bad) = (0u64, 0u64);
    let mut applicable = 0u64;
    for (p, pp, t) in flip_grid() {
        checks += 1;
        match flip_bound_holds(&p, &pp, t).map_err(core_err)? {
            FlipVerdict::Fails => bad += 1,
            FlipVerdict::Holds => applicable += 1,
            FlipVerdict::NotApplicable => {}
        }
    }
    // ratio for every legal answer on the band edges and inside it
    let c = ratio(RATIO_CONSTANT.0, RATIO_CONSTANT.1);
    let mut above_two = 0u64;
    let mut legal = 0u64;
    for t in [2u64, 10, 100, 1000] {
        let tr = BigRational::from_integer(BigInt::from(t));
        for a in 0..=100i64 {
            let p = ratio(a, 100);
            let tol = sqlab_core::oracles::tolerance_lower_exact(t, &p);
            for f in -10..=10i64 {
                let pp = clamp_vstat_exact(t, &(&p + &tol * ratio(f, 10)));
                if !vstat_accepts(t, &p, &pp) {
                    continue;
                }
                legal += 1;
                checks += 1;
                let r = bernoulli_ratio(&p, &pp).map_err(core_err)?;
                bad += (r > BigRational::one() + &c / &tr) as u64;
                above_two += (r > BigRational::one() + ratio(2, 1) / &tr) as u64;
            }
        }
    }
    Ok((checks, bad, json!({ "flipApplicable": applicable, "legalAnswers": legal, "ratioAboveTwoOverT": above_two })))
}

fn reductions(seed: u64) -> Result<Tally> {
    let seeds = SeedStream::new(seed);
    let (n, k) = (64usize, 16usize);
    let outcomes: Vec<(u64, u64)> = (0..100u64)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64)> {
            let mut rng = seeds.rng(i);
            let plant = IndexSet::new(n, rand::seq::index::sample(&mut rng, n, k).iter()).map_err(core_err)?;
            let s = generate_planted_samples(n, &plant, true, &mut rng).map_err(core_err)?;
            let before = s.matrix.clone();
            let a = solve_distributional_via_average(&s.matrix, k, &mut GroundTruthAverageSolver, Some(&s.as_plant()), &mut rng)
                .map_err(core_err)?;
            let expect = 2 * s.witness_rows.len() >= k;
            let inst = generate_average_instance_unique(n, k, &mut rng).map_err(core_err)?;
            let b = solve_average_via_distributional(&inst, k, &mut GroundTruthDistributionalSolver, DEFAULT_DRAW_RETRIES, &mut rng)
                .map_err(core_err)?;
            let bad = (a.success != Some(expect)) as u64 + (s.matrix != before) as u64 + (b.success != Some(true)) as u64;
            Ok((3, bad))
        })
        .collect::<Result<_>>()?;
    Ok((outcomes.iter().map(|o| o.0).sum(), outcomes.iter().map(|o| o.1).sum(), json!({ "n": n, "k": k, "trials": 100 })))
}

fn parity(nmax: usize) -> Result<Tally> {
    let top = nmax.min(10);
    let results: Vec<(u64, u64)> = (1..=top)
        .into_par_iter()
        .map(|n| -> Result<(u64, u64)> {
            let (mut checks, mut bad) = (0u64, 0u64);
            let size = 1u64 << n;
            let chi = |c: u64, x: u64| if (c & x).count_ones() % 2 == 0 { -1i64 } else { 1 };
            for c in 1..size {
                for target in [1i8, -1] {
                    let d = ParityDistribution::new(Point::from_word(n, c), target).map_err(core_err)?;
                    let support: Vec<u64> = (0..size).filter(|&x| chi(c, x) == target as i64).collect();
                    for cp in 0..size {
                        let sum: i64 = support.iter().map(|&x| chi(cp, x)).sum();
                        let direct = BigRational::new(BigInt::from(sum), BigInt::from(support.len()));
                        let closed = d.closed_form(&Query::parity(Point::from_word(n, cp))).map_err(core_err)?;
                        let expect = if cp == 0 {
                            -BigRational::one()
                        } else if cp == c {
                            BigRational::from_integer(BigInt::from(target))
                        } else {
                            BigRational::zero()
                        };
                        checks += 1;
                        bad += (closed.as_ref() != Some(&direct) || direct != expect) as u64;
                    }
                }
                // orthogonality under the uniform distribution
                for cp in 1..size {
                    let s: i64 = (0..size).map(|x| chi(c, x) * chi(cp, x)).sum();
                    checks += 1;
                    bad += (s != if c == cp { size as i64 } else { 0 }) as u64;
                }
            }
            Ok((checks, bad))
        })
        .collect::<Result<_>>()?;
    let (mut checks, mut bad): (u64, u64) = (results.iter().map(|r| r.0).sum(), results.iter().map(|r| r.1).sum());
    // ratio deviations relative to uniform are ±χ_c, so the family has cross
    // correlation 0 and self correlation 1
    for n in 1..=top.min(6) {
        let u = ReferenceDistribution::uniform(n).map_err(core_err)?;
        let dev: Vec<Vec<BigRational>> = (1..1u64 << n)
            .map(|c| {
                let d = ParityDistribution::new(Point::from_word(n, c), 1)?;
                (0..1u64 << n).map(|x| ratio_deviation(&d, &u, &Point::from_word(n, x))).collect()
            })
            .collect::<Result<_, _>>()
            .map_err(core_err)?;
        let w = ratio(1, 1 << n);
        for (i, a) in dev.iter().enumerate() {
            for (j, b) in dev.iter().enumerate() {
                let ip: BigRational = a.iter().zip(b).map(|(x, y)| x * y).sum::<BigRational>() * &w;
                checks += 1;
                bad += (ip != if i == j { BigRational::one() } else { BigRational::zero() }) as u64;
            }
        }
    }
    Ok((checks, bad, json!({ "nmax": top, "familySize": (1u64 << top) - 1 })))
}
