use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::RngCore;
use sqlab_core::bits::{IndexSet, Point};
use sqlab_core::distributions::{ratio_deviation, ParityDistribution, PlantedDistribution, PointDistribution, ReferenceDistribution};
use sqlab_core::query::{Query, Table};
use sqlab_core::rng::SeedStream;
use sqlab_core::scalar::Prob;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn r(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// Mass of `x` under the planted mixture, written out from the definition.
fn planted_mass(n: usize, plant: u64, p: &BigRational, q: &BigRational, x: u64) -> BigRational {
    let one = BigRational::one();
    let k = plant.count_ones() as i64;
    let w = r(k, n as i64);
    let mut background = one.clone();
    let mut planted = one.clone();
    for i in 0..n {
        let bit = x >> i & 1 == 1;
        let bq = if bit { q.clone() } else { &one - q };
        background *= &bq;
        planted *= if plant >> i & 1 == 1 {
            if bit {
                p.clone()
            } else {
                &one - p
            }
        } else {
            bq
        };
    }
    (&one - &w) * background + w * planted
}

fn probs() -> impl Strategy<Value = (BigRational, BigRational)> {
    prop_oneof![
        Just((r(1, 1), r(1, 2))),
        Just((r(3, 4), r(1, 2))),
        Just((r(3, 5), r(1, 2))),
        Just((r(1, 2), r(1, 3))),
        Just((r(2, 3), r(2, 3))),
        Just((r(9, 10), r(1, 4))),
    ]
}

fn planted() -> impl Strategy<Value = (usize, u64, BigRational, BigRational)> {
    (1usize..=8).prop_flat_map(|n| (Just(n), 1u64..(1u64 << n), probs()).prop_map(|(n, m, (p, q))| (n, m, p, q)))
}

fn make(n: usize, mask: u64, p: &BigRational, q: &BigRational) -> PlantedDistribution {
    PlantedDistribution::new(
        n,
        IndexSet::from_mask(n, mask),
        Prob::from_rational(p.clone()).unwrap(),
        Prob::from_rational(q.clone()).unwrap(),
    )
    .unwrap()
}

fn query_for(n: usize, kind: u8, mask: u64, seed: u64) -> Query {
    match kind % 4 {
        0 => Query::coordinate((mask as usize) % n),
        1 => Query::conjunction(IndexSet::from_mask(n, mask)),
        2 => Query::parity(Point::from_word(n, mask)),
        _ => {
            let mut rng = SeedStream::new(seed).rng(0);
            let values = (0..1u64 << n).map(|_| (rng.next_u32() % 5) as f64 / 4.0).collect();
            Query::Tabulated(Table::new(n, values).unwrap())
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn masses_match_definition_and_sum_to_one((n, mask, p, q) in planted()) {
        let d = make(n, mask, &p, &q);
        let mut total = BigRational::zero();
        for x in 0..1u64 << n {
            let m = d.mass(&Point::from_word(n, x)).unwrap();
            prop_assert_eq!(&m, &planted_mass(n, mask, &p, &q, x));
            total += m;
        }
        prop_assert!(total.is_one());
    }

    #[test]
    fn ratio_identity((n, mask, p, q) in planted(), kind in 0u8..4, qmask in 0u64..256, seed in any::<u64>()) {
        let d = make(n, mask, &p, &q);
        let reference = d.reference();
        let query = query_for(n, kind, qmask & ((1 << n) - 1), seed);
        let mut lhs = BigRational::zero();
        for x in 0..1u64 << n {
            let x = Point::from_word(n, x);
            lhs += reference.mass(&x).unwrap() * ratio_deviation(&d, &reference, &x).unwrap() * query.evaluate_exact(&x);
        }
        let rhs = d.brute_force_expectation(&query).unwrap() - reference.brute_force_expectation(&query).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn closed_form_equals_enumeration((n, mask, p, q) in planted(), kind in 0u8..3, qmask in 0u64..256) {
        let d = make(n, mask, &p, &q);
        let query = query_for(n, kind, qmask & ((1 << n) - 1), 0);
        let direct: BigRational = (0..1u64 << n)
            .map(|x| planted_mass(n, mask, &p, &q, x) * query.evaluate_exact(&Point::from_word(n, x)))
            .sum();
        prop_assert_eq!(d.closed_form(&query).unwrap().unwrap(), direct.clone());
        prop_assert_eq!(d.brute_force_expectation(&query).unwrap(), direct.clone());
        let reference = d.reference();
        let rdirect: BigRational = (0..1u64 << n)
            .map(|x| {
                let x = Point::from_word(n, x);
                reference.mass(&x).unwrap() * query.evaluate_exact(&x)
            })
            .sum();
        prop_assert_eq!(reference.closed_form(&query).unwrap().unwrap(), rdirect);
        let f = d.closed_form_f64(&query).unwrap().unwrap();
        prop_assert!((f - sqlab_core::scalar::ratio_to_f64(&direct)).abs() < 1e-12);
    }

    #[test]
    fn parity_distribution_closed_form(n in 1usize..=7, c in 1u64..128, c2 in 0u64..128, plus in any::<bool>(), kind in 0u8..3) {
        let c = c & ((1 << n) - 1);
        prop_assume!(c != 0);
        let d = ParityDistribution::new(Point::from_word(n, c), if plus { 1 } else { -1 }).unwrap();
        let query = query_for(n, kind, c2 & ((1 << n) - 1), 0);
        prop_assert_eq!(d.closed_form(&query).unwrap().unwrap(), d.brute_force_expectation(&query).unwrap());
    }

    #[test]
    fn conjunction_off_plant_is_small(n in 4usize..=12, seed in any::<u64>()) {
        // |T| ≥ log₂ n and T ⊄ S at p = 1, q = 1/2
        let mut rng = SeedStream::new(seed).rng(0);
        let k = 1 + (rng.next_u32() as usize) % n;
        let s = IndexSet::new(n, rand::seq::index::sample(&mut rng, n, k).iter()).unwrap();
        let size = (usize::BITS - (n - 1).leading_zeros()) as usize;
        let t = IndexSet::new(n, rand::seq::index::sample(&mut rng, n, size).iter()).unwrap();
        prop_assume!(!t.is_subset_of(&s));
        let d = PlantedDistribution::clique(n, s).unwrap();
        let e = d.closed_form(&Query::conjunction(t)).unwrap().unwrap();
        prop_assert!(e <= r(k as i64, 2 * n as i64) + r(1, n as i64));
    }
}

#[test]
fn normalization_at_the_enumeration_limit() {
    // n = 20 via exact class counts, n = 16 point by point
    let half = Prob::half();
    for (p, q) in [(Prob::one(), half.clone()), (Prob::from_ratio(3, 4).unwrap(), Prob::from_ratio(1, 3).unwrap())] {
        let n = 20;
        let k = 5;
        let d = PlantedDistribution::new(n, IndexSet::prefix(n, k).unwrap(), p.clone(), q.clone()).unwrap();
        let mut total = BigRational::zero();
        for a in 0..=k {
            for b in 0..=n - k {
                let count =
                    num_integer::binomial(BigInt::from(k), BigInt::from(a)) * num_integer::binomial(BigInt::from(n - k), BigInt::from(b));
                total += BigRational::from_integer(count) * d.mass_by_counts(a, b);
            }
        }
        assert!(total.is_one());
    }
    let n = 16;
    let d = PlantedDistribution::clique(n, IndexSet::new(n, [1, 4, 9, 15]).unwrap()).unwrap();
    let total: BigRational = (0..1u64 << n).map(|x| d.mass(&Point::from_word(n, x)).unwrap()).sum();
    assert!(total.is_one());
    let u = ReferenceDistribution::uniform(n).unwrap();
    let total: BigRational = (0..1u64 << n).map(|x| u.mass(&Point::from_word(n, x)).unwrap()).sum();
    assert!(total.is_one());
    let c = ParityDistribution::new(Point::from_word(n, 0b1011), -1).unwrap();
    let total: BigRational = (0..1u64 << n).map(|x| c.mass(&Point::from_word(n, x)).unwrap()).sum();
    assert!(total.is_one());
}

#[test]
fn full_plant_is_the_point_mass_mixture() {
    let n = 6;
    let d = PlantedDistribution::clique(n, IndexSet::full(n)).unwrap();
    assert!(d.mix_weight().is_one());
    assert!(d.mass(&Point::ones(n)).unwrap().is_one());
    assert!(d.mass(&Point::zeros(n)).unwrap().is_zero());
}

#[test]
fn parity_orthogonality_under_uniform() {
    for n in 1..=12usize {
        let points: Vec<Point> = (0..1u64 << n).map(|x| Point::from_word(n, x)).collect();
        let chi = |c: u64, x: &Point| if Point::from_word(n, c).dot_parity(x) { 1i64 } else { -1 };
        // all pairs for small n, a stride of pairs above
        let step = if n <= 8 { 1 } else { 37 };
        for c in (1..1u64 << n).step_by(step) {
            for c2 in (1..1u64 << n).step_by(step) {
                let s: i64 = points.iter().map(|x| chi(c, x) * chi(c2, x)).sum();
                assert_eq!(s, if c == c2 { 1 << n } else { 0 }, "n = {n}, c = {c}, c' = {c2}");
            }
        }
    }
}

#[test]
fn sampling_goodness_of_fit() {
    let n = 3;
    let dists: Vec<Box<dyn PointDistribution>> = vec![
        Box::new(PlantedDistribution::clique(n, IndexSet::new(n, [0, 2]).unwrap()).unwrap()),
        Box::new(
            PlantedDistribution::new(n, IndexSet::new(n, [1]).unwrap(), Prob::from_ratio(9, 10).unwrap(), Prob::from_ratio(1, 4).unwrap())
                .unwrap(),
        ),
        Box::new(ReferenceDistribution::new(n, Prob::from_ratio(1, 3).unwrap()).unwrap()),
        Box::new(ParityDistribution::new(Point::from_word(n, 0b110), 1).unwrap()),
    ];
    let seeds = SeedStream::new(2024);
    let draws = 4000;
    for (di, d) in dists.iter().enumerate() {
        let masses: Vec<f64> = (0..1u64 << n).map(|x| d.mass_f64(&Point::from_word(n, x)).unwrap()).collect();
        let support: Vec<usize> = (0..masses.len()).filter(|&i| masses[i] > 0.0).collect();
        let chi2 = ChiSquared::new((support.len() - 1) as f64).unwrap();
        let trials = 200;
        let mut passed = 0;
        for trial in 0..trials {
            let mut rng = seeds.child(di as u64).rng(trial);
            let mut counts = vec![0u64; masses.len()];
            for _ in 0..draws {
                counts[d.draw(&mut rng).word() as usize] += 1;
            }
            assert!(counts.iter().zip(&masses).all(|(&c, &m)| m > 0.0 || c == 0), "draw outside support");
            let stat: f64 = support
                .iter()
                .map(|&i| {
                    let e = masses[i] * draws as f64;
                    (counts[i] as f64 - e).powi(2) / e
                })
                .sum();
            if 1.0 - chi2.cdf(stat) > 0.001 {
                passed += 1;
            }
        }
        assert!(passed as f64 >= 0.99 * trials as f64, "{}: {passed}/{trials}", d.family());
    }
}

#[test]
fn draws_are_seed_deterministic() {
    let d = PlantedDistribution::clique(40, IndexSet::prefix(40, 7).unwrap()).unwrap();
    let a: Vec<Point> = {
        let mut rng = SeedStream::new(5).rng(3);
        (0..50).map(|_| d.draw(&mut rng)).collect()
    };
    let b: Vec<Point> = {
        let mut rng = SeedStream::new(5).rng(3);
        (0..50).map(|_| d.draw(&mut rng)).collect()
    };
    assert_eq!(a, b);
}
