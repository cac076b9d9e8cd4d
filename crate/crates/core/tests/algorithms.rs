use std::sync::Arc;

use sqlab_core::algorithms::{
    coordinate_detector_t, detect_by_coordinate_bias, detect_by_subset_enumeration, satisfied_fraction, solve_max_xor_sat,
    subset_detector_t,
};
use sqlab_core::bits::{Combinations, IndexSet, Point};
use sqlab_core::distributions::{ParityDistribution, PlantedDistribution, PointDistribution, ReferenceDistribution};
use sqlab_core::oracles::{Backend, OracleSession, OracleSpec};
use sqlab_core::rng::SeedStream;
use sqlab_core::scalar::ArithmeticMode;

fn clique(n: usize, plant: &[usize]) -> Arc<dyn PointDistribution> {
    Arc::new(PlantedDistribution::clique(n, IndexSet::new(n, plant.iter().copied()).unwrap()).unwrap())
}

#[test]
fn exact_detectors_recover_every_plant() {
    // the 3k/(4n) threshold separates plant subsets once s ≥ log₂ n
    for (n, k, s, stride) in [(8usize, 3usize, 3usize, 1usize), (8, 5, 3, 1), (16, 4, 4, 41), (16, 6, 4, 197)] {
        for plant in Combinations::new(n, k).step_by(stride) {
            let d = clique(n, &plant);
            let truth = IndexSet::new(n, plant.iter().copied()).unwrap();
            let t = coordinate_detector_t(n as u64, k as u64);
            let mut session = OracleSession::new(OracleSpec::vstat(t).unwrap(), Backend::exact(d.clone()), 0);
            assert_eq!(detect_by_coordinate_bias(&mut session, n, k).unwrap().recovered, truth);
            let t = subset_detector_t(n as u64, k as u64);
            let mut session = OracleSession::new(OracleSpec::vstat(t).unwrap(), Backend::exact(d), 0);
            let out = detect_by_subset_enumeration(&mut session, n, k, s).unwrap();
            assert_eq!(out.recovered, truth, "n = {n}, k = {k}, plant = {plant:?}");
            for a in out.accepted_subsets.unwrap() {
                assert!(a.iter().all(|i| truth.contains(*i)), "accepted {a:?} outside the plant");
            }
        }
    }
}

#[test]
fn low_budget_adversary_blinds_the_coordinate_detector() {
    let n = 10;
    let k = 2;
    let t = (n * n / (2 * k * k)) as u64;
    let reference: Arc<dyn PointDistribution> = Arc::new(ReferenceDistribution::uniform(n).unwrap());
    let mut outputs = Vec::new();
    for plant in Combinations::new(n, k) {
        let mut s =
            OracleSession::new(OracleSpec::vstat(t).unwrap(), Backend::adversarial(clique(n, &plant), reference.clone()).unwrap(), 0);
        outputs.push(detect_by_coordinate_bias(&mut s, n, k).unwrap().recovered);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn honest_coordinate_detector_succeeds_often() {
    let n = 100;
    let k = 10;
    let t = coordinate_detector_t(n as u64, k as u64);
    let seeds = SeedStream::new(77);
    let trials = 200;
    let mut hits = 0;
    for trial in 0..trials {
        let mut rng = seeds.rng(trial);
        let plant = IndexSet::new(n, rand::seq::index::sample(&mut rng, n, k).iter()).unwrap();
        let d: Arc<dyn PointDistribution> = Arc::new(PlantedDistribution::clique(n, plant.clone()).unwrap());
        let mut s = OracleSession::with_rng(
            OracleSpec::vstat(t).unwrap(),
            Backend::honest(d, 0.01 / n as f64).unwrap(),
            seeds.child(1).rng(trial),
            ArithmeticMode::Float,
        )
        .without_transcript();
        if detect_by_coordinate_bias(&mut s, n, k).unwrap().recovered == plant {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials}");
}

#[test]
fn subset_size_guard() {
    let d = clique(8, &[0, 1]);
    let mut s = OracleSession::new(OracleSpec::vstat(100).unwrap(), Backend::exact(d.clone()), 0);
    assert!(detect_by_subset_enumeration(&mut s, 8, 2, 3).is_err());
    let mut s = OracleSession::new(OracleSpec::stat(0.1).unwrap(), Backend::exact(d), 0);
    assert!(detect_by_coordinate_bias(&mut s, 8, 2).is_err());
}

#[test]
fn max_xor_sat_baseline_is_sound_but_weak() {
    let n = 12;
    let target = Point::from_word(n, 0b1010_0110_0011);
    let d: Arc<dyn PointDistribution> = Arc::new(ParityDistribution::new(target.clone(), 1).unwrap());
    let mut s = OracleSession::new(OracleSpec::stat(0.01).unwrap(), Backend::exact(d), 0);
    let mut rng = SeedStream::new(3).rng(0);
    let budget = 200;
    let out = solve_max_xor_sat(&mut s, n, budget, &mut rng).unwrap();
    assert!(out.queries_used <= budget);
    assert!(out.budget_exhausted);
    // every non-target clause scores 0, so a budget far below 2^n rarely finds it
    if out.assignment != target {
        assert_eq!(satisfied_fraction(out.best_response), 0.5);
    }
}
