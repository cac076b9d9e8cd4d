use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use serde_json::Value;
use sqlab::io::{parse_prob, rational_json, InstanceFile};
use sqlab::report::{aggregate, wilson_interval, Trial};
use sqlab_core::bits::IndexSet;

proptest! {
    #[test]
    fn wilson_interval_brackets_the_rate(n in 1usize..2000, frac in 0.0f64..=1.0) {
        let s = ((n as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(s, n, 0.05).unwrap();
        let rate = s as f64 / n as f64;
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(lo <= rate + 1e-12 && rate <= hi + 1e-12);
    }

    #[test]
    fn aggregates_count_what_they_see(flags in prop::collection::vec(any::<bool>(), 1..200)) {
        let trials: Vec<Trial> = flags
            .iter()
            .enumerate()
            .map(|(i, &ok)| Trial { index: i as u64, seed: 0, success: ok, queries: i as u64, samples: 0, detail: Value::Null })
            .collect();
        let a = aggregate(&trials).unwrap();
        prop_assert_eq!(a.successes, flags.iter().filter(|b| **b).count());
        prop_assert_eq!(a.max_queries, flags.len() as u64 - 1);
        prop_assert_eq!(a.low_power, flags.len() < 30);
    }

    #[test]
    fn probabilities_survive_the_instance_format(a in 1i64..1000, b in 2i64..=1000, seed in any::<u64>()) {
        prop_assume!(a < b);
        let r = BigRational::new(BigInt::from(a), BigInt::from(b));
        let p = parse_prob(&r.to_string()).unwrap();
        let v = rational_json(p.exact());
        let plant = IndexSet::new(8, [0, 3]).unwrap();
        let inst = InstanceFile::new(8, &plant, &parse_prob("1").unwrap(), &p, seed);
        let text = serde_json::to_string(&inst).unwrap();
        let back: InstanceFile = serde_json::from_str(&text).unwrap();
        let d = back.distribution().unwrap();
        prop_assert_eq!(d.q().exact(), &r);
        prop_assert!(v.is_number() || v.is_string());
    }
}
