mod common;

use proptest::prelude::*;
use txcost::market::{build_tree, ks_to_lognormal, sample_scenario, ModelSpec, TreeLayout};

#[test]
fn walk_leaves_approach_the_lognormal_law() {
    for (drift, vol) in [(0.0, 0.2), (0.05, 0.3), (-0.1, 0.15)] {
        let spec = ModelSpec::gbm(2, 1.0, vec![drift], vec![vol]).unwrap();
        let ks: Vec<f64> = [4, 16, 64, 256]
            .iter()
            .map(|&n| ks_to_lognormal(&build_tree(&spec, n, TreeLayout::Recombining).unwrap(), &spec, 1).unwrap())
            .collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]), "drift {drift}, vol {vol}: {ks:?}");
    }
}

#[test]
fn tree_probabilities_sum_to_one() {
    let spec = ModelSpec::gbm(3, 1.0, vec![0.0, 0.1], vec![0.2, 0.3]).unwrap();
    let tree = build_tree(&spec, 3, TreeLayout::Full).unwrap();
    for node in tree.nodes() {
        if !node.children.is_empty() {
            let total: f64 = node.children.iter().map(|c| c.1).sum();
            assert!((total - 1.0).abs() <= 1e-12);
        }
        assert!(node.prices.iter().all(|&s| s > 0.0));
        assert_eq!(node.prices[0], 1.0);
    }
}

proptest! {
    #![proptest_config(common::cases(32))]

    #[test]
    fn scenarios_are_reproducible(seed in any::<u64>(), m in 1usize..200, vol in 0.05f64..0.5) {
        let spec = ModelSpec::gbm(2, 1.0, vec![0.0], vec![vol]).unwrap();
        let a = sample_scenario(&spec, m, seed).unwrap();
        let b = sample_scenario(&spec, m, seed).unwrap();
        prop_assert_eq!(&a.prices, &b.prices);
        prop_assert_eq!(&a.factor, &b.factor);
        let c = sample_scenario(&spec, m, seed.wrapping_add(1)).unwrap();
        prop_assert_ne!(&a.prices, &c.prices);
    }

    #[test]
    fn scenario_prices_are_positive_with_unit_numeraire(seed in any::<u64>(), m in 1usize..100) {
        let spec = ModelSpec::gbm(3, 2.0, vec![0.1, -0.1], vec![0.4, 0.2]).unwrap();
        let s = sample_scenario(&spec, m, seed).unwrap().prices;
        for row in s.values() {
            prop_assert_eq!(row[0], 1.0);
            prop_assert!(row.iter().all(|&v| v > 0.0));
        }
    }
}
