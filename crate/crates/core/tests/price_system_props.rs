mod common;

use common::{random_tree, rng, uniform_cone};
use proptest::prelude::*;
use rand::Rng;
use txcost::market::to_monetary;
use txcost::portfolio::TreeStrategy;
use txcost::price_system::{find_cps, variation_tail, CpsOutcome, PriceSystem};

proptest! {
    #![proptest_config(common::cases(24))]

    #[test]
    fn found_systems_verify_and_bound_variation_tails(seed in any::<u64>(), depth in 1usize..=3, rate in 0.02f64..0.2) {
        let mut r = rng(seed);
        let tree = random_tree(&mut r, depth, 2, 0.2);
        let k = uniform_cone(2, rate);
        let eps = 1e-3;
        let ps = match find_cps(&tree, &k, eps).unwrap() {
            CpsOutcome::Found(ps) => ps,
            CpsOutcome::Infeasible { .. } => return Ok(()),
        };
        prop_assert!(ps.verify(&tree, &k).is_ok());

        // rescaling and renormalising gives back the same system
        let c = r.random_range(0.1..10.0);
        let scaled: Vec<Vec<f64>> = ps.z.iter().map(|z| z.iter().map(|v| c * v).collect()).collect();
        let root = scaled[0][0];
        let renormalised = PriceSystem {
            z: scaled.iter().map(|z| z.iter().map(|v| v / root).collect()).collect(),
            ..ps.clone()
        };
        for (a, b) in renormalised.z.iter().flatten().zip(ps.z.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        prop_assert!(renormalised.verify(&tree, &k).is_ok());

        // Markov bound on the variation tail
        let x = [1.0, 0.5];
        let dirs: Vec<Vec<f64>> = k.transfers().iter().map(|g| g.iter().map(|v| -v).collect()).collect();
        let bound = k.purchase_value(&to_monetary(&tree.node(0).prices, &x).unwrap()).unwrap() / eps;
        for _ in 0..20 {
            let s = TreeStrategy::random(&tree, &k, &x, &dirs, 0.7, &mut r).unwrap();
            for level in [0.1, 1.0, 10.0] {
                let tail = variation_tail(&tree, &ps, &s, level).unwrap();
                prop_assert!(tail <= bound / level + 1e-12);
            }
        }
    }
}

#[test]
fn random_trees_mostly_admit_price_systems() {
    let mut r = rng(11);
    let found = (0..24)
        .filter(|_| {
            let tree = random_tree(&mut r, 2, 2, 0.2);
            matches!(find_cps(&tree, &uniform_cone(2, 0.1), 1e-3).unwrap(), CpsOutcome::Found(_))
        })
        .count();
    assert!(found >= 12, "only {found} of 24 trees admit a price system");
}
