mod common;

use common::{interior_point, normal_vec, random_costs, rng};
use proptest::prelude::*;
use txcost::cone::SolvencyCone;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cone_for(seed: u64, d: usize) -> SolvencyCone {
    let mut r = rng(seed);
    SolvencyCone::from_costs(&random_costs(&mut r, d, 0.0, 0.3)).unwrap()
}

proptest! {
    #![proptest_config(common::cases(48))]

    #[test]
    fn purchase_is_minus_liquidation_of_the_negative(seed in any::<u64>(), d in 2usize..=4) {
        let k = cone_for(seed, d);
        let mut r = rng(seed ^ 1);
        for _ in 0..20 {
            let x = normal_vec(&mut r, d);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let gap = k.purchase_value(&x).unwrap() + k.liquidation_value(&neg).unwrap();
            prop_assert!(gap.abs() <= 1e-9, "gap {gap}");
        }
    }

    #[test]
    fn dual_generators_are_nonnegative_on_generators(seed in any::<u64>(), d in 2usize..=4) {
        let k = cone_for(seed, d);
        let duals = k.dual_generators().unwrap();
        for w in duals {
            for g in k.generators() {
                prop_assert!(dot(w, g) >= -1e-9);
            }
        }
    }

    #[test]
    fn values_are_positively_homogeneous(seed in any::<u64>(), d in 2usize..=4, c in 0.01f64..50.0) {
        let k = cone_for(seed, d);
        let x = normal_vec(&mut rng(seed ^ 2), d);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let l = k.liquidation_value(&x).unwrap();
        let p = k.purchase_value(&x).unwrap();
        prop_assert!((k.liquidation_value(&cx).unwrap() - c * l).abs() <= 1e-9 * (1.0 + c * l.abs()));
        prop_assert!((k.purchase_value(&cx).unwrap() - c * p).abs() <= 1e-9 * (1.0 + c * p.abs()));
    }

    #[test]
    fn liquidation_is_concave_and_purchase_convex(seed in any::<u64>(), d in 2usize..=4, alpha in 0.01f64..0.99) {
        let k = cone_for(seed, d);
        let mut r = rng(seed ^ 3);
        let x = normal_vec(&mut r, d);
        let y = normal_vec(&mut r, d);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let l = |v: &[f64]| k.liquidation_value(v).unwrap();
        let p = |v: &[f64]| k.purchase_value(v).unwrap();
        prop_assert!(l(&z) >= alpha * l(&x) + (1.0 - alpha) * l(&y) - 1e-9);
        prop_assert!(p(&z) <= alpha * p(&x) + (1.0 - alpha) * p(&y) + 1e-9);
    }

    #[test]
    fn liquidation_is_positive_inside_the_cone(seed in any::<u64>(), d in 2usize..=4) {
        let k = cone_for(seed, d);
        let x = interior_point(&mut rng(seed ^ 4), &k);
        prop_assert!(k.liquidation_value(&x).unwrap() > 0.0);
        prop_assert!(k.contains(&x, 1e-9).unwrap());
    }

    #[test]
    fn membership_by_lp_matches_facets(seed in any::<u64>(), d in 2usize..=4) {
        let k = cone_for(seed, d);
        let mut r = rng(seed ^ 5);
        for _ in 0..20 {
            let x = normal_vec(&mut r, d);
            prop_assert_eq!(Some(k.contains(&x, 1e-9).unwrap()), k.contains_facets(&x, 1e-9));
        }
    }

    #[test]
    fn projection_is_obtuse_against_generators(seed in any::<u64>(), d in 2usize..=4) {
        let k = cone_for(seed, d);
        let u = normal_vec(&mut rng(seed ^ 6), d);
        let p = k.project(&u).unwrap();
        let r: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a - b).collect();
        for g in k.generators() {
            let v: Vec<f64> = g.iter().zip(&p).map(|(a, b)| a - b).collect();
            prop_assert!(dot(&r, &v) <= 1e-9, "inner product {}", dot(&r, &v));
        }
    }
}
