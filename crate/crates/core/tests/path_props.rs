mod common;

use common::{normal, rng, uniform_cone};
use proptest::prelude::*;
use rand::Rng;
use txcost::path::{
    modulus, mz_distance, piecewise_approx, stieltjes_integral, total_variation, GridPath, PathKind,
};
use txcost::portfolio::Strategy;

fn walk(seed: u64, cells: usize, start: f64, jump_prob: f64, kind: PathKind) -> GridPath {
    let mut r = rng(seed);
    let mut v = vec![start];
    for _ in 0..cells {
        let step = if r.random::<f64>() < jump_prob { normal(&mut r) } else { 0.0 };
        v.push(v.last().unwrap() + step);
    }
    GridPath::scalar(1.0, v, kind).unwrap()
}

proptest! {
    #![proptest_config(common::cases(64))]

    #[test]
    fn coarse_integral_error_is_bounded(seed in any::<u64>(), log_m in 0u32..5, pre in -1.0f64..1.0) {
        let m = 1usize << log_m;
        let fine = 64;
        let f = walk(seed, fine, 0.0, 1.0, PathKind::PiecewiseLinear);
        let b = walk(seed ^ 7, fine, 0.3, 0.3, PathKind::PiecewiseConstant).with_pre0(vec![pre]).unwrap();
        let bm = piecewise_approx(&b, m).unwrap().refine(fine / m).unwrap();
        let exact = stieltjes_integral(&f, &b).unwrap();
        let approx = stieltjes_integral(&f, &bm).unwrap();
        let bound = modulus(&f, 1.0 / m as f64) * total_variation(&b).total();
        for k in 0..=m {
            let node = k * (fine / m);
            let err = (approx.at(node)[0] - exact.at(node)[0]).abs();
            prop_assert!(err <= bound + 1e-12, "node {node}: {err} > {bound}");
        }
    }

    #[test]
    fn decreasing_paths_have_directions_in_minus_k(seed in any::<u64>(), rate in 0.0f64..0.3) {
        let k = uniform_cone(2, rate);
        let mut r = rng(seed);
        let mut acc = vec![0.0, 0.0];
        let mut values = vec![acc.clone()];
        for _ in 0..16 {
            for g in k.transfers() {
                let c = if r.random::<f64>() < 0.4 { r.random::<f64>() } else { 0.0 };
                acc.iter_mut().zip(g).for_each(|(a, v)| *a -= c * v);
            }
            values.push(acc.clone());
        }
        let path = GridPath::new(1.0, values.clone(), PathKind::PiecewiseConstant).unwrap().with_pre0(vec![0.0, 0.0]).unwrap();
        let dirs = total_variation(&path).directions;
        prop_assert!(Strategy::new(path, &k).is_ok());
        for dir in dirs.into_iter().flatten() {
            let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
            prop_assert!(k.contains(&neg, 1e-9).unwrap());
        }

        // a violator: one increment pushed out of −K
        let at = r.random_range(1..values.len());
        for v in &mut values[at..] {
            v[0] += 1.0;
        }
        let bad = GridPath::new(1.0, values, PathKind::PiecewiseConstant).unwrap().with_pre0(vec![0.0, 0.0]).unwrap();
        let dir = total_variation(&bad).directions[at].clone().unwrap();
        let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
        prop_assert!(!k.contains(&neg, 1e-9).unwrap());
        prop_assert!(Strategy::new(bad, &k).is_err());
    }

    #[test]
    fn meyer_zheng_is_a_metric(seed in any::<u64>(), ma in 1usize..8, mb in 1usize..8, mc in 1usize..8) {
        let x = walk(seed, ma, 0.0, 0.8, PathKind::PiecewiseConstant);
        let y = walk(seed ^ 1, mb, 0.0, 0.8, PathKind::PiecewiseConstant);
        let z = walk(seed ^ 2, mc, 0.0, 0.8, PathKind::PiecewiseConstant);
        let d = |a: &GridPath, b: &GridPath| mz_distance(a, b).unwrap();
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
    }

    #[test]
    fn total_variation_adds_under_concatenation(seed in any::<u64>(), ma in 1usize..20, mb in 1usize..20, pre in -1.0f64..1.0) {
        let a = walk(seed, ma, 0.0, 0.6, PathKind::PiecewiseConstant).with_pre0(vec![pre]).unwrap();
        let a = GridPath::new(ma as f64, a.values().to_vec(), PathKind::PiecewiseConstant).unwrap().with_pre0(vec![pre]).unwrap();
        let b = walk(seed ^ 3, mb, a.terminal()[0], 0.6, PathKind::PiecewiseConstant);
        let b = GridPath::new(mb as f64, b.values().to_vec(), PathKind::PiecewiseConstant).unwrap();
        let joined = a.concat(&b).unwrap();
        let (ta, tb, tj) = (total_variation(&a).total(), total_variation(&b).total(), total_variation(&joined).total());
        prop_assert!((tj - ta - tb).abs() <= 1e-12 * (1.0 + tj));
    }
}
