#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use txcost::cone::{CostMatrix, SolvencyCone};
use txcost::market::{EventTree, TreeNode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_cone(d: usize, rate: f64) -> SolvencyCone {
    SolvencyCone::from_costs(&CostMatrix::uniform(d, rate).unwrap()).unwrap()
}

/// Cost matrix with independent rates in `[lo, hi]`.
pub fn random_costs<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> CostMatrix {
    let rows = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 0.0 } else { rng.random_range(lo..=hi) }).collect())
        .collect();
    CostMatrix::new(rows).unwrap()
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn normal_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| normal(rng)).collect()
}

/// Non-recombining tree of the given depth over `d` assets. Each node has
/// two or three children with random probabilities, and risky prices move
/// by lognormal factors of volatility `vol`.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, d: usize, vol: f64) -> EventTree {
    let mut nodes = vec![TreeNode {
        depth: 0,
        prices: vec![1.0; d],
        label: 0,
        children: Vec::new(),
        tradable: true,
        reach: 0.0,
    }];
    let mut frontier = vec![0usize];
    for k in 0..depth {
        let mut next = Vec::new();
        for id in frontier {
            let arity = rng.random_range(2..=3usize);
            let weights: Vec<f64> = (0..arity).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let head: f64 = probs[..arity - 1].iter().sum();
            probs[arity - 1] = 1.0 - head;
            for p in probs {
                let parent = nodes[id].prices.clone();
                let prices = parent
                    .iter()
                    .enumerate()
                    .map(|(i, s)| if i == 0 { 1.0 } else { s * (vol * normal(rng)).exp() })
                    .collect();
                let c = nodes.len();
                nodes.push(TreeNode {
                    depth: k + 1,
                    prices,
                    label: 0,
                    children: Vec::new(),
                    tradable: true,
                    reach: 0.0,
                });
                nodes[id].children.push((c, p));
                next.push(c);
            }
        }
        frontier = next;
    }
    EventTree::from_nodes(nodes, depth, 1.0).unwrap()
}

/// A strictly solvent position: a positive combination of generators plus a
/// positive orthant shift.
pub fn interior_point<R: Rng>(rng: &mut R, cone: &SolvencyCone) -> Vec<f64> {
    let d = cone.dim();
    let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.5)).collect();
    for g in cone.generators() {
        let c = rng.random_range(0.0..0.3);
        for i in 0..d {
            x[i] += c * g[i];
        }
    }
    x
}

/// Proptest settings with a fixed seed and no regression files, so every run
/// draws the same cases.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x7c0_57),
        failure_persistence: None,
        ..Default::default()
    }
}
