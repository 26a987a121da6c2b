//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero when any fails.

mod common;

use std::time::Instant;

use rand::Rng;
use txcost::bellman::{
    convergence_study, dp_value, enumerate_value, randomization_test, ActionGrid, DpOptions, StudyOptions,
};
use txcost::cone::SolvencyCone;
use txcost::market::{build_tree, sample_scenario, ModelSpec, TreeLayout};
use txcost::path::{modulus, piecewise_approx, stieltjes_integral, total_variation, GridPath, PathKind};
use txcost::portfolio::{discretize_strategy, random_admissible_strategy, wealth, Strategy, TreeStrategy};
use txcost::price_system::{find_cps, variation_bound_check, verify_supermartingale, CpsOutcome};
use txcost::utility::{check_a1, check_growth_bound, A1Outcome, UtilitySpec};

use common::{interior_point, normal_vec, random_costs, random_tree, rng, uniform_cone};

type Outcome = Result<String, String>;

fn ac1() -> Outcome {
    let start = Instant::now();
    let spec = ModelSpec::gbm(2, 1.0, vec![0.0], vec![0.2]).map_err(|e| e.to_string())?;
    let k = uniform_cone(2, 0.01);
    let u = UtilitySpec::power(0.5).unwrap();
    let study = convergence_study(&spec, &[1.0, 0.5], &k, &u, &StudyOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let incs: Vec<f64> = study.rows.iter().filter_map(|r| r.increment).collect();
    let u16 = study.rows.last().map(|r| r.value).unwrap_or(f64::NAN);
    let last = study.last_increment().unwrap_or(f64::NAN);
    let detail = format!("increments {incs:?}, last {last:.3e} vs 0.02·u16 = {:.3e}, {secs:.1} s", 0.02 * u16);
    let ns: Vec<usize> = study.rows.iter().map(|r| r.n).collect();
    if ns == [2, 4, 8, 16] && incs.iter().all(|v| v.is_finite()) && last < 0.02 * u16 && secs < 300.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac2() -> Outcome {
    let mut r = rng(2);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    for i in 0..20 {
        let depth = 1 + i % 2;
        let tree = random_tree(&mut r, depth, 2, 0.25);
        let lambda = r.random_range(0.0..=0.2);
        let k = uniform_cone(2, lambda);
        let x = interior_point(&mut r, &k);
        let u = UtilitySpec::power(r.random_range(0.2..0.8)).unwrap();
        let l = k.liquidation_value(&x).unwrap();
        let grid = ActionGrid::new(&k, l / 8.0, 8).unwrap();
        let e = enumerate_value(&tree, &x, &k, &grid, &u).map_err(|e| format!("tree {i}: {e}"))?;
        let d = dp_value(&tree, &x, &k, &grid, &u, &DpOptions::default()).map_err(|e| format!("tree {i}: {e}"))?;
        let diff = (e.value - d.value).abs();
        let bound = d.interpolation_bound.unwrap_or(0.0);
        if depth == 1 {
            worst_exact = worst_exact.max(diff);
            if diff > 1e-10 {
                return Err(format!("tree {i}: depth-1 dp {} vs enumerate {}", d.value, e.value));
            }
        } else if diff > bound + 1e-12 || !d.bound_rigorous {
            return Err(format!("tree {i}: |dp − enumerate| = {diff:.3e} exceeds bound {bound:.3e}"));
        } else if bound > 0.0 {
            worst_ratio = worst_ratio.max(diff / bound);
        }
    }
    Ok(format!("20 trees; depth 1 max diff {worst_exact:.1e}; depth 2 max diff/bound {worst_ratio:.3}"))
}

fn three_step_setup() -> Result<(txcost::market::EventTree, SolvencyCone, txcost::price_system::PriceSystem), String> {
    let spec = ModelSpec::gbm(2, 1.0, vec![0.0], vec![0.2]).unwrap();
    let tree = build_tree(&spec, 3, TreeLayout::Full).map_err(|e| e.to_string())?;
    let k = uniform_cone(2, 0.1);
    match find_cps(&tree, &k, 1e-3).map_err(|e| e.to_string())? {
        CpsOutcome::Found(ps) => {
            ps.verify(&tree, &k).map_err(|e| e.to_string())?;
            Ok((tree, k, ps))
        }
        CpsOutcome::Infeasible { reason, .. } => Err(format!("no price system: {reason}")),
    }
}

fn random_tree_strategies(
    tree: &txcost::market::EventTree,
    k: &SolvencyCone,
    x: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<TreeStrategy>, String> {
    let dirs: Vec<Vec<f64>> = k.transfers().iter().map(|g| g.iter().map(|v| -v).collect()).collect();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let p = r.random_range(0.2..1.0);
        let s = TreeStrategy::random(tree, k, x, &dirs, p, &mut r).map_err(|e| e.to_string())?;
        if let Some(node) = s.check(tree, k, x, 1e-9).map_err(|e| e.to_string())? {
            return Err(format!("random strategy inadmissible at node {node}"));
        }
        out.push(s);
    }
    Ok(out)
}

fn ac3() -> Outcome {
    let (tree, k, ps) = three_step_setup()?;
    let x = [1.0, 0.5];
    let mut strategies = random_tree_strategies(&tree, &k, &x, 1000, 3)?;
    let grid = ActionGrid::new(&k, 0.05, 20).map_err(|e| e.to_string())?;
    let churn = TreeStrategy::greedy_churn(&tree, &k, &x, grid.actions()).map_err(|e| e.to_string())?;
    if churn.check(&tree, &k, &x, 1e-9).map_err(|e| e.to_string())?.is_some() {
        return Err("greedy churn strategy is inadmissible".into());
    }
    strategies.push(churn);
    let rep = variation_bound_check(&tree, &k, &ps, &x, &strategies).map_err(|e| e.to_string())?;
    let worst = rep.expected_variation.iter().copied().fold(0.0, f64::max);
    let churn_var = *rep.expected_variation.last().unwrap();
    let detail = format!(
        "1001 strategies, max E_Q[Var] {worst:.4} (churn {churn_var:.4}) ≤ bound {:.2}",
        rep.bound
    );
    if rep.violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} violations; {detail}", rep.violations.len()))
    }
}

fn ac4() -> Outcome {
    let (tree, k, ps) = three_step_setup()?;
    let x = [1.0, 0.5];
    let strategies = random_tree_strategies(&tree, &k, &x, 1000, 4)?;
    let mut worst = f64::NEG_INFINITY;
    let mut bad = 0;
    for s in &strategies {
        let rep = verify_supermartingale(&tree, &ps, &x, s).map_err(|e| e.to_string())?;
        worst = worst.max(rep.worst_excess);
        if !rep.holds() {
            bad += 1;
        }
    }
    let detail = format!("1000 strategies, {bad} violations, worst excess {worst:.2e}");
    if bad == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac5() -> Outcome {
    let mut r = rng(5);
    let mut worst_slack = f64::INFINITY;
    for pair in 0..500 {
        let fine = 64 * r.random_range(1..=4usize);
        let m = [1usize, 2, 4, 8, 16, 32, 64][r.random_range(0..7)];
        let mut fv = vec![r.random_range(-1.0..1.0)];
        let mut bv = vec![r.random_range(-1.0..1.0)];
        for _ in 0..fine {
            fv.push(fv.last().unwrap() + 0.2 * common::normal(&mut r));
            let jump = if r.random::<f64>() < 0.3 { common::normal(&mut r) } else { 0.0 };
            bv.push(bv.last().unwrap() + jump);
        }
        let f = GridPath::scalar(1.0, fv, PathKind::PiecewiseLinear).unwrap();
        let b = GridPath::scalar(1.0, bv, PathKind::PiecewiseConstant)
            .unwrap()
            .with_pre0(vec![r.random_range(-1.0..1.0)])
            .unwrap();
        let bm = piecewise_approx(&b, m).unwrap().refine(fine / m).unwrap();
        let exact = stieltjes_integral(&f, &b).unwrap();
        let approx = stieltjes_integral(&f, &bm).unwrap();
        let bound = modulus(&f, 1.0 / m as f64) * total_variation(&b).total();
        for kk in 0..=m {
            let node = kk * (fine / m);
            let slack = bound - (approx.at(node)[0] - exact.at(node)[0]).abs();
            worst_slack = worst_slack.min(slack);
            if slack < -1e-12 {
                return Err(format!("pair {pair}: bound fails at coarse node {kk} by {:.3e}", -slack));
            }
        }
    }

    let spec = ModelSpec::gbm(2, 1.0, vec![0.0], vec![0.2]).unwrap();
    let k = uniform_cone(2, 0.05);
    let dirs: Vec<Vec<f64>> = k.transfers().iter().map(|g| g.iter().map(|v| -v * 0.2).collect()).collect();
    let x = [1.0, 0.5];
    let fine = 4096;
    let levels = [256usize, 512, 1024, 2048];
    let mut worst_terminal: f64 = 0.0;
    for i in 0..100u64 {
        let prices = sample_scenario(&spec, fine, 1000 + i).unwrap().prices;
        let s = random_admissible_strategy(&x, &prices, &k, &dirs, 8.0 / fine as f64, &mut r).map_err(|e| e.to_string())?;
        let base = wealth(&x, &s, &prices).map_err(|e| e.to_string())?;
        let mut norms = Vec::new();
        let mut terminal = 0.0;
        for &m in &levels {
            let (coarse, cert) = discretize_strategy(&x, &s, &prices, &k, m).map_err(|e| format!("strategy {i}, m = {m}: {e}"))?;
            norms.push(cert.sup_norm);
            let refined = Strategy::new(coarse.path().refine(fine / m).unwrap(), &k).map_err(|e| e.to_string())?;
            let w = wealth(&x, &refined, &prices).map_err(|e| e.to_string())?;
            terminal = w
                .physical
                .terminal()
                .iter()
                .zip(base.physical.terminal())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        if norms.windows(2).any(|w| w[1] > w[0]) || norms[3] >= norms[0] {
            return Err(format!("strategy {i}: ‖ξ‖ across levels {norms:?} does not decrease"));
        }
        worst_terminal = worst_terminal.max(terminal);
        if terminal >= 1e-3 {
            return Err(format!("strategy {i}: terminal holdings differ by {terminal:.3e} at m = 2048"));
        }
    }
    Ok(format!(
        "500 pairs, worst slack {worst_slack:.3e}; 100 strategies, ‖ξ‖ decreasing over m ∈ {levels:?}, max terminal gap {worst_terminal:.2e}"
    ))
}

fn ac6() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    let mut disagreements = 0;
    let dims = [2usize, 3, 3, 4, 4];
    for (c, &d) in dims.iter().enumerate() {
        let costs = random_costs(&mut r, d, 0.0, 0.3);
        let k = SolvencyCone::from_costs(&costs).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let x = normal_vec(&mut r, d);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let p = k.purchase_value(&x).map_err(|e| e.to_string())?;
            let l = k.liquidation_value(&neg).map_err(|e| e.to_string())?;
            worst = worst.max((p + l).abs());
            let lp = k.contains(&x, 1e-9).map_err(|e| e.to_string())?;
            let facets = k.contains_facets(&x, 1e-9).ok_or(format!("matrix {c}: no dual generators"))?;
            if lp != facets {
                disagreements += 1;
            }
        }
    }
    let detail = format!("5 matrices × 1000 points, max |℘(x) + ℓ(−x)| = {worst:.2e}, {disagreements} membership disagreements");
    if worst <= 1e-9 && disagreements == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac7() -> Outcome {
    let mut r = rng(7);
    let k = uniform_cone(3, 0.05);
    let samples: Vec<Vec<f64>> = (0..500).map(|_| interior_point(&mut r, &k)).collect();
    let alphas: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    let mut lines = Vec::new();
    for gamma in [0.1, 0.5, 0.9] {
        let u = UtilitySpec::power(gamma).unwrap();
        match check_a1(&u, &k, &samples, &alphas).map_err(|e| e.to_string())? {
            A1Outcome::Holds(c) => lines.push(format!("γ={gamma}: slack {:.1e}", c.worst_slack)),
            A1Outcome::Violated { sample, alpha, slack } => {
                return Err(format!("γ={gamma}: scaling condition fails at sample {sample}, α={alpha}, slack {slack:.3e}"));
            }
        }
        let g = check_growth_bound(&u, &k, &samples).map_err(|e| e.to_string())?;
        if !g.violations.is_empty() {
            return Err(format!("γ={gamma}: growth bound fails on {} samples", g.violations.len()));
        }
    }
    Ok(format!("500 samples, 0 violations ({})", lines.join(", ")))
}

fn ac8() -> Outcome {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let depth = 1 + i % 3;
        let arity = 2 + i % 2;
        let tree = random_tree(&mut r, depth, 2, 0.25);
        let k = uniform_cone(2, r.random_range(0.01..0.2));
        let x = interior_point(&mut r, &k);
        let u = UtilitySpec::power(r.random_range(0.2..0.8)).unwrap();
        let grid = ActionGrid::new(&k, k.liquidation_value(&x).unwrap() / 6.0, 4).unwrap();
        let rep = randomization_test(&tree, &x, &k, &u, &grid, arity).map_err(|e| format!("tree {i}: {e}"))?;
        worst = worst.max((rep.product - rep.base).abs()).max((rep.averaged - rep.base).abs());
        if !rep.holds(1e-10) {
            return Err(format!("tree {i}: base {} product {} averaged {}", rep.base, rep.product, rep.averaged));
        }
    }
    Ok(format!("10 trees, depth ≤ 3, arity 2 and 3, max deviation {worst:.1e}"))
}

fn ac9() -> Outcome {
    let mut r = rng(9);
    let mut slacks = [f64::INFINITY; 4];
    for i in 0..50 {
        let tree = random_tree(&mut r, 2, 2, 0.25);
        let k = uniform_cone(2, r.random_range(0.01..0.2));
        let u = UtilitySpec::power(r.random_range(0.2..0.8)).unwrap();
        let x = interior_point(&mut r, &k);
        let y = interior_point(&mut r, &k);
        let err = |e: txcost::Error| format!("instance {i}: {e}");
        let step = |p: &[f64]| k.liquidation_value(p).unwrap() / 6.0;

        // concavity
        let gx = ActionGrid::new(&k, step(&x), 3).map_err(err)?.with_liquidation(false);
        let gy = ActionGrid::new(&k, step(&y), 3).map_err(err)?.with_liquidation(false);
        let alpha = r.random_range(0.1..0.9);
        let mix = gx.mixture(&gy, alpha, &k).map_err(err)?;
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let ex = enumerate_value(&tree, &x, &k, &gx, &u).map_err(err)?.value;
        let ey = enumerate_value(&tree, &y, &k, &gy, &u).map_err(err)?.value;
        let ez = enumerate_value(&tree, &z, &k, &mix, &u).map_err(err)?.value;
        slacks[0] = slacks[0].min(ez - alpha * ex - (1.0 - alpha) * ey);

        // K-monotonicity: y' = x + k' with k' ∈ K runs x's strategies plus ℓ(k') cash
        let grid = ActionGrid::new(&k, step(&x), 3).map_err(err)?;
        let extra = interior_point(&mut r, &k);
        let bigger: Vec<f64> = x.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let mut offset: Vec<f64> = extra.iter().map(|v| -v).collect();
        offset[0] += k.liquidation_value(&extra).unwrap();
        let shifted = grid.clone().with_root_offset(&k, offset).map_err(err)?;
        let vx = enumerate_value(&tree, &x, &k, &grid, &u).map_err(err)?.value;
        let vy = enumerate_value(&tree, &bigger, &k, &shifted, &u).map_err(err)?.value;
        slacks[1] = slacks[1].min(vy - vx);

        // power scaling
        let c = r.random_range(0.2..5.0);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let vc = enumerate_value(&tree, &cx, &k, &grid.scaled(c), &u).map_err(err)?.value;
        let expected = c.powf(1.0 - u.gamma) * vx;
        slacks[2] = slacks[2].min(-(vc - expected).abs());

        // liquidate-now floor
        let floor = u.of_liquidation(k.liquidation_value(&x).unwrap());
        let dp = dp_value(&tree, &x, &k, &grid, &u, &DpOptions::default()).map_err(err)?.value;
        slacks[3] = slacks[3].min(vx - floor).min(dp - floor);
    }
    let names = ["concavity", "monotonicity", "scaling", "liquidation floor"];
    let detail = names
        .iter()
        .zip(&slacks)
        .map(|(n, s)| format!("{n} {s:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    if slacks.iter().all(|&s| s >= -1e-9) {
        Ok(format!("50 instances each, worst slack: {detail}"))
    } else {
        Err(format!("worst slack: {detail}"))
    }
}

fn ac10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_txcost");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.conf");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = std::process::Command::new(bin)
            .args(["converge", "--config", config, "--seed", "11", "--out"])
            .arg(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("converge exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
        }
        let csv = std::fs::read(dir.path().join("convergence.csv")).map_err(|e| e.to_string())?;
        let summary = std::fs::read(dir.path().join("convergence_summary.txt")).map_err(|e| e.to_string())?;
        outputs.push((csv, summary));
    }
    if outputs[0] == outputs[1] {
        Ok(format!("two runs, {} CSV bytes identical", outputs[0].0.len()))
    } else {
        Err("outputs differ between runs".into())
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
        ("AC-8", ac8),
        ("AC-9", ac9),
        ("AC-10", ac10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{name} PASS ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{name} FAIL ({secs:.1} s): {detail}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
