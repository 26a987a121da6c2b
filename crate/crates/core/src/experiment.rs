//! Commands behind the `txcost` binary. Each writes its CSV artifacts under
//! the configured output directory and returns the text it prints.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::bellman::{
    convergence_study, dp_value, enumerate_value, mc_value, randomization_test, ActionGrid, McOptions, ValueReport,
};
use crate::cone::{rays_text, SolvencyCone};
use crate::config::{ExperimentConfig, ValueMethod};
use crate::error::{Error, Result};
use crate::market::{build_tree, path_rng, sample_with, to_monetary};
use crate::path::{GridPath, PathKind};
use crate::portfolio::{repair_strategy, wealth, Strategy};
use crate::price_system::{find_cps, CpsOutcome};

pub const RESULTS_HEADER: &str = "method,n,x,gamma,lambda,value,stderr,gap,seed";

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn cone_of(cfg: &ExperimentConfig) -> Result<SolvencyCone> {
    SolvencyCone::from_costs(&cfg.costs)
}

/// Action grid from the `[grid]` section; the default step is a twentieth
/// of the liquidation value of the initial position.
pub fn grid_of(cfg: &ExperimentConfig, cone: &SolvencyCone) -> Result<ActionGrid> {
    let step = match cfg.grid.step {
        Some(s) => s,
        None => {
            let l = cone.liquidation_value(&to_monetary(&cfg.model.s0, &cfg.x)?)?;
            if !(l > 0.0) {
                return Err(Error::Grid(format!("default step needs a positive liquidation value, got {l}; set grid.step")));
            }
            l / 20.0
        }
    };
    Ok(ActionGrid::new(cone, step, cfg.grid.cap)?.with_liquidation(cfg.grid.liquidate))
}

/// Generators, dual generators, the `Λ` section and properness. Writes
/// `generators.txt` and, when available, `dual_generators.txt`.
pub fn cmd_cone(cfg: &ExperimentConfig) -> Result<String> {
    let k = cone_of(cfg)?;
    let mut s = String::new();
    let _ = writeln!(s, "dimension: {}", k.dim());
    let _ = writeln!(s, "proper: {}", if k.is_proper() { "yes" } else { "no" });
    let shape = match k.dual_generators() {
        Some(duals) if duals.len() == 1 => "half-space",
        _ if k.dim() == 2 && k.is_proper() => "sector",
        _ => "polyhedral cone",
    };
    let _ = writeln!(s, "shape: {shape}");
    let _ = writeln!(s, "generators ({}):", k.generators().len());
    s.push_str(&indent(&k.generators_text()));
    write(&cfg.out, "generators.txt", &k.generators_text())?;
    match k.dual_generators() {
        Some(duals) => {
            let _ = writeln!(s, "dual generators ({}):", duals.len());
            s.push_str(&indent(&rays_text(duals)));
            write(&cfg.out, "dual_generators.txt", &rays_text(duals))?;
        }
        None => {
            let _ = writeln!(
                s,
                "dual generators: not enumerated in dimension {}; LP-only mode (membership and liquidation by linear programming)",
                k.dim()
            );
        }
    }
    let section = k.section();
    let _ = writeln!(
        s,
        "section vertices ({}, {}):",
        section.vertices().len(),
        if section.is_exact() { "exact" } else { "sampled" }
    );
    s.push_str(&indent(&rays_text(section.vertices())));
    Ok(s)
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("  {l}\n")).collect()
}

fn results_row(cfg: &ExperimentConfig, r: &ValueReport, n: usize, stderr: Option<f64>, gap: Option<f64>) -> String {
    let x: Vec<String> = cfg.x.iter().map(|v| v.to_string()).collect();
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        r.method.name(),
        n,
        x.join(";"),
        cfg.utility.gamma,
        cfg.costs.max_rate(),
        r.value,
        opt(stderr),
        opt(gap),
        cfg.seed
    )
}

/// Appends rows to `results.csv`, writing the header for a new file.
fn append_results(dir: &Path, rows: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("results.csv");
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{RESULTS_HEADER}")?;
    }
    f.write_all(rows.as_bytes())?;
    Ok(())
}

/// Value of the configured problem by `method`; `both` also reports the
/// enumeration-minus-dp gap.
pub fn cmd_value(cfg: &ExperimentConfig, method: ValueMethod) -> Result<String> {
    let k = cone_of(cfg)?;
    let mut rows = String::new();
    let mut s = String::new();
    if method == ValueMethod::Mc {
        let opts = McOptions {
            paths: cfg.mc_paths,
            steps: cfg.mc_steps,
            seed: cfg.seed,
        };
        let r = mc_value(&cfg.model, &cfg.x, &k, &cfg.utility, &cfg.policy, &opts)?;
        rows += &results_row(cfg, &r, cfg.mc_steps, Some(r.stderr), None);
        let _ = writeln!(s, "mc: {} ± {} ({} paths, {} ruined)", r.value, r.stderr, cfg.mc_paths, r.ruined);
    } else {
        let tree = build_tree(&cfg.model, cfg.tree_steps, cfg.layout)?;
        let grid = grid_of(cfg, &k)?;
        let n = cfg.tree_steps;
        let e = match method {
            ValueMethod::Enumerate | ValueMethod::Both => Some(enumerate_value(&tree, &cfg.x, &k, &grid, &cfg.utility)?),
            _ => None,
        };
        let d = match method {
            ValueMethod::Dp | ValueMethod::Both => Some(dp_value(&tree, &cfg.x, &k, &grid, &cfg.utility, &cfg.dp)?),
            _ => None,
        };
        if let Some(e) = &e {
            rows += &results_row(cfg, e, n, None, None);
            let _ = writeln!(s, "enumerate: {}", e.value);
        }
        if let Some(d) = &d {
            let gap = e.as_ref().map(|e| e.value - d.value);
            rows += &results_row(cfg, d, n, None, gap);
            let _ = write!(
                s,
                "dp: {} (interpolation bound {}, {})",
                d.value,
                d.interpolation_bound.unwrap_or(0.0),
                if d.bound_rigorous { "rigorous" } else { "box truncated" }
            );
            if let Some(g) = gap {
                let _ = write!(s, ", gap {g}");
            }
            s.push('\n');
        }
    }
    append_results(&cfg.out, &rows)?;
    Ok(s)
}

/// Convergence study over `converge.ns`. Writes `convergence.csv` and
/// `convergence_summary.txt`.
pub fn cmd_converge(cfg: &ExperimentConfig) -> Result<String> {
    let k = cone_of(cfg)?;
    let mut options = cfg.study.clone();
    options.seed = cfg.seed;
    let study = convergence_study(&cfg.model, &cfg.x, &k, &cfg.utility, &options)?;
    let csv = study.to_csv();
    let summary = study.summary();
    write(&cfg.out, "convergence.csv", &csv)?;
    write(&cfg.out, "convergence_summary.txt", &format!("{summary}\n"))?;
    Ok(format!("{csv}{summary}\n"))
}

/// Scripted leveraged purchase on a falling price path, before and after
/// repair. Writes `repair_before.csv`, `repair_after.csv` (monetary wealth),
/// the two strategies, and `repair_tau.txt`.
pub fn cmd_repair_demo(cfg: &ExperimentConfig) -> Result<String> {
    let k = cone_of(cfg)?;
    let d = cfg.model.d;
    let rc = &cfg.repair;
    let values: Vec<Vec<f64>> = rc
        .prices
        .iter()
        .map(|&p| {
            let mut s = cfg.model.s0.clone();
            s[1] = p;
            s
        })
        .collect();
    let m = values.len() - 1;
    let prices = GridPath::new(cfg.model.horizon, values, PathKind::PiecewiseLinear)?;
    let buy = k
        .transfers()
        .iter()
        .find(|g| g[1] == -1.0 && g[0] > 0.0)
        .cloned()
        .ok_or_else(|| Error::MalformedCone("no cash-to-asset-2 transfer".into()))?;
    let v0 = to_monetary(prices.at(0), &cfg.x)?;
    let solvent_after = |c: f64| -> Result<bool> {
        let v: Vec<f64> = v0.iter().zip(&buy).map(|(a, g)| a - c * g).collect();
        Ok(k.liquidation_fast(&v)? >= 0.0)
    };
    let limit = 100.0 * k.purchase_fast(&v0)?.max(1.0);
    let (mut lo, mut hi) = (0.0, limit);
    if !solvent_after(hi)? {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if solvent_after(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        lo = hi;
    }
    let c = rc.leverage * lo;
    let mut trades = vec![vec![0.0; d]; m + 1];
    trades[0] = buy.iter().map(|g| -c * g).collect();
    let strategy = Strategy::from_trades(cfg.model.horizon, &trades, &k)?;
    let before = wealth(&cfg.x, &strategy, &prices)?;
    let repaired = repair_strategy(&cfg.x, &strategy, &prices, &k, rc.margin)?;
    let after = wealth(&cfg.x, &repaired.strategy, &prices)?;
    write(&cfg.out, "repair_before.csv", &before.monetary.to_csv())?;
    write(&cfg.out, "repair_after.csv", &after.monetary.to_csv())?;
    write(&cfg.out, "repair_strategy_before.csv", &strategy.to_csv(&cfg.cost_source))?;
    write(&cfg.out, "repair_strategy_after.csv", &repaired.strategy.to_csv(&cfg.cost_source))?;
    let tau = match repaired.tau {
        Some(t) => format!("tau = {t}\nt = {}\n", prices.time(t)),
        None => "tau = none\n".to_string(),
    };
    write(&cfg.out, "repair_tau.txt", &tau)?;
    let terminal = |w: &GridPath| k.liquidation_fast(w.terminal());
    Ok(format!(
        "purchase of {c} in asset 2 at time 0 ({:.0}% of the solvent maximum)\n{tau}terminal liquidation value before {} after {}\n",
        100.0 * rc.leverage,
        terminal(&before.monetary)?,
        terminal(&after.monetary)?
    ))
}

/// Writes the configured event tree as `tree.csv`, `simulate.paths` sampled
/// price paths under `paths/`, and a consistent price system `cps.csv` when
/// one exists at `converge.cps_eps`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<String> {
    let k = cone_of(cfg)?;
    let tree = build_tree(&cfg.model, cfg.tree_steps, cfg.layout)?;
    write(&cfg.out, "tree.csv", &tree.to_csv())?;
    let dir = cfg.out.join("paths");
    for i in 0..cfg.simulate_paths {
        let mut rng = path_rng(cfg.seed, i as u64);
        let sc = sample_with(&cfg.model, cfg.mc_steps, &mut rng)?;
        write(&dir, &format!("prices_{i}.csv"), &sc.prices.to_csv())?;
    }
    let mut s = format!("tree: {} nodes, {} steps\npaths: {}\n", tree.len(), tree.steps(), cfg.simulate_paths);
    if k.is_proper() {
        match find_cps(&tree, &k, cfg.study.cps_eps)? {
            CpsOutcome::Found(ps) => {
                write(&cfg.out, "cps.csv", &ps.to_csv())?;
                let _ = writeln!(s, "consistent price system: found, slack {}", ps.slack);
            }
            CpsOutcome::Infeasible { reason, .. } => {
                let _ = writeln!(s, "consistent price system: none ({reason})");
            }
        }
    } else {
        s.push_str("consistent price system: cone is not proper, none exists\n");
    }
    Ok(s)
}

/// Value on the configured tree against its product with an independent
/// coin. Writes `randomization.csv`.
pub fn cmd_randomize(cfg: &ExperimentConfig) -> Result<String> {
    let k = cone_of(cfg)?;
    let tree = build_tree(&cfg.model, cfg.tree_steps, cfg.layout)?;
    let grid = grid_of(cfg, &k)?;
    let r = randomization_test(&tree, &cfg.x, &k, &cfg.utility, &grid, cfg.coin_arity)?;
    let per: Vec<String> = r.per_coin.iter().map(|v| v.to_string()).collect();
    let gap = r.correlated_gap.map(|v| v.to_string()).unwrap_or_default();
    let csv = format!(
        "base,product,averaged,correlated_gap,per_coin\n{},{},{},{},{}\n",
        r.base,
        r.product,
        r.averaged,
        gap,
        per.join(";")
    );
    write(&cfg.out, "randomization.csv", &csv)?;
    Ok(format!(
        "{csv}independent coin: {}\n",
        if r.holds(1e-10) { "values agree" } else { "values differ" }
    ))
}
