use std::fmt::Write as _;

use crate::cone::SolvencyCone;
use crate::error::{Error, Result};
use crate::market::{build_tree, EventTree, ModelKind, ModelSpec, TreeLayout, TreeNode};
use crate::price_system::{find_cps, CpsOutcome};
use crate::utility::UtilitySpec;

use super::{
    dp_value, enumerate_from, enumerate_value, mc_value, monetary, ActionGrid, BoxMode, DpOptions, McOptions, Policy,
};

/// Status of the consistent price system search on one tree.
#[derive(Debug, Clone, PartialEq)]
pub enum CpsStatus {
    Found { slack: f64 },
    Infeasible(String),
    /// `K` is a half-space; no strictly consistent system exists.
    Frictionless,
}

impl CpsStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CpsStatus::Found { .. } => "found",
            CpsStatus::Infeasible(_) => "infeasible",
            CpsStatus::Frictionless => "frictionless",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub value: f64,
    /// `|u_n − u_prev|` against the previous row.
    pub increment: Option<f64>,
    pub interpolation_bound: f64,
    pub bound_rigorous: bool,
    pub cps: CpsStatus,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Whether successive increments never grow.
    pub monotone: bool,
    /// Best Monte Carlo value on the continuous model among the policy
    /// family, with its standard error and name; a lower bracket for the
    /// limit.
    pub lower_bracket: Option<(f64, f64, String)>,
    /// `U(ℓ(x))`, which every value dominates.
    pub liquidation_floor: f64,
}

impl ConvergenceStudy {
    pub fn last_increment(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.increment)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let incs: Vec<String> = self.rows.iter().filter_map(|r| r.increment).map(|v| format!("{v:.3e}")).collect();
        let _ = write!(
            s,
            "Cauchy evidence: {} tree values, increments [{}], {}",
            self.rows.len(),
            incs.join(", "),
            if incs.is_empty() {
                "no increments"
            } else if self.monotone {
                "non-increasing"
            } else {
                "not monotone"
            }
        );
        let floor = self.liquidation_floor;
        if !self.rows.is_empty() && self.rows.iter().all(|r| (r.value - floor).abs() <= 1e-12 * floor.abs().max(1.0)) {
            let _ = write!(s, "; every value equals the liquidate-now floor {floor:.6}");
        }
        if let Some((v, se, name)) = &self.lower_bracket {
            let _ = write!(s, "; lower bracket {v:.6} ± {se:.1e} ({name})");
        }
        s
    }

    /// `n,value,increment,bound,rigorous,cps`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,value,increment,bound,rigorous,cps\n");
        for r in &self.rows {
            let inc = r.increment.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.n,
                r.value,
                inc,
                r.interpolation_bound,
                r.bound_rigorous,
                r.cps.label()
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub ns: Vec<usize>,
    /// Action step; `ℓ(x)/20` when absent.
    pub step: Option<f64>,
    pub cap: usize,
    pub dp: DpOptions,
    pub cps_eps: f64,
    /// Paths for the lower bracket; 0 skips it.
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub seed: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            ns: vec![2, 4, 8, 16],
            step: None,
            cap: super::grid::DEFAULT_CAP,
            dp: DpOptions {
                lattice: 41,
                box_mode: BoxMode::Capped(3.0),
                ..DpOptions::default()
            },
            cps_eps: 1e-3,
            mc_paths: 2000,
            mc_steps: 64,
            seed: 0,
        }
    }
}

/// Values on recombining walk trees calibrated to `target` for each `n`,
/// with their successive increments. The continuous-model value is only
/// bracketed from below by Monte Carlo on `target` itself.
pub fn convergence_study(
    target: &ModelSpec,
    x: &[f64],
    cone: &SolvencyCone,
    utility: &UtilitySpec,
    options: &StudyOptions,
) -> Result<ConvergenceStudy> {
    if options.ns.is_empty() {
        return Err(Error::Model("no tree sizes given".into()));
    }
    let v0 = monetary(&target.s0, x);
    let grid = match options.step {
        Some(step) => ActionGrid::new(cone, step, options.cap)?,
        None => {
            let l = cone.liquidation_value(&v0)?;
            if !(l > 0.0) {
                return Err(Error::Grid(format!("default step needs ℓ(x) > 0, got {l}")));
            }
            ActionGrid::new(cone, l / 20.0, options.cap)?
        }
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(options.ns.len());
    for &n in &options.ns {
        let tree = build_tree(target, n, TreeLayout::Recombining)?;
        let r = dp_value(&tree, x, cone, &grid, utility, &options.dp)?;
        let cps = if !cone.is_proper() {
            CpsStatus::Frictionless
        } else {
            match find_cps(&tree, cone, options.cps_eps)? {
                CpsOutcome::Found(ps) => CpsStatus::Found { slack: ps.slack },
                CpsOutcome::Infeasible { reason, .. } => CpsStatus::Infeasible(reason),
            }
        };
        let increment = rows.last().map(|p| (r.value - p.value).abs());
        rows.push(ConvergenceRow {
            n,
            value: r.value,
            increment,
            interpolation_bound: r.interpolation_bound.unwrap_or(0.0),
            bound_rigorous: r.bound_rigorous,
            cps,
        });
    }
    let incs: Vec<f64> = rows.iter().filter_map(|r| r.increment).collect();
    let monotone = incs.windows(2).all(|w| w[1] <= w[0]);
    let liquidation_floor = utility.of_liquidation(cone.liquidation_fast(&v0)?);
    let lower_bracket = if options.mc_paths > 0 {
        Some(best_policy(target, x, cone, utility, options, liquidation_floor)?)
    } else {
        None
    };
    Ok(ConvergenceStudy {
        rows,
        monotone,
        lower_bracket,
        liquidation_floor,
    })
}

/// Best of liquidate-now, hold, and a few no-trade bands on the continuous
/// model.
fn best_policy(
    target: &ModelSpec,
    x: &[f64],
    cone: &SolvencyCone,
    utility: &UtilitySpec,
    options: &StudyOptions,
    liquidation_floor: f64,
) -> Result<(f64, f64, String)> {
    let mut spec = target.clone();
    if spec.kind == ModelKind::ScaledWalk {
        spec.kind = ModelKind::Gbm;
    }
    let mc = McOptions {
        paths: options.mc_paths,
        steps: options.mc_steps,
        seed: options.seed,
    };
    let mut best = (liquidation_floor, 0.0, "liquidate".to_string());
    let mut candidates = vec![("hold".to_string(), Policy::Zero)];
    if spec.d == 2 {
        for (lo, hi) in [(0.0, 0.1), (0.1, 0.3), (0.2, 0.5), (0.4, 0.7)] {
            candidates.push((format!("band[{lo},{hi}]"), Policy::Band { lower: lo, upper: hi }));
        }
    }
    for (name, policy) in candidates {
        let r = mc_value(&spec, x, cone, utility, &policy, &mc)?;
        if r.value > best.0 {
            best = (r.value, r.stderr, name);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct RandomizationReport {
    pub base: f64,
    /// Value on the product with an independent coin revealed at time 0.
    pub product: f64,
    /// Optimal value inside each coin branch.
    pub per_coin: Vec<f64>,
    /// Coin-probability average of `per_coin`.
    pub averaged: f64,
    /// `product − base` for a coin that reveals the first move; `None` when
    /// that tree is over budget.
    pub correlated_gap: Option<f64>,
}

impl RandomizationReport {
    /// Independent coin changes nothing, and averaging the per-coin optima
    /// recovers the value.
    pub fn holds(&self, tol: f64) -> bool {
        (self.product - self.base).abs() <= tol && (self.averaged - self.base).abs() <= tol
    }
}

/// Compares the value on `tree` with the value on its product with an
/// independent uniform coin of `arity` outcomes.
pub fn randomization_test(
    tree: &EventTree,
    x: &[f64],
    cone: &SolvencyCone,
    utility: &UtilitySpec,
    grid: &ActionGrid,
    arity: usize,
) -> Result<RandomizationReport> {
    if grid.root_offset().is_some() {
        return Err(Error::Grid("randomization compares trees with different roots; drop the root offset".into()));
    }
    let base = enumerate_value(tree, x, cone, grid, utility)?.value;
    let product_tree = tree.with_coin(arity)?;
    let product = enumerate_value(&product_tree, x, cone, grid, utility)?.value;
    let root = product_tree.node(0);
    let mut per_coin = Vec::with_capacity(arity);
    let mut averaged = 0.0;
    for &(c, p) in &root.children {
        let v = enumerate_from(&product_tree, c, x, cone, grid, utility)?.value;
        per_coin.push(v);
        averaged += p * v;
    }
    let correlated_gap = match correlated_coin_tree(tree)
        .and_then(|t| enumerate_value(&t, x, cone, grid, utility))
    {
        Ok(r) => Some(r.value - base),
        Err(Error::Budget { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(RandomizationReport {
        base,
        product,
        per_coin,
        averaged,
        correlated_gap,
    })
}

/// Negative control: a coin revealed at time 0 that equals the first move of
/// the tree. Its value can exceed the original.
pub fn correlated_coin_tree(tree: &EventTree) -> Result<EventTree> {
    let first = tree.node(0).children.clone();
    if first.is_empty() {
        return tree.with_coin(1);
    }
    let mut nodes = vec![TreeNode {
        depth: 0,
        prices: tree.node(0).prices.clone(),
        label: 0,
        children: Vec::new(),
        tradable: false,
        reach: 1.0,
    }];
    for (k, &(c, p)) in first.iter().enumerate() {
        let offset = nodes.len();
        nodes[0].children.push((offset, p));
        for (i, n) in tree.nodes().iter().enumerate() {
            let mut copy = n.clone();
            copy.label = k;
            copy.children = if i == 0 {
                vec![(c + offset, 1.0)]
            } else {
                n.children.iter().map(|&(ch, q)| (ch + offset, q)).collect()
            };
            nodes.push(copy);
        }
    }
    EventTree::from_nodes(nodes, tree.steps(), tree.horizon())
}
