//! Bellman values `sup E[U(V_T)]` over admissible strategies.
//!
//! On an event tree the state carried into a node is the physical holding
//! `h`. At a tradable node with prices `S` an action is a monetary trade `a`;
//! it is admissible when `S ⊙ h + a` is solvent and the new holding
//! `h' = h + a/S` is solvent at every child's prices. Besides the grid
//! actions every tradable node offers "liquidate now", which moves the whole
//! position into `ℓ(S ⊙ h) e₁`. Leaves do not trade: with a utility of the
//! liquidation value, trading at the last date cannot help.

mod dp;
mod enumerate;
mod grid;
mod mc;
mod study;

pub use dp::{dp_value, BoxMode, DpOptions};
pub use enumerate::{enumerate_from, enumerate_value, enumeration_work, ENUMERATION_BUDGET};
pub use grid::{ActionGrid, DEFAULT_CAP};
pub use mc::{mc_value, McOptions, Policy, TreePolicy};
pub use study::{
    convergence_study, correlated_coin_tree, randomization_test, ConvergenceRow, CpsStatus, ConvergenceStudy, RandomizationReport, StudyOptions,
};

use crate::cone::SolvencyCone;
use crate::market::TreeNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Enumerate,
    Dp,
    Mc,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Enumerate => "enumerate",
            Method::Dp => "dp",
            Method::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValueReport {
    pub value: f64,
    pub method: Method,
    /// Monte Carlo standard error; 0 for exact methods.
    pub stderr: f64,
    /// `enumerate − dp` when both ran on the same instance.
    pub gap: Option<f64>,
    /// Bound on `|dp − enumerate|` from the interpolation analysis.
    pub interpolation_bound: Option<f64>,
    /// Whether the interpolation bound is rigorous (false when a capped box
    /// cut off reachable holdings).
    pub bound_rigorous: bool,
    pub box_truncated: bool,
    /// Optimal trade at the root.
    pub root_action: Option<Vec<f64>>,
    /// Optimal decisions along the tree, when requested.
    pub policy: Option<TreePolicy>,
    /// Monte Carlo paths whose repair failed (valued at zero).
    pub ruined: usize,
}

impl ValueReport {
    pub(crate) fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            method,
            stderr: 0.0,
            gap: None,
            interpolation_bound: None,
            bound_rigorous: true,
            box_truncated: false,
            root_action: None,
            policy: None,
            ruined: 0,
        }
    }
}

/// Relative tolerance of the solvency test used inside the solvers; it scales
/// with the position so that the homogeneity of the problem is preserved.
const SOLVENT_RTOL: f64 = 1e-12;

pub(crate) fn solvent(cone: &SolvencyCone, v: &[f64]) -> bool {
    let scale: f64 = v.iter().map(|x| x.abs()).sum();
    match cone.dual_generators() {
        Some(duals) => duals
            .iter()
            .all(|w| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() >= -SOLVENT_RTOL * scale),
        None => cone.contains(v, SOLVENT_RTOL * scale.max(1e-300)).unwrap_or(false),
    }
}

pub(crate) fn liquidation(cone: &SolvencyCone, v: &[f64]) -> f64 {
    cone.liquidation_fast(v).unwrap_or(f64::NEG_INFINITY)
}

pub(crate) fn monetary(prices: &[f64], h: &[f64]) -> Vec<f64> {
    h.iter().zip(prices).map(|(a, b)| a * b).collect()
}

/// Candidate trade at a node.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Move<'a> {
    Grid(&'a [f64]),
    Liquidate,
}

/// Applies a move to the holdings carried into `node`; `None` when the
/// result is insolvent there or at any child.
pub(crate) fn step(
    cone: &SolvencyCone,
    nodes: &[TreeNode],
    node: &TreeNode,
    h: &[f64],
    mv: Move<'_>,
    offset: Option<&[f64]>,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let v = monetary(&node.prices, h);
    let trade: Vec<f64> = match mv {
        Move::Grid(a) => match offset {
            Some(o) => a.iter().zip(o).map(|(x, y)| x + y).collect(),
            None => a.to_vec(),
        },
        Move::Liquidate => {
            let l = liquidation(cone, &v);
            if !(l >= 0.0) {
                return None;
            }
            let mut t: Vec<f64> = v.iter().map(|x| -x).collect();
            t[0] += l;
            t
        }
    };
    let after: Vec<f64> = v.iter().zip(&trade).map(|(a, b)| a + b).collect();
    if !solvent(cone, &after) {
        return None;
    }
    let h2: Vec<f64> = after.iter().zip(&node.prices).map(|(a, s)| a / s).collect();
    for &(c, _) in &node.children {
        if !solvent(cone, &monetary(&nodes[c].prices, &h2)) {
            return None;
        }
    }
    Some((h2, trade))
}

/// `a < b` in lexicographic order.
pub(crate) fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}
