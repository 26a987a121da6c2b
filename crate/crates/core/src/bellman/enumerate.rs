use rayon::prelude::*;

use crate::cone::SolvencyCone;
use crate::error::{Error, Result};
use crate::market::EventTree;
use crate::utility::UtilitySpec;

use super::{lex_less, liquidation, monetary, solvent, step, ActionGrid, Method, Move, ValueReport};

/// Largest number of (history, action) evaluations enumeration will attempt.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Number of action evaluations exhaustive enumeration performs: every
/// history prefix times the actions available along it.
pub fn enumeration_work(tree: &EventTree, grid: &ActionGrid) -> u128 {
    let per_node = |tradable: bool| if tradable { grid.len() as u128 + grid.liquidates() as u128 } else { 1 };
    let mut weight = vec![0u128; tree.len()];
    weight[0] = 1;
    let mut work = 0u128;
    for id in tree.topological_order() {
        let n = tree.node(id);
        if n.children.is_empty() {
            continue;
        }
        let w = weight[id].saturating_mul(per_node(n.tradable));
        work = work.saturating_add(w);
        for &(c, _) in &n.children {
            weight[c] = weight[c].saturating_add(w);
        }
    }
    work
}

pub(crate) struct Problem<'a> {
    pub tree: &'a EventTree,
    pub cone: &'a SolvencyCone,
    pub grid: &'a ActionGrid,
    pub utility: &'a UtilitySpec,
}

impl Problem<'_> {
    /// Utility of holdings `h` at a leaf.
    pub fn terminal(&self, id: usize, h: &[f64]) -> f64 {
        let v = monetary(&self.tree.node(id).prices, h);
        self.utility.of_liquidation(liquidation(self.cone, &v))
    }

    /// Candidate moves at `id`.
    pub fn moves(&self, id: usize) -> Vec<Move<'_>> {
        let node = self.tree.node(id);
        if !node.tradable {
            return vec![Move::Grid(zero_of(self.grid))];
        }
        let mut m: Vec<Move<'_>> = self.grid.actions().iter().map(|a| Move::Grid(a)).collect();
        if self.grid.liquidates() {
            m.push(Move::Liquidate);
        }
        m
    }

    pub fn offset(&self, id: usize) -> Option<&[f64]> {
        if id == 0 && self.tree.node(0).tradable {
            self.grid.root_offset()
        } else {
            None
        }
    }

    /// Best `(value, trade)` from holdings `h` carried into `id`.
    pub fn best(&self, id: usize, h: &[f64], parallel: usize) -> Option<(f64, Vec<f64>)> {
        let node = self.tree.node(id);
        if node.children.is_empty() {
            return Some((self.terminal(id, h), vec![0.0; h.len()]));
        }
        let moves = self.moves(id);
        let eval = |mv: &Move<'_>| -> Option<(f64, Vec<f64>)> {
            let (h2, trade) = step(self.cone, self.tree.nodes(), node, h, *mv, self.offset(id))?;
            let mut total = 0.0;
            for &(c, p) in &node.children {
                let (v, _) = self.best(c, &h2, parallel.saturating_sub(1))?;
                total += p * v;
            }
            Some((total, trade))
        };
        let results: Vec<Option<(f64, Vec<f64>)>> = if parallel > 0 && moves.len() > 1 {
            moves.par_iter().map(eval).collect()
        } else {
            moves.iter().map(eval).collect()
        };
        pick(results)
    }
}

fn zero_of(grid: &ActionGrid) -> &[f64] {
    grid.actions()
        .iter()
        .find(|a| a.iter().all(|&v| v == 0.0))
        .expect("grids contain the zero action")
}

/// Highest value; ties go to the lexicographically smallest trade.
pub(crate) fn pick(results: Vec<Option<(f64, Vec<f64>)>>) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in results.into_iter().flatten() {
        best = match best {
            None => Some(r),
            Some(b) => {
                if r.0 > b.0 || (r.0 == b.0 && lex_less(&r.1, &b.1)) {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Exact maximum of `E[U(V_T)]` over every grid action profile that keeps
/// the position solvent at every node, before and after each trade.
///
/// `x` is the physical position carried into the root.
pub fn enumerate_value(tree: &EventTree, x: &[f64], cone: &SolvencyCone, grid: &ActionGrid, utility: &UtilitySpec) -> Result<ValueReport> {
    enumerate_from(tree, 0, x, cone, grid, utility)
}

/// As [`enumerate_value`] for the subtree below `node`, entered with
/// holdings `h`.
pub fn enumerate_from(
    tree: &EventTree,
    node: usize,
    h: &[f64],
    cone: &SolvencyCone,
    grid: &ActionGrid,
    utility: &UtilitySpec,
) -> Result<ValueReport> {
    if h.len() != tree.dim() || cone.dim() != tree.dim() {
        return Err(Error::Dimension {
            expected: tree.dim(),
            got: h.len(),
        });
    }
    let work = enumeration_work(tree, grid);
    if work > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            what: "enumeration work",
            size: work,
            limit: ENUMERATION_BUDGET,
        });
    }
    let v0 = monetary(&tree.node(node).prices, h);
    if !solvent(cone, &v0) {
        return Err(Error::NotInCone {
            slack: -liquidation(cone, &v0),
        });
    }
    let problem = Problem { tree, cone, grid, utility };
    let (value, trade) = problem.best(node, h, 2).ok_or(Error::NoAdmissibleProfile)?;
    let mut report = ValueReport::exact(value, Method::Enumerate);
    report.root_action = Some(trade);
    Ok(report)
}
