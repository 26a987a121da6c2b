//! Consistent price systems on event trees and the certificates built on them.
//!
//! A price system is a nonnegative martingale `Z` on the tree with
//! `Z¹ = 1` at the root and `Z/S` in the ε-interior of `K*` at every node.
//! The Euclidean ε-interior is not linear, so [`find_cps`] works with the
//! stronger linear condition
//!
//! `g·y − ε ‖g‖₁ Σᵢ yⁱ ≥ t` for every generator `g` of `K`, with `y = Z/S ≥ 0`,
//!
//! and maximises the common slack `t`. Because `|g|₂ ≤ ‖g‖₁` and
//! `|y|₂ ≤ Σᵢ yⁱ`, a positive slack gives `g·y > ε|g||y|`, the Euclidean
//! condition at the same ε. It also gives `−y·ΔB ≥ ε Z¹ ‖ΔB‖₁` for every
//! trade `ΔB ∈ −K`, which yields the variation bound
//! `E_Q[Var B_T] ≤ ℘(S₀ ⊙ x)/ε` with the coordinate-sum variation.

use std::fmt::Write as _;

use crate::cone::SolvencyCone;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, Relation, Sense};
use crate::market::{to_monetary, EventTree};
use crate::portfolio::TreeStrategy;

/// Leaf floor on `Z¹` used as the finite-tree reading of contiguity.
pub const CONTIGUITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PriceSystem {
    /// `Z` per node.
    pub z: Vec<Vec<f64>>,
    pub eps: f64,
    /// Smallest slack of the linear interiority constraints.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub enum CpsOutcome {
    Found(PriceSystem),
    /// No system at this ε. `certificate` holds Farkas multipliers for the
    /// interiority program when the linear program is infeasible.
    Infeasible { certificate: Option<Vec<f64>>, reason: String },
}

/// Maximum-slack price system by linear programming.
pub fn find_cps(tree: &EventTree, cone: &SolvencyCone, eps: f64) -> Result<CpsOutcome> {
    if !cone.is_proper() {
        return Err(Error::ImproperCone);
    }
    if !(eps > 0.0) {
        return Err(Error::Numerical(format!("eps must be positive, got {eps}")));
    }
    let d = tree.dim();
    let n = tree.len();
    let t = n * d;
    let var = |node: usize, i: usize| node * d + i;
    let mut lp = LinearProgram::new(t + 1, Sense::Maximize);
    lp.set_objective_coeff(t, 1.0);
    lp.add_sparse(&[(var(0, 0), 1.0)], Relation::Eq, 1.0);
    for (id, node) in tree.nodes().iter().enumerate() {
        if node.children.is_empty() {
            continue;
        }
        for i in 0..d {
            let mut row = vec![(var(id, i), 1.0)];
            row.extend(node.children.iter().map(|&(c, p)| (var(c, i), -p)));
            lp.add_sparse(&row, Relation::Eq, 0.0);
        }
    }
    for (id, node) in tree.nodes().iter().enumerate() {
        for g in cone.generators() {
            let g1: f64 = g.iter().map(|v| v.abs()).sum();
            let mut row: Vec<(usize, f64)> = (0..d)
                .map(|i| (var(id, i), (g[i] - eps * g1) / node.prices[i]))
                .filter(|&(_, c)| c != 0.0)
                .collect();
            row.push((t, -1.0));
            lp.add_sparse(&row, Relation::Ge, 0.0);
        }
    }
    lp.add_sparse(&[(t, 1.0)], Relation::Le, 1.0);
    match lp.solve() {
        Ok(sol) => {
            let slack = sol.x[t];
            if slack <= 1e-12 {
                return Ok(CpsOutcome::Infeasible {
                    certificate: None,
                    reason: format!("best interiority slack {slack:.3e} is not positive"),
                });
            }
            let z = (0..n).map(|id| (0..d).map(|i| sol.x[var(id, i)]).collect()).collect();
            Ok(CpsOutcome::Found(PriceSystem { z, eps, slack }))
        }
        Err(LpError::Infeasible { certificate, .. }) => {
            let verified = lp.check_farkas(&certificate, 1e-9).is_some();
            Ok(CpsOutcome::Infeasible {
                certificate: verified.then_some(certificate),
                reason: if verified {
                    "interiority program is infeasible (Farkas certificate verified)".into()
                } else {
                    "interiority program is infeasible".into()
                },
            })
        }
        Err(e) => Err(e.into()),
    }
}

impl PriceSystem {
    /// Re-checks the martingale property, the normalisation, the Euclidean
    /// ε-interior at every node and the leaf floor on `Z¹`.
    pub fn verify(&self, tree: &EventTree, cone: &SolvencyCone) -> Result<()> {
        if self.z.len() != tree.len() {
            return Err(Error::Dimension {
                expected: tree.len(),
                got: self.z.len(),
            });
        }
        if (self.z[0][0] - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!("root numeraire weight {} is not 1", self.z[0][0])));
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            if !node.children.is_empty() {
                for i in 0..tree.dim() {
                    let e: f64 = node.children.iter().map(|&(c, p)| p * self.z[c][i]).sum();
                    if (e - self.z[id][i]).abs() > 1e-10 * (1.0 + self.z[id][i].abs()) {
                        return Err(Error::Numerical(format!("martingale property fails at node {id}")));
                    }
                }
            }
            let y: Vec<f64> = self.z[id].iter().zip(&node.prices).map(|(z, s)| z / s).collect();
            if !cone.eps_interior_dual(&y, self.eps)? {
                return Err(Error::Numerical(format!("Z/S leaves the eps-interior of K* at node {id}")));
            }
        }
        let floor = self.leaf_floor(tree);
        if floor < CONTIGUITY_FLOOR {
            return Err(Error::Numerical(format!("leaf numeraire weight {floor:.3e} below the contiguity floor")));
        }
        Ok(())
    }

    /// Smallest `Z¹` over leaves.
    pub fn leaf_floor(&self, tree: &EventTree) -> f64 {
        tree.leaves().map(|l| self.z[l][0]).fold(f64::INFINITY, f64::min)
    }

    /// `E[(Z¹_T)^{1−q}]`, finite on any tree whose leaves pass the floor.
    pub fn negative_moment(&self, tree: &EventTree, q: f64) -> f64 {
        tree.leaves().map(|l| tree.node(l).reach * self.z[l][0].powf(1.0 - q)).sum()
    }

    /// `node_id,Z1,...,Zd`.
    pub fn to_csv(&self) -> String {
        let d = self.z.first().map(Vec::len).unwrap_or(0);
        let cols: Vec<String> = (1..=d).map(|i| format!("Z{i}")).collect();
        let mut s = format!("node_id,{}\n", cols.join(","));
        for (id, z) in self.z.iter().enumerate() {
            let vals: Vec<String> = z.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{id},{}", vals.join(","));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SupermartingaleReport {
    /// Nodes where `E[Z·V̂ | node]` exceeds `Z·V̂` (the root also compares
    /// against `Z₀·x`).
    pub violations: Vec<usize>,
    pub worst_excess: f64,
    /// `E[Σ −(Z/S)·ΔB]`.
    pub trading_cost: f64,
    /// `Z₀·x − E[Z_T·V̂_T]`.
    pub budget: f64,
}

impl SupermartingaleReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.trading_cost <= self.budget + 1e-10
    }
}

/// Node-exact check that `Z·V̂` is a supermartingale under a tree strategy,
/// plus the integrated inequality on the cost of trading.
pub fn verify_supermartingale(tree: &EventTree, ps: &PriceSystem, x: &[f64], strategy: &TreeStrategy) -> Result<SupermartingaleReport> {
    let hold = strategy.holdings(tree, x)?;
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(u, v)| u * v).sum() };
    let zv: Vec<f64> = (0..tree.len()).map(|id| dot(&ps.z[id], &hold[id])).collect();
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let root_excess = zv[0] - dot(&ps.z[0], x);
    worst = worst.max(root_excess);
    if root_excess > 1e-10 {
        violations.push(0);
    }
    for (id, node) in tree.nodes().iter().enumerate() {
        if node.children.is_empty() {
            continue;
        }
        let e: f64 = node.children.iter().map(|&(c, p)| p * zv[c]).sum();
        let excess = e - zv[id];
        worst = worst.max(excess);
        if excess > 1e-10 * (1.0 + zv[id].abs()) && !violations.contains(&id) {
            violations.push(id);
        }
    }
    let mut trading_cost = 0.0;
    for (id, node) in tree.nodes().iter().enumerate() {
        let y: Vec<f64> = ps.z[id].iter().zip(&node.prices).map(|(z, s)| z / s).collect();
        trading_cost -= node.reach * dot(&y, &strategy.trades[id]);
    }
    let terminal: f64 = tree.leaves().map(|l| tree.node(l).reach * zv[l]).sum();
    Ok(SupermartingaleReport {
        violations,
        worst_excess: worst,
        trading_cost,
        budget: dot(&ps.z[0], x) - terminal,
    })
}

#[derive(Debug, Clone)]
pub struct VariationReport {
    /// `E_Q[Var B_T]` per strategy, `Q = Z¹_T P`.
    pub expected_variation: Vec<f64>,
    /// `℘(S₀ ⊙ x)/ε`.
    pub bound: f64,
    /// Indices of strategies exceeding the bound by more than 1e-9.
    pub violations: Vec<usize>,
}

/// Expected total variation under `Q = Z¹_T P` against `℘(x)/ε`.
pub fn variation_bound_check(
    tree: &EventTree,
    cone: &SolvencyCone,
    ps: &PriceSystem,
    x: &[f64],
    strategies: &[TreeStrategy],
) -> Result<VariationReport> {
    let bound = cone.purchase_value(&to_monetary(&tree.node(0).prices, x)?)? / ps.eps;
    let mut expected_variation = Vec::with_capacity(strategies.len());
    let mut violations = Vec::new();
    for (k, s) in strategies.iter().enumerate() {
        let var = s.running_variation(tree)?;
        let ev: f64 = tree.leaves().map(|l| ps.z[l][0] * tree.node(l).reach * var[l]).sum();
        if ev > bound + 1e-9 {
            violations.push(k);
        }
        expected_variation.push(ev);
    }
    Ok(VariationReport {
        expected_variation,
        bound,
        violations,
    })
}

/// `Q(Var B_T > c)` for a tree strategy.
pub fn variation_tail(tree: &EventTree, ps: &PriceSystem, strategy: &TreeStrategy, c: f64) -> Result<f64> {
    let var = strategy.running_variation(tree)?;
    Ok(tree
        .leaves()
        .filter(|&l| var[l] > c)
        .map(|l| ps.z[l][0] * tree.node(l).reach)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::CostMatrix;
    use crate::market::TreeNode;

    fn cone(rate: f64) -> SolvencyCone {
        SolvencyCone::from_costs(&CostMatrix::uniform(2, rate).unwrap()).unwrap()
    }

    fn one_step(up: f64, down: f64) -> EventTree {
        let node = |depth, s: f64, children| TreeNode {
            depth,
            prices: vec![1.0, s],
            label: 0,
            children,
            tradable: true,
            reach: 0.0,
        };
        EventTree::from_nodes(vec![node(0, 1.0, vec![(1, 0.5), (2, 0.5)]), node(1, up, vec![]), node(1, down, vec![])], 1, 1.0).unwrap()
    }

    #[test]
    fn price_process_is_a_price_system_on_a_martingale_tree() {
        let tree = one_step(1.2, 0.8);
        let k = cone(0.1);
        let z: Vec<Vec<f64>> = tree.nodes().iter().map(|n| n.prices.clone()).collect();
        let ps = PriceSystem { z, eps: 1e-3, slack: 0.0 };
        ps.verify(&tree, &k).unwrap();
        let CpsOutcome::Found(found) = find_cps(&tree, &k, 1e-3).unwrap() else {
            panic!("expected a price system");
        };
        found.verify(&tree, &k).unwrap();
    }

    #[test]
    fn frictionless_cone_is_rejected() {
        assert!(matches!(find_cps(&one_step(1.2, 0.8), &cone(0.0), 1e-3), Err(Error::ImproperCone)));
    }

    #[test]
    fn drift_outside_the_band_is_infeasible() {
        let out = find_cps(&one_step(2.0, 1.5), &cone(0.1), 1e-3).unwrap();
        match out {
            CpsOutcome::Infeasible { certificate, .. } => assert!(certificate.is_some()),
            CpsOutcome::Found(_) => panic!("no price system should exist"),
        }
    }

    #[test]
    fn zero_strategy_is_a_martingale() {
        let tree = one_step(1.2, 0.8);
        let k = cone(0.1);
        let CpsOutcome::Found(ps) = find_cps(&tree, &k, 1e-3).unwrap() else { panic!() };
        let r = verify_supermartingale(&tree, &ps, &[1.0, 0.5], &TreeStrategy::zero(&tree)).unwrap();
        assert!(r.holds());
        assert!(r.worst_excess.abs() < 1e-12);
        assert!(r.trading_cost.abs() < 1e-15);
    }

    #[test]
    fn liquidation_has_one_negative_increment() {
        let tree = one_step(1.2, 0.8);
        let k = cone(0.1);
        let CpsOutcome::Found(ps) = find_cps(&tree, &k, 1e-3).unwrap() else { panic!() };
        let x = [0.0, 1.0];
        let mut s = TreeStrategy::zero(&tree);
        s.trades[0] = vec![1.0 / 1.1, -1.0];
        let r = verify_supermartingale(&tree, &ps, &x, &s).unwrap();
        assert!(r.holds());
        let drop = ps.z[0][0] * (1.0 / 1.1) - ps.z[0][1];
        assert!(drop < 0.0);
        assert!((r.trading_cost + drop).abs() < 1e-12);
        assert!(r.worst_excess.abs() < 1e-12);
        let v = variation_bound_check(&tree, &k, &ps, &x, &[s]).unwrap();
        assert!((v.expected_variation[0] - (1.0 + 1.0 / 1.1)).abs() < 1e-12);
        assert!(v.violations.is_empty());
    }
}
