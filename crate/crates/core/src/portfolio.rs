//! Strategies, wealth, admissibility and the discretization and repair
//! constructions.
//!
//! Trades are in monetary units. A trade `ΔB` at a node with prices `S`
//! changes physical holdings by `ΔB / S`, and the monetary position is
//! `V = S ⊙ V̂`. The initial position `x` is given in physical units at `0−`.
//!
//! Admissibility is checked at every grid node both before the trade (old
//! holdings at the new prices) and after it. Prices are linear between
//! nodes and holdings are constant there, so the monetary position moves
//! along a segment whose endpoints are those two checked states; convexity of
//! the cone makes the check exact for the whole cell.
//!
//! # The admissibility certificate of a coarsened strategy
//!
//! For a coarse node `t_k` and `t ∈ [t_k, t_{k+1})`, write
//! `S_t ⊙ V̂ᵐ_t = S_{t_k} ⊙ V̂_{t_k} + (S_t − S_{t_k}) ⊙ V̂_{t_k} + S_t ⊙ (V̂ᵐ_t − V̂_{t_k})`.
//! The first term lies in `K`. Per coordinate the second is bounded by
//! `w(Sⁱ, T/m)(|xⁱ| + ‖1/Sⁱ‖ Var Bⁱ)` and the third by
//! `‖Sⁱ‖ w(1/Sⁱ, T/m) Var Bⁱ`. Adding `S_t ⊙ ξ` with
//! `ξⁱ = ‖1/Sⁱ‖ (w(Sⁱ, T/m)(|xⁱ| + ‖1/Sⁱ‖ Var Bⁱ) + ‖Sⁱ‖ w(1/Sⁱ, T/m) Var Bⁱ)`
//! dominates both error terms by a vector of `ℝ^d_+ ⊂ K`.

use rand::Rng;

use crate::cone::{SolvencyCone, TOL};
use crate::error::{check_dim, Error, Result};
use crate::market::{to_monetary, EventTree};
use crate::path::{modulus, piecewise_approx, stieltjes_integral, total_variation, GridPath, PathKind};

/// A K-decreasing piecewise-constant path of cumulative monetary trades with
/// `B(0−) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    path: GridPath,
}

impl Strategy {
    /// Checks that every increment lies in `−K`.
    pub fn new(path: GridPath, cone: &SolvencyCone) -> Result<Self> {
        check_dim(cone.dim(), path.dim())?;
        if path.pre0().iter().any(|&v| v != 0.0) {
            return Err(Error::Path("strategies start from 0 at time 0-".into()));
        }
        for k in 0..=path.cells() {
            let neg: Vec<f64> = path.increment(k).iter().map(|v| -v).collect();
            if !cone.contains(&neg, TOL)? {
                return Err(Error::NotDecreasing { node: k });
            }
        }
        Ok(Self { path })
    }

    /// Builds a strategy from per-node monetary trades (node 0 is the jump at 0).
    pub fn from_trades(horizon: f64, trades: &[Vec<f64>], cone: &SolvencyCone) -> Result<Self> {
        let d = cone.dim();
        let mut acc = vec![0.0; d];
        let mut values = Vec::with_capacity(trades.len());
        for t in trades {
            check_dim(d, t.len())?;
            acc.iter_mut().zip(t).for_each(|(a, b)| *a += b);
            values.push(acc.clone());
        }
        let path = GridPath::new(horizon, values, PathKind::PiecewiseConstant)?.with_pre0(vec![0.0; d])?;
        Self::new(path, cone)
    }

    pub fn zero(horizon: f64, m: usize, d: usize) -> Self {
        let path = GridPath::constant(horizon, m, vec![0.0; d], PathKind::PiecewiseConstant).expect("valid zero path");
        Self { path }
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn cells(&self) -> usize {
        self.path.cells()
    }

    pub fn trade(&self, k: usize) -> Vec<f64> {
        self.path.increment(k)
    }

    /// Total variation over the horizon, coordinate sum.
    pub fn variation(&self) -> f64 {
        total_variation(&self.path).total()
    }

    /// CSV with a reference to the cone file in the header.
    pub fn to_csv(&self, cone_file: &str) -> String {
        format!("# cone: {cone_file}\n{}", self.path.to_csv())
    }
}

#[derive(Debug, Clone)]
pub struct WealthPaths {
    pub physical: GridPath,
    pub monetary: GridPath,
    pub initial: Vec<f64>,
}

/// Physical holdings `V̂ = x + ∫ (1/S) dB` and the monetary position `S ⊙ V̂`.
pub fn wealth(x: &[f64], strategy: &Strategy, prices: &GridPath) -> Result<WealthPaths> {
    let b = strategy.path();
    check_dim(b.dim(), x.len())?;
    check_dim(b.dim(), prices.dim())?;
    if let Some(&s) = prices.values().iter().flatten().find(|&&s| !(s > 0.0)) {
        return Err(Error::NonPositivePrice(s));
    }
    let inv = prices.map(f64::recip);
    let integral = stieltjes_integral(&inv, b)?;
    let rows: Vec<Vec<f64>> = integral
        .values()
        .iter()
        .map(|r| r.iter().zip(x).map(|(a, b)| a + b).collect())
        .collect();
    let physical = GridPath::new(b.horizon(), rows, PathKind::PiecewiseConstant)?.with_pre0(x.to_vec())?;
    let money: Vec<Vec<f64>> = physical
        .values()
        .iter()
        .zip(prices.values())
        .map(|(v, s)| to_monetary(s, v))
        .collect::<Result<_>>()?;
    let monetary = GridPath::new(b.horizon(), money, PathKind::PiecewiseConstant)?.with_pre0(to_monetary(prices.at(0), x)?)?;
    Ok(WealthPaths {
        physical,
        monetary,
        initial: x.to_vec(),
    })
}

/// Where an admissibility check first failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `x ∉ K`.
    Initial,
    /// Holdings carried into node `k` are insolvent at its prices.
    BeforeTrade(usize),
    /// Holdings after the trade at node `k` are insolvent.
    AfterTrade(usize),
}

impl Violation {
    pub fn node(&self) -> Option<usize> {
        match *self {
            Violation::Initial => None,
            Violation::BeforeTrade(k) | Violation::AfterTrade(k) => Some(k),
        }
    }
}

/// `Ok(None)` when `S_t ⊙ V̂_t ∈ K` at every node before and after trading.
pub fn is_admissible(x: &[f64], strategy: &Strategy, prices: &GridPath, cone: &SolvencyCone, tol: f64) -> Result<Option<Violation>> {
    if !cone.contains_fast(x, tol)? {
        return Ok(Some(Violation::Initial));
    }
    let w = wealth(x, strategy, prices)?;
    first_violation(&w, prices, cone, tol, &vec![0.0; x.len()])
}

/// First node where `S ⊙ (V̂ − shift)` leaves `K`, before or after trading.
fn first_violation(w: &WealthPaths, prices: &GridPath, cone: &SolvencyCone, tol: f64, shift: &[f64]) -> Result<Option<Violation>> {
    let hold = w.physical.values();
    for k in 0..hold.len() {
        let before = if k == 0 { &w.initial } else { &hold[k - 1] };
        for (state, v) in [(before, Violation::BeforeTrade(k)), (&hold[k], Violation::AfterTrade(k))] {
            let shifted: Vec<f64> = state.iter().zip(shift).map(|(a, b)| a - b).collect();
            if !cone.contains_fast(&to_monetary(prices.at(k), &shifted)?, tol)? {
                return Ok(Some(v));
            }
        }
    }
    Ok(None)
}

/// Single jump at 0 to `ℓ(x) e₁`, constant afterwards.
pub fn liquidation_strategy(x: &[f64], cone: &SolvencyCone, horizon: f64, m: usize) -> Result<Strategy> {
    check_dim(cone.dim(), x.len())?;
    let slack = cone.membership_slack(x, TOL)?;
    if slack > TOL {
        return Err(Error::NotInCone { slack });
    }
    let l = cone.liquidation_value(x)?;
    let mut jump: Vec<f64> = x.iter().map(|v| -v).collect();
    jump[0] += l;
    let path = GridPath::constant(horizon, m, jump, PathKind::PiecewiseConstant)?.with_pre0(vec![0.0; x.len()])?;
    Ok(Strategy { path })
}

#[derive(Debug, Clone)]
pub struct ApproximationCertificate {
    /// Constant nonnegative correction in physical units, on the fine grid.
    pub xi: GridPath,
    pub sup_norm: f64,
}

/// Coarsens an admissible strategy to `m` cells and certifies that the
/// coarse holdings plus `ξ` stay solvent at every fine node.
pub fn discretize_strategy(
    x: &[f64],
    strategy: &Strategy,
    prices: &GridPath,
    cone: &SolvencyCone,
    m: usize,
) -> Result<(Strategy, ApproximationCertificate)> {
    let fine = strategy.cells();
    if let Some(v) = is_admissible(x, strategy, prices, cone, TOL)? {
        return Err(Error::Inadmissible { node: v.node().unwrap_or(0) });
    }
    let coarse = Strategy {
        path: piecewise_approx(strategy.path(), m)?,
    };
    for k in 0..=m {
        let neg: Vec<f64> = coarse.trade(k).iter().map(|v| -v).collect();
        if !cone.contains(&neg, TOL)? {
            return Err(Error::NotDecreasing { node: k });
        }
    }
    let d = x.len();
    let step = prices.horizon() / m as f64;
    let mut xi = vec![0.0; d];
    for i in 0..d {
        let s = prices.component(i);
        let inv = s.map(f64::recip);
        let var_i = total_variation(&strategy.path().component(i)).total();
        let inv_sup = inv.sup_norm();
        xi[i] = inv_sup * (modulus(&s, step) * (x[i].abs() + inv_sup * var_i) + s.sup_norm() * modulus(&inv, step) * var_i);
    }
    // The coarse strategy on the fine grid, to evaluate the certificate.
    let r = fine / m;
    let refined = Strategy {
        path: coarse.path.refine(r)?,
    };
    let w = wealth(x, &refined, prices)?;
    let neg_xi: Vec<f64> = xi.iter().map(|v| -v).collect();
    if let Some(v) = first_violation(&w, prices, cone, TOL, &neg_xi)? {
        return Err(Error::Numerical(format!("approximation certificate fails at {v:?}")));
    }
    let sup_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xi_path = GridPath::constant(prices.horizon(), fine, xi, PathKind::PiecewiseConstant)?;
    Ok((coarse, ApproximationCertificate { xi: xi_path, sup_norm }))
}

#[derive(Debug, Clone)]
pub struct Repair {
    pub strategy: Strategy,
    /// Node where the repaired strategy liquidates, `None` if no repair was
    /// needed.
    pub tau: Option<usize>,
}

/// Follows `C` until the first node where holdings minus `margin` per
/// coordinate are insolvent (before or after the trade), liquidates the
/// position carried into that node, and stops trading.
pub fn repair_strategy(x: &[f64], strategy: &Strategy, prices: &GridPath, cone: &SolvencyCone, margin: f64) -> Result<Repair> {
    if margin < 0.0 {
        return Err(Error::Numerical("margin must be nonnegative".into()));
    }
    let w = wealth(x, strategy, prices)?;
    let shift = vec![margin; x.len()];
    let Some(v) = first_violation(&w, prices, cone, TOL, &shift)? else {
        return Ok(Repair {
            strategy: strategy.clone(),
            tau: None,
        });
    };
    let tau = v.node().expect("wealth violations sit at nodes");
    let carried = if tau == 0 { x.to_vec() } else { w.physical.at(tau - 1).to_vec() };
    let position = to_monetary(prices.at(tau), &carried)?;
    let l = cone.liquidation_fast(&position)?;
    if l < 0.0 {
        return Err(Error::RepairFailed { node: tau, value: l });
    }
    let b = strategy.path();
    let base = if tau == 0 { vec![0.0; x.len()] } else { b.at(tau - 1).to_vec() };
    let mut frozen = base.clone();
    for (i, p) in position.iter().enumerate() {
        frozen[i] -= p;
    }
    frozen[0] += l;
    let values: Vec<Vec<f64>> = (0..=b.cells())
        .map(|k| if k < tau { b.at(k).to_vec() } else { frozen.clone() })
        .collect();
    let path = GridPath::new(b.horizon(), values, PathKind::PiecewiseConstant)?.with_pre0(vec![0.0; x.len()])?;
    Ok(Repair {
        strategy: Strategy { path },
        tau: Some(tau),
    })
}

/// A random admissible strategy: trades at random nodes along random
/// combinations of `directions` (each in `−K`), halved until every state up
/// to the next node stays solvent, with liquidation as the fallback.
pub fn random_admissible_strategy<R: Rng>(
    x: &[f64],
    prices: &GridPath,
    cone: &SolvencyCone,
    directions: &[Vec<f64>],
    trade_probability: f64,
    rng: &mut R,
) -> Result<Strategy> {
    let d = x.len();
    let m = prices.cells();
    let mut hold = x.to_vec();
    let mut trades = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let s = prices.at(k);
        let position = to_monetary(s, &hold)?;
        let mut trade = vec![0.0; d];
        if rng.random::<f64>() < trade_probability {
            let scale = cone.liquidation_fast(&position)?.max(0.0) * rng.random::<f64>();
            for dir in directions {
                let c = rng.random::<f64>() * scale / directions.len() as f64;
                trade.iter_mut().zip(dir).for_each(|(t, g)| *t += c * g);
            }
        }
        let next = if k < m { Some(prices.at(k + 1)) } else { None };
        let safe = |trade: &[f64]| -> Result<bool> {
            let after: Vec<f64> = hold.iter().zip(trade).zip(s).map(|((h, t), p)| h + t / p).collect();
            if !cone.contains_fast(&to_monetary(s, &after)?, TOL)? {
                return Ok(false);
            }
            match next {
                Some(ns) => cone.contains_fast(&to_monetary(ns, &after)?, TOL),
                None => Ok(true),
            }
        };
        let mut ok = safe(&trade)?;
        for _ in 0..30 {
            if ok {
                break;
            }
            trade.iter_mut().for_each(|t| *t *= 0.5);
            ok = safe(&trade)?;
        }
        if !ok {
            let l = cone.liquidation_fast(&position)?;
            trade = position.iter().map(|p| -p).collect();
            trade[0] += l;
        }
        for i in 0..d {
            hold[i] += trade[i] / s[i];
        }
        trades.push(trade);
    }
    let mut acc = vec![0.0; d];
    let values: Vec<Vec<f64>> = trades
        .iter()
        .map(|t| {
            acc.iter_mut().zip(t).for_each(|(a, b)| *a += b);
            acc.clone()
        })
        .collect();
    let path = GridPath::new(prices.horizon(), values, PathKind::PiecewiseConstant)?.with_pre0(vec![0.0; d])?;
    Strategy::new(path, cone)
}

/// One monetary trade per node of a non-recombining event tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStrategy {
    pub trades: Vec<Vec<f64>>,
}

/// Parent of each node; errors on recombining trees.
pub fn tree_parents(tree: &EventTree) -> Result<Vec<Option<usize>>> {
    let mut parent = vec![None; tree.len()];
    for (i, n) in tree.nodes().iter().enumerate() {
        for &(c, _) in &n.children {
            if parent[c].is_some() {
                return Err(Error::Model("strategies on trees need one parent per node".into()));
            }
            parent[c] = Some(i);
        }
    }
    Ok(parent)
}

impl TreeStrategy {
    pub fn zero(tree: &EventTree) -> Self {
        Self {
            trades: vec![vec![0.0; tree.dim()]; tree.len()],
        }
    }

    /// Physical holdings after the trade at every node.
    pub fn holdings(&self, tree: &EventTree, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(tree.len(), self.trades.len())?;
        let parent = tree_parents(tree)?;
        let mut hold = vec![Vec::new(); tree.len()];
        for id in tree.topological_order() {
            let before = match parent[id] {
                Some(p) => hold[p].clone(),
                None => x.to_vec(),
            };
            let s = &tree.node(id).prices;
            hold[id] = before.iter().zip(&self.trades[id]).zip(s).map(|((h, t), p)| h + t / p).collect();
        }
        Ok(hold)
    }

    /// Trades in `−K`, none at chance nodes, and solvent positions before
    /// and after every trade.
    pub fn check(&self, tree: &EventTree, cone: &SolvencyCone, x: &[f64], tol: f64) -> Result<Option<usize>> {
        let hold = self.holdings(tree, x)?;
        let parent = tree_parents(tree)?;
        for id in tree.topological_order() {
            let node = tree.node(id);
            let t = &self.trades[id];
            if !node.tradable && t.iter().any(|&v| v != 0.0) {
                return Ok(Some(id));
            }
            let neg: Vec<f64> = t.iter().map(|v| -v).collect();
            if !cone.contains_fast(&neg, tol)? {
                return Ok(Some(id));
            }
            let before = match parent[id] {
                Some(p) => &hold[p],
                None => x,
            };
            if !cone.contains_fast(&to_monetary(&node.prices, before)?, tol)?
                || !cone.contains_fast(&to_monetary(&node.prices, &hold[id])?, tol)?
            {
                return Ok(Some(id));
            }
        }
        Ok(None)
    }

    /// Coordinate-sum variation of the trades along the history ending at
    /// each node.
    pub fn running_variation(&self, tree: &EventTree) -> Result<Vec<f64>> {
        let parent = tree_parents(tree)?;
        let mut var = vec![0.0; tree.len()];
        for id in tree.topological_order() {
            let base = parent[id].map(|p| var[p]).unwrap_or(0.0);
            var[id] = base + self.trades[id].iter().map(|v| v.abs()).sum::<f64>();
        }
        Ok(var)
    }

    /// Random admissible strategy built forward from the root. `candidate`
    /// proposes a trade from the monetary position at a node; proposals are
    /// halved until the post-trade position and every child's pre-trade
    /// position are solvent, falling back to full liquidation.
    pub fn random<R: Rng>(
        tree: &EventTree,
        cone: &SolvencyCone,
        x: &[f64],
        directions: &[Vec<f64>],
        trade_probability: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::forward(tree, cone, x, |position| {
            let mut trade = vec![0.0; x.len()];
            if rng.random::<f64>() < trade_probability {
                let scale = cone.liquidation_fast(position)?.max(0.0) * 2.0 * rng.random::<f64>();
                for dir in directions {
                    let c = rng.random::<f64>() * scale / directions.len() as f64;
                    trade.iter_mut().zip(dir).for_each(|(t, g)| *t += c * g);
                }
            }
            Ok(vec![trade])
        })
    }

    /// Greedy churn: at every node the admissible action with the largest
    /// coordinate-sum size among `actions`.
    pub fn greedy_churn(tree: &EventTree, cone: &SolvencyCone, x: &[f64], actions: &[Vec<f64>]) -> Result<Self> {
        let mut sorted: Vec<Vec<f64>> = actions.to_vec();
        sorted.sort_by(|a, b| {
            let (na, nb) = (a.iter().map(|v| v.abs()).sum::<f64>(), b.iter().map(|v| v.abs()).sum::<f64>());
            nb.total_cmp(&na)
        });
        Self::forward(tree, cone, x, |_| Ok(sorted.clone()))
    }

    /// Walks the tree forward; at each tradable node takes the first proposal
    /// that keeps the post-trade position and all children's pre-trade
    /// positions solvent (each proposal is also tried at halved sizes),
    /// otherwise liquidates.
    fn forward(
        tree: &EventTree,
        cone: &SolvencyCone,
        x: &[f64],
        mut propose: impl FnMut(&[f64]) -> Result<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let d = x.len();
        let parent = tree_parents(tree)?;
        let mut hold: Vec<Vec<f64>> = vec![Vec::new(); tree.len()];
        let mut trades = vec![vec![0.0; d]; tree.len()];
        for id in tree.topological_order() {
            let node = tree.node(id);
            let before = match parent[id] {
                Some(p) => hold[p].clone(),
                None => x.to_vec(),
            };
            let position = to_monetary(&node.prices, &before)?;
            let apply = |t: &[f64]| -> Vec<f64> { before.iter().zip(t).zip(&node.prices).map(|((h, v), p)| h + v / p).collect() };
            let safe = |t: &[f64]| -> Result<bool> {
                let neg: Vec<f64> = t.iter().map(|v| -v).collect();
                if !cone.contains_fast(&neg, TOL)? {
                    return Ok(false);
                }
                let after = apply(t);
                if !cone.contains_fast(&to_monetary(&node.prices, &after)?, TOL)? {
                    return Ok(false);
                }
                for &(c, _) in &node.children {
                    if !cone.contains_fast(&to_monetary(&tree.node(c).prices, &after)?, TOL)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            };
            let mut chosen = None;
            if node.tradable {
                'outer: for mut t in propose(&position)? {
                    for _ in 0..30 {
                        if safe(&t)? {
                            chosen = Some(t);
                            break 'outer;
                        }
                        t.iter_mut().for_each(|v| *v *= 0.5);
                    }
                }
            }
            let trade = match chosen {
                Some(t) => t,
                None if !node.tradable || safe(&vec![0.0; d])? => vec![0.0; d],
                None => {
                    let l = cone.liquidation_fast(&position)?;
                    let mut t: Vec<f64> = position.iter().map(|p| -p).collect();
                    t[0] += l;
                    t
                }
            };
            hold[id] = apply(&trade);
            trades[id] = trade;
        }
        Ok(Self { trades })
    }
}
