//! Backward induction over (node, holdings).
//!
//! Each internal node below the root gets a lattice over the physical
//! holdings that can be carried into it. Vertex values come from one Bellman
//! step against the children: leaves are evaluated exactly, internal children
//! by multilinear interpolation of their lattice, floored by the value of
//! liquidating on arrival. The root is evaluated exactly at `x`.
//!
//! The grid-restricted value `V` is increasing in the holdings (more of every
//! asset keeps every action admissible and raises the terminal liquidation
//! value). A query `q` in a lattice cell therefore satisfies
//! `V(lower corner) ≤ V(q) ≤ V(upper corner)`, and with liquidation available
//! also `V(q) ≥ U(ℓ(S ⊙ q))`. Carrying lower and upper estimates through the
//! maximum over actions gives, at each vertex and at the root, an interval
//! that contains the enumerated value; its half-width relative to the
//! computed value is the reported interpolation bound. Vertices whose
//! position is insolvent hold value 0.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

use crate::cone::SolvencyCone;
use crate::error::{Error, Result};
use crate::market::EventTree;
use crate::utility::UtilitySpec;

use super::enumerate::pick;
use super::{liquidation, monetary, solvent, step, ActionGrid, Method, Move, ValueReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxMode {
    /// Every holding reachable under the grid; the bound is rigorous.
    Reachable,
    /// Reachable box clipped to `±cap · ℘(x)` in monetary units per asset.
    /// Queries that fall outside use the liquidation floor only.
    Capped(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    /// Lattice points per asset and node.
    pub lattice: usize,
    pub box_mode: BoxMode,
    /// Limit on the total number of lattice points.
    pub max_points: u128,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            lattice: 21,
            box_mode: BoxMode::Reachable,
            max_points: 50_000_000,
        }
    }
}

struct Table {
    lo: Vec<f64>,
    step: Vec<f64>,
    count: Vec<usize>,
    stride: Vec<usize>,
    value: Vec<f64>,
    err: Vec<f64>,
    ok: Vec<bool>,
}

impl Table {
    fn new(lo: &[f64], hi: &[f64], n: usize) -> Self {
        let d = lo.len();
        let mut count = Vec::with_capacity(d);
        let mut step = Vec::with_capacity(d);
        for i in 0..d {
            let w = hi[i] - lo[i];
            if w <= 1e-12 * (1.0 + lo[i].abs()) || n < 2 {
                count.push(1);
                step.push(0.0);
            } else {
                count.push(n);
                step.push(w / (n - 1) as f64);
            }
        }
        let mut stride = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            stride[i] = stride[i + 1] * count[i + 1];
        }
        Self {
            lo: lo.to_vec(),
            step,
            count,
            stride,
            value: Vec::new(),
            err: Vec::new(),
            ok: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.count.iter().product()
    }

    fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.lo.len()];
        for i in 0..p.len() {
            let j = idx / self.stride[i];
            idx %= self.stride[i];
            p[i] = self.lo[i] + j as f64 * self.step[i];
        }
        p
    }

    /// Cell of `q`: per-axis lower index and weight, or `None` outside.
    fn locate(&self, q: &[f64]) -> Option<Vec<(usize, f64)>> {
        let mut cell = Vec::with_capacity(q.len());
        for i in 0..q.len() {
            let tol = 1e-9 * (1.0 + q[i].abs() + self.lo[i].abs());
            if self.count[i] == 1 {
                if (q[i] - self.lo[i]).abs() > tol {
                    return None;
                }
                cell.push((0, 0.0));
                continue;
            }
            let top = self.lo[i] + (self.count[i] - 1) as f64 * self.step[i];
            if q[i] < self.lo[i] - tol || q[i] > top + tol {
                return None;
            }
            let r = ((q[i] - self.lo[i]) / self.step[i]).clamp(0.0, (self.count[i] - 1) as f64);
            let j = (r.floor() as usize).min(self.count[i] - 2);
            cell.push((j, r - j as f64));
        }
        Some(cell)
    }
}

/// `(value, lower, upper)` estimate for the value of a query.
type Estimate = (f64, f64, f64);

struct Dp<'a> {
    tree: &'a EventTree,
    cone: &'a SolvencyCone,
    grid: &'a ActionGrid,
    utility: &'a UtilitySpec,
    actions: Vec<Vec<f64>>,
    tables: Vec<Option<Table>>,
    truncated: AtomicBool,
}

impl Dp<'_> {
    fn floor(&self, id: usize, q: &[f64]) -> f64 {
        if self.grid.liquidates() {
            self.utility
                .of_liquidation(liquidation(self.cone, &monetary(&self.tree.node(id).prices, q)))
        } else {
            f64::NEG_INFINITY
        }
    }

    fn child(&self, id: usize, q: &[f64]) -> Estimate {
        let node = self.tree.node(id);
        if node.children.is_empty() {
            let u = self.utility.of_liquidation(liquidation(self.cone, &monetary(&node.prices, q)));
            return (u, u, u);
        }
        let table = self.tables[id].as_ref().expect("child tables are built first");
        let floor = self.floor(id, q);
        let Some(cell) = table.locate(q) else {
            self.truncated.store(true, Ordering::Relaxed);
            return (floor, floor, floor);
        };
        let d = q.len();
        let active: Vec<usize> = (0..d).filter(|&i| table.count[i] > 1).collect();
        let base: usize = cell.iter().zip(&table.stride).map(|((j, _), s)| j * s).sum();
        let mut interp = 0.0;
        for mask in 0..(1usize << active.len()) {
            let mut idx = base;
            let mut w = 1.0;
            for (b, &i) in active.iter().enumerate() {
                let t = cell[i].1;
                if mask >> b & 1 == 1 {
                    idx += table.stride[i];
                    w *= t;
                } else {
                    w *= 1.0 - t;
                }
            }
            if w != 0.0 {
                interp += w * table.value[idx];
            }
        }
        let top = base + active.iter().map(|&i| table.stride[i]).sum::<usize>();
        let upper = if table.ok[top] { table.value[top] + table.err[top] } else { f64::INFINITY };
        let mut lower = floor;
        if table.ok[base] {
            lower = lower.max(table.value[base] - table.err[base]);
        }
        let value = interp.max(floor);
        (value, lower.min(value), upper.max(value))
    }

    /// Value, error and best trade at holdings `h` carried into `id`.
    fn solve(&self, id: usize, h: &[f64]) -> Option<(f64, f64, Vec<f64>)> {
        let node = self.tree.node(id);
        if !solvent(self.cone, &monetary(&node.prices, h)) {
            return None;
        }
        let offset = if id == 0 && node.tradable { self.grid.root_offset() } else { None };
        let zero = vec![0.0; h.len()];
        let mut moves: Vec<Move<'_>> = if node.tradable {
            self.actions.iter().map(|a| Move::Grid(a)).collect()
        } else {
            vec![Move::Grid(&zero)]
        };
        if node.tradable && self.grid.liquidates() {
            moves.push(Move::Liquidate);
        }
        let mut best_lower = f64::NEG_INFINITY;
        let mut best_upper = f64::NEG_INFINITY;
        let mut results = Vec::with_capacity(moves.len());
        for mv in moves {
            let Some((h2, trade)) = step(self.cone, self.tree.nodes(), node, h, mv, offset) else {
                continue;
            };
            let (mut v, mut lo, mut hi) = (0.0, 0.0, 0.0);
            for &(c, p) in &node.children {
                let e = self.child(c, &h2);
                v += p * e.0;
                lo += p * e.1;
                hi += p * e.2;
            }
            best_lower = best_lower.max(lo);
            best_upper = best_upper.max(hi);
            results.push(Some((v, trade)));
        }
        let (value, trade) = pick(results)?;
        let err = (value - best_lower).max(best_upper - value).max(0.0);
        Some((value, err, trade))
    }
}

/// Holdings box `[lo, hi]` carried into each node under `grid`.
fn reachable_boxes(tree: &EventTree, x: &[f64], cone: &SolvencyCone, grid: &ActionGrid) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let d = x.len();
    let mut boxes: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; tree.len()];
    boxes[0] = Some((x.to_vec(), x.to_vec()));
    let (mut amin, mut amax) = (vec![0.0f64; d], vec![0.0f64; d]);
    for a in grid.actions() {
        for i in 0..d {
            amin[i] = amin[i].min(a[i]);
            amax[i] = amax[i].max(a[i]);
        }
    }
    for id in tree.topological_order() {
        let node = tree.node(id);
        if node.children.is_empty() {
            continue;
        }
        let (lo, hi) = boxes[id].clone().expect("parents come first");
        let (mut plo, mut phi) = (lo.clone(), hi.clone());
        if node.tradable {
            let off = if id == 0 { grid.root_offset() } else { None };
            for i in 0..d {
                let o = off.map(|o| o[i]).unwrap_or(0.0);
                plo[i] = lo[i] + (amin[i] + o.min(0.0)) / node.prices[i];
                phi[i] = hi[i] + (amax[i] + o.max(0.0)) / node.prices[i];
            }
            if grid.liquidates() {
                let mut top: f64 = 0.0;
                for mask in 0..(1usize << d) {
                    let v: Vec<f64> = (0..d)
                        .map(|i| node.prices[i] * if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                        .collect();
                    top = top.max(cone.purchase_fast(&v)?);
                }
                for i in 0..d {
                    let (l, h) = if i == 0 { (0.0, top) } else { (0.0, 0.0) };
                    plo[i] = plo[i].min(l);
                    phi[i] = phi[i].max(h);
                }
            }
        }
        for &(c, _) in &node.children {
            boxes[c] = Some(match boxes[c].take() {
                None => (plo.clone(), phi.clone()),
                Some((a, b)) => (
                    a.iter().zip(&plo).map(|(u, v)| u.min(*v)).collect(),
                    b.iter().zip(&phi).map(|(u, v)| u.max(*v)).collect(),
                ),
            });
        }
    }
    Ok(boxes.into_iter().map(|b| b.unwrap_or_else(|| (x.to_vec(), x.to_vec()))).collect())
}

/// Backward induction on a holdings lattice. Agrees with
/// [`enumerate_value`](super::enumerate_value) within the reported
/// interpolation bound, exactly on one-step trees.
pub fn dp_value(
    tree: &EventTree,
    x: &[f64],
    cone: &SolvencyCone,
    grid: &ActionGrid,
    utility: &UtilitySpec,
    options: &DpOptions,
) -> Result<ValueReport> {
    if x.len() != tree.dim() || cone.dim() != tree.dim() {
        return Err(Error::Dimension {
            expected: tree.dim(),
            got: x.len(),
        });
    }
    let v0 = monetary(&tree.node(0).prices, x);
    if !solvent(cone, &v0) {
        return Err(Error::NotInCone {
            slack: -liquidation(cone, &v0),
        });
    }
    let mut boxes = reachable_boxes(tree, x, cone, grid)?;
    let mut clipped = false;
    if let BoxMode::Capped(cap) = options.box_mode {
        if !(cap > 0.0) {
            return Err(Error::Grid(format!("box cap must be positive, got {cap}")));
        }
        let scale = cap * cone.purchase_fast(&v0)?.max(f64::MIN_POSITIVE);
        for (id, (lo, hi)) in boxes.iter_mut().enumerate().skip(1) {
            let s = &tree.node(id).prices;
            for i in 0..x.len() {
                let (a, b) = (-scale / s[i], scale / s[i]);
                if lo[i] < a || hi[i] > b {
                    clipped = true;
                }
                lo[i] = lo[i].max(a);
                hi[i] = hi[i].min(b).max(lo[i]);
            }
        }
    }
    let mut tables: Vec<Option<Table>> = (0..tree.len()).map(|_| None).collect();
    let mut points = 0u128;
    for id in 1..tree.len() {
        if !tree.node(id).children.is_empty() {
            let t = Table::new(&boxes[id].0, &boxes[id].1, options.lattice);
            points += t.len() as u128;
            tables[id] = Some(t);
        }
    }
    if points > options.max_points {
        return Err(Error::Budget {
            what: "holdings lattice points",
            size: points,
            limit: options.max_points,
        });
    }
    let mut dp = Dp {
        tree,
        cone,
        grid,
        utility,
        actions: grid.undominated(),
        tables: Vec::new(),
        truncated: AtomicBool::new(false),
    };
    let order = tree.topological_order();
    for &id in order.iter().rev() {
        if id == 0 || tables[id].is_none() {
            continue;
        }
        dp.tables = std::mem::take(&mut tables);
        let table = dp.tables[id].as_ref().unwrap();
        let solved: Vec<Option<(f64, f64, Vec<f64>)>> = (0..table.len())
            .into_par_iter()
            .map(|k| dp.solve(id, &table.point(k)))
            .collect();
        tables = std::mem::take(&mut dp.tables);
        let t = tables[id].as_mut().unwrap();
        t.value = solved.iter().map(|s| s.as_ref().map_or(0.0, |s| s.0)).collect();
        t.err = solved.iter().map(|s| s.as_ref().map_or(0.0, |s| s.1)).collect();
        t.ok = solved.iter().map(Option::is_some).collect();
    }
    dp.tables = tables;
    let (value, err, trade) = dp.solve(0, x).ok_or(Error::NoAdmissibleProfile)?;
    let truncated = dp.truncated.load(Ordering::Relaxed);
    let mut report = ValueReport::exact(value, Method::Dp);
    report.interpolation_bound = Some(err);
    report.box_truncated = clipped && truncated;
    report.bound_rigorous = !truncated;
    report.root_action = Some(trade);
    Ok(report)
}
