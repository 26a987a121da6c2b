//! Polyhedral solvency cones built from proportional transaction-cost matrices.
//!
//! A position `x` (monetary units, asset 1 is the numeraire) is solvent when it
//! can be moved into the nonnegative orthant by cost-charged transfers. The
//! cone is generated by the unit vectors `e_i` and the transfer rays
//! `(1 + λ^{ji}) e_i − e_j`; its dual `K*` is recovered by double description
//! for `d ≤ 4` and probed through linear programs otherwise.
//!
//! # The ε-interior of `K*` on generators
//!
//! [`SolvencyCone::eps_interior_dual`] only tests the generators `g` of `K`.
//! This is equivalent to testing every `w ∈ K`: generators belong to `K`, and
//! if `g·y > ε|y||g|` for every generator then any nonzero `w = Σ c_g g` with
//! `c_g ≥ 0` satisfies `w·y = Σ c_g g·y > ε|y| Σ c_g |g| ≥ ε|y||w|` by the
//! triangle inequality.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::kv::KeyValues;
use crate::lp::{LinearProgram, LpError, Relation, Sense};

/// Dimension up to which the dual cone is enumerated exactly.
pub const EXACT_DUAL_MAX_DIM: usize = 4;
/// Default membership tolerance.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    d: usize,
    lambda: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d < 2 {
            return Err(Error::CostMatrix(format!("need at least 2 assets, got {d}")));
        }
        let mut lambda = Vec::with_capacity(d * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::CostMatrix(format!("row {} has {} entries, expected {d}", i + 1, row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::CostMatrix(format!("lambda[{}][{}] = {v} is not a nonnegative rate", i + 1, j + 1)));
                }
                if i == j && v != 0.0 {
                    return Err(Error::CostMatrix(format!("diagonal entry lambda[{0}][{0}] must be zero", i + 1)));
                }
                lambda.push(v);
            }
        }
        Ok(Self { d, lambda })
    }

    pub fn uniform(d: usize, rate: f64) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|i| (0..d).map(|j| if i == j { 0.0 } else { rate }).collect())
                .collect(),
        )
    }

    pub fn frictionless(d: usize) -> Result<Self> {
        Self::uniform(d, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `λ^{ij}`, 0-based.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.lambda[i * self.d + j]
    }

    pub fn max_rate(&self) -> f64 {
        self.lambda.iter().copied().fold(0.0, f64::max)
    }

    /// Parses `d = <n>` followed by `lambda.i.j = <rate>` lines (1-based);
    /// absent off-diagonal entries are zero.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text).map_err(|e| Error::CostMatrix(e.to_string()))?;
        let m = Self::from_kv(&kv, "", None)?;
        if let Some(k) = kv.unused().first() {
            return Err(Error::CostMatrix(format!("unknown key `{k}`")));
        }
        Ok(m)
    }

    /// Reads the entries under `prefix` (empty for a bare cost file). A
    /// `uniform` key fills every off-diagonal entry before explicit overrides.
    /// `d` may be omitted when `default_d` is given.
    pub(crate) fn from_kv(kv: &KeyValues, prefix: &str, default_d: Option<usize>) -> Result<Self> {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        let d: usize = match (kv.parse_opt(&key("d")).map_err(|e| Error::CostMatrix(e.to_string()))?, default_d) {
            (Some(d), Some(m)) if d != m => {
                return Err(Error::CostMatrix(format!("`{}` = {d} disagrees with {m} assets", key("d"))));
            }
            (Some(d), _) | (None, Some(d)) => d,
            (None, None) => return Err(Error::CostMatrix(format!("missing required key `{}`", key("d")))),
        };
        if d < 2 {
            return Err(Error::CostMatrix(format!("need at least 2 assets, got {d}")));
        }
        let base: f64 = kv.parse_opt(&key("uniform")).map_err(|e| Error::CostMatrix(e.to_string()))?.unwrap_or(0.0);
        let mut rows: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 0.0 } else { base }).collect())
            .collect();
        for (idx, v) in kv.indexed(&key("lambda"), 2).map_err(|e| Error::CostMatrix(e.to_string()))? {
            let (i, j) = (idx[0], idx[1]);
            if i >= d || j >= d {
                return Err(Error::CostMatrix(format!("index ({}, {}) outside d = {d}", i + 1, j + 1)));
            }
            rows[i][j] = v;
        }
        Self::new(rows)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("d = {}\n", self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j {
                    let _ = writeln!(s, "lambda.{}.{} = {}", i + 1, j + 1, self.rate(i, j));
                }
            }
        }
        s
    }
}

/// `K* ∩ {w : w¹ = 1}`. Exact (all vertices) when the dual cone was enumerated,
/// otherwise a sample of vertices obtained by linear programming.
#[derive(Debug, Clone)]
pub struct DualSection {
    vertices: Vec<Vec<f64>>,
    exact: bool,
}

impl DualSection {
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// `max_v v·x`, the purchase value when the section is exact.
    pub fn support(&self, x: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_v v·x`, the liquidation value when the section is exact.
    pub fn lower_support(&self, x: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, x)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct SolvencyCone {
    d: usize,
    generators: Vec<Vec<f64>>,
    transfers: Vec<Vec<f64>>,
    dual_generators: Option<Vec<Vec<f64>>>,
    section: DualSection,
    proper: bool,
}

impl SolvencyCone {
    /// Builds `K` from a transaction-cost matrix.
    pub fn from_costs(costs: &CostMatrix) -> Result<Self> {
        let d = costs.dim();
        let mut transfers = Vec::with_capacity(d * (d - 1));
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let mut g = vec![0.0; d];
                    g[i] = 1.0 + costs.rate(j, i);
                    g[j] = -1.0;
                    transfers.push(g);
                }
            }
        }
        let mut candidates: Vec<Vec<f64>> = (0..d).map(|i| unit(d, i)).collect();
        candidates.extend(transfers.iter().cloned());
        let mut cone = Self::assemble(d, candidates)?;
        cone.transfers = transfers;
        for i in 0..d {
            if !cone.contains(&unit(d, i), TOL)? {
                return Err(Error::MalformedCone(format!("e_{} is not in K", i + 1)));
            }
        }
        Ok(cone)
    }

    /// Builds a cone from an explicit ray list; every `e_i` must lie in it.
    pub fn from_generators(rays: Vec<Vec<f64>>) -> Result<Self> {
        let d = rays.first().map(Vec::len).ok_or_else(|| Error::MalformedCone("no generators".into()))?;
        for r in &rays {
            check_dim(d, r.len())?;
        }
        let cone = Self::assemble(d, rays)?;
        for i in 0..d {
            if !cone.contains(&unit(d, i), TOL)? {
                return Err(Error::MalformedCone(format!("e_{} is not in K", i + 1)));
            }
        }
        Ok(cone)
    }

    fn assemble(d: usize, candidates: Vec<Vec<f64>>) -> Result<Self> {
        let generators = reduce_generators(candidates)?;
        let proper = is_pointed(&generators)?;
        let (dual_generators, section) = if d <= EXACT_DUAL_MAX_DIM {
            let duals = double_description(&generators, d);
            if duals.is_empty() {
                return Err(Error::MalformedCone("dual cone is {0}".into()));
            }
            // A dual ray with no numeraire weight makes the section unbounded;
            // the vertex formulas then no longer give ℓ and ℘.
            let bounded = duals.iter().all(|w| w[0] > 1e-12);
            let vertices = duals
                .iter()
                .filter(|w| w[0] > 1e-12)
                .map(|w| w.iter().map(|v| v / w[0]).collect())
                .collect();
            (Some(duals), DualSection { vertices, exact: bounded })
        } else {
            (None, sample_section(&generators, d)?)
        };
        Ok(Self {
            d,
            generators,
            transfers: Vec::new(),
            dual_generators,
            section,
            proper,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// The raw transfer rays `(1 + λ^{ji}) e_i − e_j`; empty for cones built
    /// from explicit generators.
    pub fn transfers(&self) -> &[Vec<f64>] {
        &self.transfers
    }

    /// Extreme rays of `K*`, unit Euclidean norm; `None` above
    /// [`EXACT_DUAL_MAX_DIM`].
    pub fn dual_generators(&self) -> Option<&[Vec<f64>]> {
        self.dual_generators.as_deref()
    }

    pub fn section(&self) -> &DualSection {
        &self.section
    }

    pub fn is_proper(&self) -> bool {
        self.proper
    }

    /// Smallest `s ≥ −tol` with `x + s·1 ∈ K`, by linear programming.
    pub fn membership_slack(&self, x: &[f64], tol: f64) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let k = self.generators.len();
        let mut lp = LinearProgram::new(k + 1, Sense::Minimize);
        lp.set_objective_coeff(k, 1.0);
        for i in 0..self.d {
            let mut row: Vec<(usize, f64)> = self
                .generators
                .iter()
                .enumerate()
                .filter(|(_, g)| g[i] != 0.0)
                .map(|(j, g)| (j, g[i]))
                .collect();
            row.push((k, -1.0));
            lp.add_sparse(&row, Relation::Eq, x[i] - tol);
        }
        let sol = lp.solve()?;
        Ok(sol.x[k] - tol)
    }

    /// LP membership: `x` lies within `tol` (sup norm) of `K`.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.membership_slack(x, tol)? <= tol)
    }

    /// Facet test `w·x ≥ −tol` over the dual generators; `None` when the dual
    /// was not enumerated.
    pub fn contains_facets(&self, x: &[f64], tol: f64) -> Option<bool> {
        self.dual_generators
            .as_ref()
            .map(|duals| duals.iter().all(|w| dot(w, x) >= -tol))
    }

    /// Facet test when available, LP otherwise.
    pub fn contains_fast(&self, x: &[f64], tol: f64) -> Result<bool> {
        match self.contains_facets(x, tol) {
            Some(b) => Ok(b),
            None => self.contains(x, tol),
        }
    }

    /// `ℓ(x) = sup{λ : x − λe₁ ∈ K}` by linear programming.
    pub fn liquidation_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let k = self.generators.len();
        let mut lp = LinearProgram::new(k + 1, Sense::Maximize);
        lp.set_free(k);
        lp.set_objective_coeff(k, 1.0);
        for i in 0..self.d {
            let mut row: Vec<(usize, f64)> = self
                .generators
                .iter()
                .enumerate()
                .filter(|(_, g)| g[i] != 0.0)
                .map(|(j, g)| (j, g[i]))
                .collect();
            if i == 0 {
                row.push((k, 1.0));
            }
            lp.add_sparse(&row, Relation::Eq, x[i]);
        }
        match lp.solve() {
            Ok(sol) => Ok(sol.x[k]),
            Err(LpError::Unbounded) => Err(Error::MalformedCone("liquidation value is unbounded".into())),
            Err(e) => Err(e.into()),
        }
    }

    /// `℘(x) = inf{y : y e₁ − x ∈ K}` by linear programming.
    pub fn purchase_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let k = self.generators.len();
        let mut lp = LinearProgram::new(k + 1, Sense::Minimize);
        lp.set_free(k);
        lp.set_objective_coeff(k, 1.0);
        for i in 0..self.d {
            let mut row: Vec<(usize, f64)> = self
                .generators
                .iter()
                .enumerate()
                .filter(|(_, g)| g[i] != 0.0)
                .map(|(j, g)| (j, g[i]))
                .collect();
            if i == 0 {
                row.push((k, -1.0));
            }
            lp.add_sparse(&row, Relation::Eq, -x[i]);
        }
        match lp.solve() {
            Ok(sol) => Ok(sol.x[k]),
            Err(LpError::Unbounded) => Err(Error::MalformedCone("purchase value is unbounded".into())),
            Err(e) => Err(e.into()),
        }
    }

    /// `ℓ` through the dual section when it is exact, LP otherwise.
    pub fn liquidation_fast(&self, x: &[f64]) -> Result<f64> {
        if self.section.exact {
            check_dim(self.d, x.len())?;
            Ok(self.section.lower_support(x))
        } else {
            self.liquidation_value(x)
        }
    }

    /// `℘` through the dual section when it is exact, LP otherwise.
    pub fn purchase_fast(&self, x: &[f64]) -> Result<f64> {
        if self.section.exact {
            check_dim(self.d, x.len())?;
            Ok(self.section.support(x))
        } else {
            self.purchase_value(x)
        }
    }

    /// `y ∈ ε-int K*`: `g·y > ε|y||g|` for every generator `g` of `K`.
    pub fn eps_interior_dual(&self, y: &[f64], eps: f64) -> Result<bool> {
        check_dim(self.d, y.len())?;
        let ny = norm(y);
        if ny == 0.0 {
            return Ok(false);
        }
        Ok(self.generators.iter().all(|g| dot(g, y) > eps * ny * norm(g)))
    }

    /// Euclidean projection onto `K`.
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        project_cone(&self.generators, u)
    }

    /// One ray per line, space-separated, 17 significant digits.
    pub fn generators_text(&self) -> String {
        rays_text(&self.generators)
    }
}

pub fn rays_text(rays: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for r in rays {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Euclidean projection of `u` onto `cone(generators)` by the Lawson–Hanson
/// active-set method for nonnegative least squares.
pub fn project_cone(generators: &[Vec<f64>], u: &[f64]) -> Result<Vec<f64>> {
    let d = u.len();
    let k = generators.len();
    for g in generators {
        check_dim(d, g.len())?;
    }
    if k == 0 {
        return Ok(vec![0.0; d]);
    }
    let a = DMatrix::from_fn(d, k, |i, j| generators[j][i]);
    let target = DVector::from_column_slice(u);
    let scale = 1.0 + target.amax() + a.amax();
    let tol = 1e-12 * scale * scale;
    let mut coef = DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    let budget = 20 * k + 100;
    let mut iterations = 0;
    loop {
        let w = a.transpose() * (&target - &a * &coef);
        let next = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = next else { break };
        passive[j] = true;
        loop {
            iterations += 1;
            if iterations > budget {
                return Err(Error::ProjectionStalled(budget));
            }
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(d, idx.len(), |i, c| a[(i, idx[c])]);
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(&target, 1e-12)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let mut z = DVector::<f64>::zeros(k);
            for (c, &j) in idx.iter().enumerate() {
                z[j] = z_sub[c];
            }
            if idx.iter().all(|&j| z[j] > 0.0) {
                coef = z;
                break;
            }
            let alpha = idx
                .iter()
                .filter(|&&j| z[j] <= 0.0)
                .map(|&j| coef[j] / (coef[j] - z[j]))
                .fold(f64::INFINITY, f64::min);
            coef = &coef + (z - &coef) * alpha;
            for &j in &idx {
                if coef[j] <= 1e-14 {
                    coef[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    Ok((&a * &coef).iter().copied().collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// Removes duplicates (unit-norm rays within 1e-9) and rays lying in the cone
/// of the remaining ones. Order of survivors follows the input order.
fn reduce_generators(candidates: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut kept_unit: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        let n = norm(&c);
        if n == 0.0 || !n.is_finite() {
            continue;
        }
        let u: Vec<f64> = c.iter().map(|v| v / n).collect();
        if kept_unit.iter().any(|k| k.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-9)) {
            continue;
        }
        kept.push(c);
        kept_unit.push(u);
    }
    let mut i = 0;
    while i < kept.len() {
        let others: Vec<&Vec<f64>> = kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g).collect();
        if !others.is_empty() && in_cone_of(&others, &kept[i])? {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(kept)
}

fn in_cone_of(rays: &[&Vec<f64>], x: &[f64]) -> Result<bool> {
    let d = x.len();
    let mut lp = LinearProgram::new(rays.len(), Sense::Minimize);
    for i in 0..d {
        let row: Vec<(usize, f64)> = rays
            .iter()
            .enumerate()
            .filter(|(_, g)| g[i] != 0.0)
            .map(|(j, g)| (j, g[i]))
            .collect();
        lp.add_sparse(&row, Relation::Eq, x[i]);
    }
    match lp.solve() {
        Ok(_) => Ok(true),
        Err(LpError::Infeasible { .. }) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// `K ∩ −K = {0}` iff no nonzero nonnegative combination of generators vanishes.
fn is_pointed(generators: &[Vec<f64>]) -> Result<bool> {
    let d = generators[0].len();
    let k = generators.len();
    let mut lp = LinearProgram::new(k, Sense::Minimize);
    for i in 0..d {
        let row: Vec<(usize, f64)> = generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g[i] != 0.0)
            .map(|(j, g)| (j, g[i]))
            .collect();
        lp.add_sparse(&row, Relation::Eq, 0.0);
    }
    lp.add_sparse(&(0..k).map(|j| (j, 1.0)).collect::<Vec<_>>(), Relation::Eq, 1.0);
    match lp.solve() {
        Ok(_) => Ok(false),
        Err(LpError::Infeasible { .. }) => Ok(true),
        Err(e) => Err(e.into()),
    }
}

/// Extreme rays of `{w ≥ 0 : g·w ≥ 0 for all generators g}` by the
/// double-description method with the combinatorial adjacency test. Rays are
/// returned with unit Euclidean norm.
fn double_description(generators: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    // Tight sets are bitmasks over the orthant constraints (bits 0..d) and the
    // generator constraints (bits d..).
    assert!(d + generators.len() <= 128, "constraint count exceeds tight-set width");
    let mut rays: Vec<(Vec<f64>, u128)> = (0..d)
        .map(|i| {
            let all: u128 = (1u128 << d) - 1;
            (unit(d, i), all & !(1u128 << i))
        })
        .collect();
    for (k, g) in generators.iter().enumerate() {
        let bit = 1u128 << (d + k);
        let vals: Vec<f64> = rays.iter().map(|(r, _)| dot(g, r)).collect();
        let tol = 1e-12 * (1.0 + norm(g));
        let mut next: Vec<(Vec<f64>, u128)> = Vec::new();
        for ((r, z), &v) in rays.iter().zip(&vals) {
            if v > tol {
                next.push((r.clone(), *z));
            } else if v >= -tol {
                next.push((r.clone(), *z | bit));
            }
        }
        for (p, &vp) in vals.iter().enumerate() {
            if vp <= tol {
                continue;
            }
            for (n, &vn) in vals.iter().enumerate() {
                if vn >= -tol {
                    continue;
                }
                let common = rays[p].1 & rays[n].1;
                if (common.count_ones() as usize) + 2 < d {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(q, (_, zq))| q == p || q == n || (zq & common) != common);
                if !adjacent {
                    continue;
                }
                let mut r: Vec<f64> = rays[n]
                    .0
                    .iter()
                    .zip(&rays[p].0)
                    .map(|(a, b)| vp * a - vn * b)
                    .collect();
                let s = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if s <= 1e-300 {
                    continue;
                }
                r.iter_mut().for_each(|v| {
                    *v /= s;
                    if v.abs() < 1e-15 {
                        *v = 0.0;
                    }
                });
                next.push((r, common | bit));
            }
        }
        rays = next;
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (r, _) in rays {
        let n = norm(&r);
        let u: Vec<f64> = r.iter().map(|v| v / n).collect();
        if !out.iter().any(|o| o.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-9)) {
            out.push(u);
        }
    }
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Vertices of `K* ∩ {w¹ = 1}` reached by minimising random linear objectives.
fn sample_section(generators: &[Vec<f64>], d: usize) -> Result<DualSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC7_10);
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut directions: Vec<Vec<f64>> = (0..d).flat_map(|i| [unit(d, i), unit(d, i).iter().map(|v| -v).collect()]).collect();
    for _ in 0..(40 * d) {
        directions.push((0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
    }
    for dir in directions {
        let mut lp = LinearProgram::new(d, Sense::Minimize);
        for (j, c) in dir.iter().enumerate() {
            lp.set_objective_coeff(j, *c);
        }
        for g in generators {
            lp.add_dense(g, Relation::Ge, 0.0)?;
        }
        lp.add_sparse(&[(0, 1.0)], Relation::Eq, 1.0);
        match lp.solve() {
            Ok(sol) => {
                if !vertices.iter().any(|v| v.iter().zip(&sol.x).all(|(a, b)| (a - b).abs() <= 1e-9)) {
                    vertices.push(sol.x);
                }
            }
            Err(LpError::Unbounded) => {
                return Err(Error::MalformedCone("dual section is unbounded".into()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(DualSection { vertices, exact: false })
}
