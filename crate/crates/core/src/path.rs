//! Paths on uniform time grids.
//!
//! A [`GridPath`] stores `m + 1` node values at `t_k = kT/m` and an explicit
//! value at `0−`, so a jump at time zero is representable. Piecewise-constant
//! paths are càdlàg: they hold `values[k]` on `[t_k, t_{k+1})`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    PiecewiseConstant,
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    horizon: f64,
    kind: PathKind,
    values: Vec<Vec<f64>>,
    pre0: Vec<f64>,
}

impl GridPath {
    /// `values` holds one row per node `t_0, …, t_m`; the `0−` value defaults
    /// to `values[0]`.
    pub fn new(horizon: f64, values: Vec<Vec<f64>>, kind: PathKind) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Path(format!("horizon must be positive, got {horizon}")));
        }
        if values.len() < 2 {
            return Err(Error::Path("need at least one grid cell".into()));
        }
        let d = values[0].len();
        if d == 0 {
            return Err(Error::Path("zero-dimensional path".into()));
        }
        for (k, row) in values.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Path(format!("node {k} has {} coordinates, expected {d}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Path(format!("non-finite value at node {k}")));
            }
        }
        let pre0 = values[0].clone();
        Ok(Self { horizon, kind, values, pre0 })
    }

    pub fn scalar(horizon: f64, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        Self::new(horizon, values.into_iter().map(|v| vec![v]).collect(), kind)
    }

    pub fn constant(horizon: f64, m: usize, value: Vec<f64>, kind: PathKind) -> Result<Self> {
        Self::new(horizon, vec![value; m + 1], kind)
    }

    pub fn with_pre0(mut self, pre0: Vec<f64>) -> Result<Self> {
        if pre0.len() != self.dim() || pre0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Path("bad 0- value".into()));
        }
        self.pre0 = pre0;
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of grid cells `m`.
    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.pre0.len()
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.cells() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.cells() as f64
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn pre0(&self) -> &[f64] {
        &self.pre0
    }

    pub fn terminal(&self) -> &[f64] {
        &self.values[self.cells()]
    }

    /// Increment at node `k`; node 0 carries the jump from `0−`.
    pub fn increment(&self, k: usize) -> Vec<f64> {
        let prev = if k == 0 { &self.pre0 } else { &self.values[k - 1] };
        self.values[k].iter().zip(prev).map(|(a, b)| a - b).collect()
    }

    pub fn increments(&self) -> Vec<Vec<f64>> {
        (0..=self.cells()).map(|k| self.increment(k)).collect()
    }

    /// Value at an arbitrary `t ∈ [0, T]` according to the path kind.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let m = self.cells();
        let s = (t / self.horizon * m as f64).clamp(0.0, m as f64);
        let k = (s.floor() as usize).min(m);
        match self.kind {
            PathKind::PiecewiseConstant => self.values[k].clone(),
            PathKind::PiecewiseLinear => {
                if k == m {
                    return self.values[m].clone();
                }
                let w = s - k as f64;
                self.values[k]
                    .iter()
                    .zip(&self.values[k + 1])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }

    pub fn component(&self, i: usize) -> GridPath {
        GridPath {
            horizon: self.horizon,
            kind: self.kind,
            values: self.values.iter().map(|r| vec![r[i]]).collect(),
            pre0: vec![self.pre0[i]],
        }
    }

    /// Applies `f` to every coordinate of every node (and to `0−`).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridPath {
        GridPath {
            horizon: self.horizon,
            kind: self.kind,
            values: self.values.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect(),
            pre0: self.pre0.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `sup_k |values[k]|` in the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|r| euclid(r)).fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.cells() == other.cells() && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon
    }

    /// Splits every cell into `factor` equal cells.
    pub fn refine(&self, factor: usize) -> Result<GridPath> {
        if factor == 0 {
            return Err(Error::Path("refinement factor must be positive".into()));
        }
        let m = self.cells();
        let mut values = Vec::with_capacity(m * factor + 1);
        for k in 0..m {
            for j in 0..factor {
                let row = match self.kind {
                    PathKind::PiecewiseConstant => self.values[k].clone(),
                    PathKind::PiecewiseLinear => {
                        let w = j as f64 / factor as f64;
                        self.values[k]
                            .iter()
                            .zip(&self.values[k + 1])
                            .map(|(a, b)| a + w * (b - a))
                            .collect()
                    }
                };
                values.push(row);
            }
        }
        values.push(self.values[m].clone());
        Ok(GridPath {
            horizon: self.horizon,
            kind: self.kind,
            values,
            pre0: self.pre0.clone(),
        })
    }

    /// Joins `next` after `self`; `next` starts at `self`'s horizon from
    /// `self`'s terminal value, without a jump of its own at time 0.
    pub fn concat(&self, next: &GridPath) -> Result<GridPath> {
        if (self.step() - next.step()).abs() > 1e-12 * self.step() || self.dim() != next.dim() {
            return Err(Error::Grid("concatenated paths need equal cell widths and dimensions".into()));
        }
        if self.terminal() != next.at(0) || next.pre0() != next.at(0) {
            return Err(Error::Grid("second path must start from the first path's terminal value".into()));
        }
        let mut values = self.values.clone();
        values.extend(next.values[1..].iter().cloned());
        Ok(GridPath {
            horizon: self.horizon + next.horizon,
            kind: self.kind,
            values,
            pre0: self.pre0.clone(),
        })
    }

    /// CSV with header `t,x1,...,xd`, preceded by `# pre0:` when the path
    /// jumps at time zero.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if self.pre0 != self.values[0] {
            let pre: Vec<String> = self.pre0.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "# pre0: {}", pre.join(" "));
        }
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        let _ = writeln!(s, "t,{}", header.join(","));
        for (k, row) in self.values.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{},{}", self.time(k), cells.join(","));
        }
        s
    }

    pub fn from_csv(text: &str, kind: PathKind) -> Result<GridPath> {
        let mut pre0: Option<Vec<f64>> = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut header_seen = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("pre0:") {
                    pre0 = Some(parse_floats(v.split_whitespace())?);
                }
                continue;
            }
            if !header_seen {
                if !line.starts_with("t,") {
                    return Err(Error::Path("path CSV must start with a `t,x1,...` header".into()));
                }
                header_seen = true;
                continue;
            }
            let mut nums = parse_floats(line.split(','))?;
            if nums.len() < 2 {
                return Err(Error::Path(format!("short CSV row `{line}`")));
            }
            times.push(nums.remove(0));
            values.push(nums);
        }
        let horizon = *times.last().ok_or_else(|| Error::Path("empty path CSV".into()))?;
        let m = times.len().saturating_sub(1).max(1);
        for (k, t) in times.iter().enumerate() {
            if (t - horizon * k as f64 / m as f64).abs() > 1e-9 * horizon.max(1.0) {
                return Err(Error::Path(format!("row {k} is not on a uniform grid")));
            }
        }
        let path = GridPath::new(horizon, values, kind)?;
        match pre0 {
            Some(p) => path.with_pre0(p),
            None => Ok(path),
        }
    }
}

fn parse_floats<'a>(it: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    it.map(|s| s.trim().parse::<f64>().map_err(|_| Error::Path(format!("cannot parse `{s}`"))))
        .collect()
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn require_same_grid(a: &GridPath, b: &GridPath) -> Result<()> {
    if !a.same_grid(b) {
        return Err(Error::Grid(format!(
            "grids differ: ({}, {}) vs ({}, {})",
            a.horizon,
            a.cells(),
            b.horizon,
            b.cells()
        )));
    }
    Ok(())
}

/// `w(f, ε)`: the largest distance between node values at most `ε` apart in
/// time.
pub fn modulus(f: &GridPath, eps: f64) -> f64 {
    let m = f.cells();
    let window = ((eps / f.step()) * (1.0 + 1e-12)).floor().max(0.0) as usize;
    let window = window.min(m);
    let mut best = 0.0f64;
    for r in 0..=m {
        for s in r + 1..=(r + window).min(m) {
            best = best.max(dist(&f.values[r], &f.values[s]));
        }
    }
    best
}

/// `max_k |f(t_k) − g(t_k)|`.
pub fn uniform_distance(f: &GridPath, g: &GridPath) -> Result<f64> {
    require_same_grid(f, g)?;
    Ok(f.values.iter().zip(&g.values).map(|(a, b)| dist(a, b)).fold(0.0, f64::max))
}

/// Meyer–Zheng distance `∫_{[0,T)} min(|x − y|, 1) dt + min(|x(T) − y(T)|, 1)`,
/// evaluated exactly on the common refinement with both paths read as step
/// functions.
pub fn mz_distance(x: &GridPath, y: &GridPath) -> Result<f64> {
    if (x.horizon - y.horizon).abs() > 1e-12 * x.horizon || x.dim() != y.dim() {
        return Err(Error::Grid("Meyer-Zheng distance needs equal horizons and dimensions".into()));
    }
    let (mx, my) = (x.cells(), y.cells());
    let m = lcm(mx, my);
    let (fx, fy) = (m / mx, m / my);
    let h = x.horizon / m as f64;
    let mut total = 0.0;
    for k in 0..m {
        total += h * dist(&x.values[k / fx], &y.values[k / fy]).min(1.0);
    }
    Ok(total + dist(x.terminal(), y.terminal()).min(1.0))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    a / gcd(a, b) * b
}

/// Left-endpoint Stieltjes sums `Σ_{j≤k} f(t_j)·Δb_{t_j}`, including the jump
/// at 0. A scalar integrand multiplies every coordinate; a `d`-dimensional one
/// acts coordinatewise.
pub fn stieltjes_integral(f: &GridPath, b: &GridPath) -> Result<GridPath> {
    require_same_grid(f, b)?;
    let d = b.dim();
    if f.dim() != 1 && f.dim() != d {
        return Err(Error::Grid(format!("integrand dimension {} does not fit integrator dimension {d}", f.dim())));
    }
    let mut acc = vec![0.0; d];
    let mut values = Vec::with_capacity(b.cells() + 1);
    for k in 0..=b.cells() {
        let db = b.increment(k);
        for i in 0..d {
            let fi = if f.dim() == 1 { f.values[k][0] } else { f.values[k][i] };
            acc[i] += fi * db[i];
        }
        values.push(acc.clone());
    }
    GridPath::new(b.horizon, values, PathKind::PiecewiseConstant)?.with_pre0(vec![0.0; d])
}

/// Running total variation (sum over coordinates) with per-jump directions.
#[derive(Debug, Clone)]
pub struct BVCertificate {
    pub variation: GridPath,
    /// `Δb / |Δb|₁` at each node, `None` where the path does not move.
    pub directions: Vec<Option<Vec<f64>>>,
}

impl BVCertificate {
    pub fn total(&self) -> f64 {
        self.variation.terminal()[0]
    }
}

pub fn total_variation(b: &GridPath) -> BVCertificate {
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(b.cells() + 1);
    let mut directions = Vec::with_capacity(b.cells() + 1);
    for k in 0..=b.cells() {
        let db = b.increment(k);
        let n1: f64 = db.iter().map(|v| v.abs()).sum();
        acc += n1;
        values.push(vec![acc]);
        directions.push(if n1 > 0.0 { Some(db.iter().map(|v| v / n1).collect()) } else { None });
    }
    let variation = GridPath::new(b.horizon, values, PathKind::PiecewiseConstant)
        .and_then(|p| p.with_pre0(vec![0.0]))
        .expect("variation of a valid path is a valid path");
    BVCertificate { variation, directions }
}

/// Coarse approximation on `m` cells: the value at coarse node `t_k` is
/// `b(t_k)`, so each coarse increment collects the fine increments of its
/// cell. The `0−` value and the jump at 0 are kept.
pub fn piecewise_approx(b: &GridPath, m: usize) -> Result<GridPath> {
    let fine = b.cells();
    if m == 0 || fine % m != 0 {
        return Err(Error::Grid(format!("{m} coarse cells do not divide {fine} fine cells")));
    }
    let r = fine / m;
    let values = (0..=m).map(|k| b.values[k * r].clone()).collect();
    GridPath::new(b.horizon, values, PathKind::PiecewiseConstant)?.with_pre0(b.pre0.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(v: Vec<f64>) -> GridPath {
        GridPath::scalar(1.0, v, PathKind::PiecewiseConstant).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GridPath::scalar(0.0, vec![1.0, 2.0], PathKind::PiecewiseConstant).is_err());
        assert!(GridPath::scalar(1.0, vec![1.0], PathKind::PiecewiseConstant).is_err());
        assert!(GridPath::scalar(1.0, vec![1.0, f64::NAN], PathKind::PiecewiseConstant).is_err());
        assert!(GridPath::new(1.0, vec![vec![1.0], vec![1.0, 2.0]], PathKind::PiecewiseConstant).is_err());
    }

    #[test]
    fn modulus_examples() {
        assert_eq!(modulus(&pc(vec![3.0; 11]), 0.5), 0.0);
        let lin = GridPath::scalar(1.0, (0..=100).map(|k| k as f64 / 100.0).collect(), PathKind::PiecewiseLinear).unwrap();
        assert!((modulus(&lin, 0.1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn uniform_distance_shift() {
        let f = GridPath::new(1.0, vec![vec![0.0, 1.0], vec![2.0, -1.0]], PathKind::PiecewiseLinear).unwrap();
        let g = f.map(|v| v + 0.5);
        assert_eq!(uniform_distance(&f, &f).unwrap(), 0.0);
        assert!((uniform_distance(&f, &g).unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert!(uniform_distance(&f, &pc(vec![0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn mz_examples() {
        let zero = pc(vec![0.0, 0.0]);
        assert_eq!(mz_distance(&zero, &zero).unwrap(), 0.0);
        let jump = GridPath::new(1.0, vec![vec![0.0, 0.0], vec![5.0, 0.0]], PathKind::PiecewiseConstant).unwrap();
        let z2 = GridPath::new(1.0, vec![vec![0.0, 0.0]; 2], PathKind::PiecewiseConstant).unwrap();
        assert_eq!(mz_distance(&z2, &jump).unwrap(), 1.0);
        let y = pc(vec![0.5, 2.0, 2.0]);
        assert!((mz_distance(&zero, &y).unwrap() - 1.75).abs() < 1e-15);
        // Riemann check of the same value on a fine grid
        let fine = y.refine(64).unwrap();
        let zf = pc(vec![0.0; 129]);
        let riemann: f64 = (0..128).map(|k| fine.at(k)[0].abs().min(1.0) / 128.0).sum::<f64>() + 1.0;
        assert!((mz_distance(&zf, &fine).unwrap() - riemann).abs() < 1e-12);
    }

    #[test]
    fn stieltjes_examples() {
        let b = pc(vec![1.0, 3.0, 2.0]).with_pre0(vec![0.5]).unwrap();
        let one = pc(vec![1.0; 3]);
        let i = stieltjes_integral(&one, &b).unwrap();
        assert_eq!(i.values(), &[vec![0.5], vec![2.5], vec![1.5]]);
        let c = pc(vec![2.0; 3]);
        assert_eq!(stieltjes_integral(&c, &b).unwrap().terminal(), &[3.0]);
    }

    #[test]
    fn variation_examples() {
        let cert = total_variation(&pc(vec![1.0; 5]));
        assert_eq!(cert.total(), 0.0);
        assert!(cert.directions.iter().all(Option::is_none));
        let b = GridPath::new(1.0, vec![vec![0.0, 0.0], vec![1.0, -2.0]], PathKind::PiecewiseConstant).unwrap();
        let cert = total_variation(&b);
        assert_eq!(cert.total(), 3.0);
        assert_eq!(cert.directions[1].as_deref(), Some(&[1.0 / 3.0, -2.0 / 3.0][..]));
    }

    #[test]
    fn piecewise_approx_examples() {
        let b = pc(vec![0.0, 1.0, 3.0, 2.0, 5.0]);
        let one = piecewise_approx(&b, 1).unwrap();
        assert_eq!(one.values(), &[vec![0.0], vec![5.0]]);
        let coarse = pc(vec![1.0, 1.0, 2.0, 2.0]);
        let two = piecewise_approx(&coarse.refine(1).unwrap(), 3).unwrap();
        assert_eq!(two.values(), coarse.values());
        assert!(piecewise_approx(&b, 3).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = GridPath::new(2.0, vec![vec![0.1, 1.0 / 3.0], vec![-2.5, 1e-17]], PathKind::PiecewiseConstant)
            .unwrap()
            .with_pre0(vec![0.0, 0.0])
            .unwrap();
        let back = GridPath::from_csv(&p.to_csv(), PathKind::PiecewiseConstant).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn concat_adds_variation() {
        let a = pc(vec![0.0, 1.0, -1.0]);
        let b = pc(vec![-1.0, 2.0, 0.0]);
        assert!(a.concat(&pc(vec![2.0, 2.0, 0.0])).is_err());
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.cells(), 4);
        assert_eq!(total_variation(&ab).total(), total_variation(&a).total() + total_variation(&b).total());
    }
}
