//! Price models, sampled scenarios and finite event trees.
//!
//! Asset 1 is the numeraire and its price is identically 1; only assets
//! `2..d` carry dynamics. Prices are multiplicative, so they stay positive.
//!
//! The scaled random walk moves each risky log-price by
//! `±σ√Δt + (a − σ²/2)Δt` per step with independent coins, which matches the
//! mean and variance of the log-normal target at every step. With the
//! default symmetric centering the coins are fair; martingale centering picks
//! the up-probability that makes `E[S_{k+1}/S_k] = e^{aΔt}`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::path::{GridPath, PathKind};

/// Node budget for event trees.
pub const NODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gbm,
    ScaledWalk,
    RegimeSwitch,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbm" => Ok(Self::Gbm),
            "scaled_walk" => Ok(Self::ScaledWalk),
            "regime_switch" => Ok(Self::RegimeSwitch),
            _ => Err(Error::Model(format!("unknown model kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    Symmetric,
    Martingale,
}

impl std::str::FromStr for Centering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "martingale" => Ok(Self::Martingale),
            _ => Err(Error::Model(format!("unknown centering `{s}`"))),
        }
    }
}

/// Drift and volatility of the risky assets `2..d` (index 0 is asset 2).
#[derive(Debug, Clone, PartialEq)]
pub struct GbmParams {
    pub drift: Vec<f64>,
    pub vol: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpec {
    pub second: GbmParams,
    /// Switching intensity of the two-state chain (both directions).
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub d: usize,
    pub horizon: f64,
    /// Initial prices of assets `1..d`; the first entry is 1.
    pub s0: Vec<f64>,
    pub gbm: GbmParams,
    /// Correlation of the risky Brownian drivers, `(d−1)×(d−1)`.
    pub corr: Vec<Vec<f64>>,
    /// Walk steps.
    pub steps: usize,
    pub centering: Centering,
    pub regime: Option<RegimeSpec>,
}

impl ModelSpec {
    /// Geometric Brownian motion with independent drivers and unit initial prices.
    pub fn gbm(d: usize, horizon: f64, drift: Vec<f64>, vol: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: ModelKind::Gbm,
            d,
            horizon,
            s0: vec![1.0; d],
            gbm: GbmParams { drift, vol },
            corr: identity(d.saturating_sub(1)),
            steps: 1,
            centering: Centering::Symmetric,
            regime: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The scaled walk with `steps` steps calibrated to this model's parameters.
    pub fn walk(&self, steps: usize) -> Result<Self> {
        let mut s = self.clone();
        s.kind = ModelKind::ScaledWalk;
        s.steps = steps;
        s.validate()?;
        Ok(s)
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn risky(&self) -> usize {
        self.d - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Model(m));
        if self.d < 2 {
            return bad(format!("need at least 2 assets, got {}", self.d));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.s0.len() != self.d || self.s0[0] != 1.0 || self.s0.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("initial prices must be positive with numeraire price 1".into());
        }
        let r = self.risky();
        let check = |p: &GbmParams| -> Result<()> {
            if p.drift.len() != r || p.vol.len() != r {
                return Err(Error::Model(format!("drift and volatility need {r} entries")));
            }
            if p.vol.iter().any(|&s| !(s >= 0.0 && s.is_finite())) || p.drift.iter().any(|a| !a.is_finite()) {
                return Err(Error::Model("volatilities must be nonnegative and parameters finite".into()));
            }
            Ok(())
        };
        check(&self.gbm)?;
        if self.corr.len() != r || self.corr.iter().any(|row| row.len() != r) {
            return bad(format!("correlation matrix must be {r}x{r}"));
        }
        for i in 0..r {
            if (self.corr[i][i] - 1.0).abs() > 1e-12 {
                return bad("correlation diagonal must be 1".into());
            }
            for j in 0..r {
                if (self.corr[i][j] - self.corr[j][i]).abs() > 1e-12 || self.corr[i][j].abs() > 1.0 {
                    return bad("correlation matrix must be symmetric with entries in [-1, 1]".into());
                }
            }
        }
        let eig = DMatrix::from_fn(r, r, |i, j| self.corr[i][j]).symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
            return bad("correlation matrix is not positive semidefinite".into());
        }
        if self.steps == 0 {
            return bad("walk needs at least one step".into());
        }
        if self.kind != ModelKind::Gbm && self.corr != identity(r) {
            return bad("walk and regime models use independent coins; correlation must be the identity".into());
        }
        if self.kind == ModelKind::RegimeSwitch {
            let reg = self.regime.as_ref().ok_or_else(|| Error::Model("regime_switch needs a second regime".into()))?;
            check(&reg.second)?;
            if !(reg.intensity >= 0.0 && reg.intensity.is_finite()) {
                return bad("switching intensity must be nonnegative".into());
            }
        }
        if self.kind != ModelKind::Gbm {
            for p in std::iter::once(&self.gbm).chain(self.regime.as_ref().map(|r| &r.second)) {
                for i in 0..r {
                    let prob = self.up_probability(p, i);
                    if !(0.0..=1.0).contains(&prob) {
                        return bad(format!("martingale centering gives probability {prob} outside [0, 1]"));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn from_kv(kv: &KeyValues, steps_default: usize) -> Result<Self> {
        let m = |e: Error| Error::Model(e.to_string());
        let kind: ModelKind = kv.get("model.kind").unwrap_or("scaled_walk").parse()?;
        let d: usize = kv.require("model.d").map_err(m)?;
        if d < 2 {
            return Err(Error::Model(format!("need at least 2 assets, got {d}")));
        }
        let horizon: f64 = kv.parse_opt("model.horizon").map_err(m)?.unwrap_or(1.0);
        let read_params = |prefix: &str| -> Result<GbmParams> {
            let mut drift = vec![0.0; d - 1];
            let mut vol = vec![0.0; d - 1];
            for (name, target) in [("drift", &mut drift), ("sigma", &mut vol)] {
                for (idx, v) in kv.indexed(&format!("{prefix}.{name}"), 1).map_err(m)? {
                    if idx[0] == 0 || idx[0] >= d {
                        return Err(Error::Model(format!("`{prefix}.{name}.{}`: only assets 2..{d} have dynamics", idx[0] + 1)));
                    }
                    target[idx[0] - 1] = v;
                }
            }
            Ok(GbmParams { drift, vol })
        };
        let gbm = read_params("model")?;
        let mut s0 = vec![1.0; d];
        for (idx, v) in kv.indexed("model.s0", 1).map_err(m)? {
            if idx[0] == 0 || idx[0] >= d {
                return Err(Error::Model("only risky initial prices can be set".into()));
            }
            s0[idx[0]] = v;
        }
        let mut corr = identity(d - 1);
        for (idx, v) in kv.indexed("model.corr", 2).map_err(m)? {
            let (i, j) = (idx[0], idx[1]);
            if i == 0 || j == 0 || i >= d || j >= d {
                return Err(Error::Model("correlation indices refer to assets 2..d".into()));
            }
            corr[i - 1][j - 1] = v;
            corr[j - 1][i - 1] = v;
        }
        let steps: usize = kv.parse_opt("model.steps").map_err(m)?.unwrap_or(steps_default);
        let centering: Centering = kv.get("model.centering").unwrap_or("symmetric").parse()?;
        let regime = if kind == ModelKind::RegimeSwitch {
            Some(RegimeSpec {
                second: read_params("model.regime2")?,
                intensity: kv.require("model.intensity").map_err(m)?,
            })
        } else {
            None
        };
        let spec = Self {
            kind,
            d,
            horizon,
            s0,
            gbm,
            corr,
            steps,
            centering,
            regime,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn up_probability(&self, p: &GbmParams, i: usize) -> f64 {
        match self.centering {
            Centering::Symmetric => 0.5,
            Centering::Martingale => {
                let dt = self.horizon / self.steps as f64;
                let sd = p.vol[i] * dt.sqrt();
                if sd == 0.0 {
                    return 0.5;
                }
                let mu = (p.drift[i] - 0.5 * p.vol[i] * p.vol[i]) * dt;
                let (up, down) = ((mu + sd).exp(), (mu - sd).exp());
                ((p.drift[i] * dt).exp() - down) / (up - down)
            }
        }
    }

    fn log_step(&self, p: &GbmParams, i: usize, up: bool) -> f64 {
        let dt = self.horizon / self.steps as f64;
        let sd = p.vol[i] * dt.sqrt();
        let mu = (p.drift[i] - 0.5 * p.vol[i] * p.vol[i]) * dt;
        if up { mu + sd } else { mu - sd }
    }

    /// Price of risky asset `i` after `k` single-regime walk steps with `ups`
    /// up-moves. Trees and sampled scenarios both use this, so their prices
    /// agree bit for bit.
    fn walk_price(&self, i: usize, ups: usize, k: usize) -> f64 {
        let dt = self.horizon / self.steps as f64;
        let p = &self.gbm;
        let sd = p.vol[i] * dt.sqrt();
        let mu = (p.drift[i] - 0.5 * p.vol[i] * p.vol[i]) * dt;
        self.s0[i + 1] * ((2.0 * ups as f64 - k as f64) * sd + k as f64 * mu).exp()
    }
}

fn identity(r: usize) -> Vec<Vec<f64>> {
    (0..r).map(|i| (0..r).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Independent random stream for path `index` under `master`.
pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct MarketScenario {
    /// Prices, piecewise linear, `S¹ ≡ 1`.
    pub prices: GridPath,
    /// Driving factor: Brownian skeleton or walk positions per risky asset,
    /// plus the regime indicator for regime-switching models.
    pub factor: GridPath,
}

/// Samples one scenario on `m` cells. Deterministic in `(spec, m, seed)`.
pub fn sample_scenario(spec: &ModelSpec, m: usize, seed: u64) -> Result<MarketScenario> {
    sample_with(spec, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn sample_with(spec: &ModelSpec, m: usize, rng: &mut ChaCha8Rng) -> Result<MarketScenario> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::Model("need at least one grid cell".into()));
    }
    let r = spec.risky();
    let dt = spec.horizon / m as f64;
    let mut prices = Vec::with_capacity(m + 1);
    let mut factor = Vec::with_capacity(m + 1);
    match spec.kind {
        ModelKind::Gbm | ModelKind::RegimeSwitch => {
            let chol = factor_matrix(&spec.corr);
            let mut logs: Vec<f64> = spec.s0[1..].iter().map(|s| s.ln()).collect();
            let mut w = vec![0.0; r];
            let mut regime = 0usize;
            let switch = spec.regime.as_ref();
            let mut next_switch = match switch {
                Some(reg) if reg.intensity > 0.0 => Exp::new(reg.intensity).expect("positive rate").sample(rng),
                _ => f64::INFINITY,
            };
            let push = |logs: &[f64], w: &[f64], regime: usize, prices: &mut Vec<Vec<f64>>, factor: &mut Vec<Vec<f64>>| {
                let mut row = vec![1.0];
                row.extend(logs.iter().map(|l| l.exp()));
                prices.push(row);
                let mut f = w.to_vec();
                if switch.is_some() {
                    f.push(regime as f64);
                }
                factor.push(f);
            };
            push(&logs, &w, regime, &mut prices, &mut factor);
            for k in 0..m {
                let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
                let mut t = t0;
                while t < t1 {
                    let end = next_switch.min(t1);
                    let h = end - t;
                    if h > 0.0 {
                        let params = if regime == 0 { &spec.gbm } else { &switch.expect("regime set").second };
                        let xi: Vec<f64> = (0..r).map(|_| StandardNormal.sample(rng)).collect();
                        for i in 0..r {
                            let z: f64 = (0..r).map(|j| chol[(i, j)] * xi[j]).sum();
                            let dw = z * h.sqrt();
                            w[i] += dw;
                            logs[i] += (params.drift[i] - 0.5 * params.vol[i] * params.vol[i]) * h + params.vol[i] * dw;
                        }
                    }
                    t = end;
                    if next_switch <= t1 {
                        regime = 1 - regime;
                        let rate = switch.expect("switch time implies a regime").intensity;
                        next_switch += Exp::new(rate).expect("positive rate").sample(rng);
                    }
                }
                push(&logs, &w, regime, &mut prices, &mut factor);
            }
        }
        ModelKind::ScaledWalk => {
            let n = spec.steps;
            if m % n != 0 {
                return Err(Error::Model(format!("{m} grid cells do not embed {n} walk steps")));
            }
            let per = m / n;
            let mut ups = vec![0usize; r];
            let probs: Vec<f64> = (0..r).map(|i| spec.up_probability(&spec.gbm, i)).collect();
            for k in 0..n {
                let row: Vec<f64> = std::iter::once(1.0).chain((0..r).map(|i| spec.walk_price(i, ups[i], k))).collect();
                let f: Vec<f64> = ups.iter().map(|&u| 2.0 * u as f64 - k as f64).collect();
                for _ in 0..per {
                    prices.push(row.clone());
                    factor.push(f.clone());
                }
                for i in 0..r {
                    if rng.random::<f64>() < probs[i] {
                        ups[i] += 1;
                    }
                }
            }
            prices.push(std::iter::once(1.0).chain((0..r).map(|i| spec.walk_price(i, ups[i], n))).collect());
            factor.push(ups.iter().map(|&u| 2.0 * u as f64 - n as f64).collect());
        }
    }
    assert!(prices.iter().flatten().all(|&s| s > 0.0 && s.is_finite()), "multiplicative dynamics keep prices positive");
    Ok(MarketScenario {
        prices: GridPath::new(spec.horizon, prices, PathKind::PiecewiseLinear)?,
        factor: GridPath::new(spec.horizon, factor, PathKind::PiecewiseLinear)?,
    })
}

/// `L` with `L Lᵀ = corr` for a positive semidefinite correlation matrix.
fn factor_matrix(corr: &[Vec<f64>]) -> DMatrix<f64> {
    let r = corr.len();
    let eig = DMatrix::from_fn(r, r, |i, j| corr[i][j]).symmetric_eigen();
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * sqrt
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    /// Time index; the node sits at `depth · T / n`.
    pub depth: usize,
    pub prices: Vec<f64>,
    /// Regime (or coin outcome) label.
    pub label: usize,
    /// `(child, transition probability)`.
    pub children: Vec<(usize, f64)>,
    /// Whether trading happens at this node; chance nodes only reveal
    /// information.
    pub tradable: bool,
    /// Unconditional probability of reaching the node.
    pub reach: f64,
}

#[derive(Debug, Clone)]
pub struct EventTree {
    nodes: Vec<TreeNode>,
    steps: usize,
    horizon: f64,
    recombining: bool,
}

/// How [`build_tree`] lays out nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeLayout {
    /// One node per history.
    Full,
    /// Walk histories with the same up-counts share a node.
    Recombining,
}

/// Event tree of `n` walk steps for the walk calibrated to `spec`'s
/// parameters (any kind; regime models branch on the regime chain too).
pub fn build_tree(spec: &ModelSpec, n: usize, layout: TreeLayout) -> Result<EventTree> {
    let spec = spec.walk(n)?.with_kind_of(spec);
    let r = spec.risky();
    let regime = spec.kind == ModelKind::RegimeSwitch;
    if regime && layout == TreeLayout::Recombining {
        return Err(Error::Model("regime-switching trees do not recombine".into()));
    }
    let coin_branches = 1u128 << r;
    let branches = coin_branches * if regime { 2 } else { 1 };
    let size: u128 = match layout {
        TreeLayout::Full => (0..=n as u32).map(|k| branches.saturating_pow(k)).fold(0u128, |a, b| a.saturating_add(b)),
        TreeLayout::Recombining => (0..=n as u128).map(|k| (k + 1).saturating_pow(r as u32)).sum(),
    };
    if size > NODE_BUDGET as u128 {
        return Err(Error::Budget {
            what: "event tree nodes",
            size,
            limit: NODE_BUDGET as u128,
        });
    }
    let dt = spec.horizon / n as f64;
    let switch_p = spec.regime.as_ref().map(|g| 1.0 - (-g.intensity * dt).exp()).unwrap_or(0.0);
    let root = TreeNode {
        depth: 0,
        prices: spec.s0.clone(),
        label: 0,
        children: Vec::new(),
        tradable: true,
        reach: 1.0,
    };
    let mut nodes = vec![root];
    match layout {
        TreeLayout::Full => {
            // (node, ups per asset) frontier for the single-regime price formula
            let mut frontier: Vec<(usize, Vec<usize>)> = vec![(0, vec![0; r])];
            for k in 0..n {
                let mut next = Vec::with_capacity(frontier.len() * branches as usize);
                for (id, ups) in frontier {
                    let lab = nodes[id].label;
                    let params = if lab == 0 { spec.gbm.clone() } else { spec.regime.as_ref().expect("regime").second.clone() };
                    for mask in 0..coin_branches as usize {
                        let mut prob = 1.0;
                        let mut ups2 = ups.clone();
                        let mut prices = vec![1.0; spec.d];
                        for i in 0..r {
                            let up = mask >> i & 1 == 1;
                            let p = spec.up_probability(&params, i);
                            prob *= if up { p } else { 1.0 - p };
                            if up {
                                ups2[i] += 1;
                            }
                            prices[i + 1] = if regime {
                                nodes[id].prices[i + 1] * spec.log_step(&params, i, up).exp()
                            } else {
                                spec.walk_price(i, ups2[i], k + 1)
                            };
                        }
                        let outcomes: Vec<(usize, f64)> = if regime {
                            vec![(lab, 1.0 - switch_p), (1 - lab, switch_p)]
                        } else {
                            vec![(0, 1.0)]
                        };
                        for (label, q) in outcomes {
                            let child = nodes.len();
                            let reach = nodes[id].reach * prob * q;
                            nodes.push(TreeNode {
                                depth: k + 1,
                                prices: prices.clone(),
                                label,
                                children: Vec::new(),
                                tradable: true,
                                reach,
                            });
                            nodes[id].children.push((child, prob * q));
                            next.push((child, ups2.clone()));
                        }
                    }
                }
                frontier = next;
            }
        }
        TreeLayout::Recombining => {
            let probs: Vec<f64> = (0..r).map(|i| spec.up_probability(&spec.gbm, i)).collect();
            let mut layer: Vec<(usize, Vec<usize>)> = vec![(0, vec![0; r])];
            for k in 0..n {
                let mut index: std::collections::HashMap<Vec<usize>, usize> = std::collections::HashMap::new();
                let mut next: Vec<(usize, Vec<usize>)> = Vec::new();
                for (id, ups) in &layer {
                    for mask in 0..coin_branches as usize {
                        let mut prob = 1.0;
                        let mut ups2 = ups.clone();
                        for i in 0..r {
                            let up = mask >> i & 1 == 1;
                            prob *= if up { probs[i] } else { 1.0 - probs[i] };
                            if up {
                                ups2[i] += 1;
                            }
                        }
                        let child = match index.get(&ups2) {
                            Some(&c) => c,
                            None => {
                                let c = nodes.len();
                                let prices = std::iter::once(1.0).chain((0..r).map(|i| spec.walk_price(i, ups2[i], k + 1))).collect();
                                nodes.push(TreeNode {
                                    depth: k + 1,
                                    prices,
                                    label: 0,
                                    children: Vec::new(),
                                    tradable: true,
                                    reach: 0.0,
                                });
                                index.insert(ups2.clone(), c);
                                next.push((c, ups2));
                                c
                            }
                        };
                        nodes[child].reach += nodes[*id].reach * prob;
                        nodes[*id].children.push((child, prob));
                    }
                }
                next.sort_by(|a, b| a.1.cmp(&b.1));
                layer = next;
            }
        }
    }
    let tree = EventTree {
        nodes,
        steps: n,
        horizon: spec.horizon,
        recombining: layout == TreeLayout::Recombining,
    };
    tree.validate()?;
    Ok(tree)
}

impl ModelSpec {
    fn with_kind_of(mut self, original: &ModelSpec) -> Self {
        if original.kind == ModelKind::RegimeSwitch {
            self.kind = ModelKind::RegimeSwitch;
        }
        self
    }
}

impl EventTree {
    /// Builds a tree from explicit nodes (node 0 is the root).
    pub fn from_nodes(nodes: Vec<TreeNode>, steps: usize, horizon: f64) -> Result<Self> {
        let mut tree = EventTree {
            nodes,
            steps,
            horizon,
            recombining: false,
        };
        tree.recompute_reach();
        tree.validate()?;
        Ok(tree)
    }

    fn recompute_reach(&mut self) {
        for n in &mut self.nodes {
            n.reach = 0.0;
        }
        self.nodes[0].reach = 1.0;
        for id in self.topological_order() {
            let reach = self.nodes[id].reach;
            for (c, p) in self.nodes[id].children.clone() {
                self.nodes[c].reach += reach * p;
            }
        }
    }

    /// Parents before children.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            for &(c, _) in &n.children {
                indeg[c] += 1;
            }
        }
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        stack.reverse();
        while let Some(i) = stack.pop() {
            order.push(i);
            for &(c, _) in self.nodes[i].children.iter().rev() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        order
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Model("empty tree".into()));
        }
        let d = self.nodes[0].prices.len();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.prices.len() != d || n.prices[0] != 1.0 {
                return Err(Error::Model(format!("node {i}: prices need {d} entries with numeraire price 1")));
            }
            if let Some(&s) = n.prices.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
                return Err(Error::NonPositivePrice(s));
            }
            if !n.children.is_empty() {
                let total: f64 = n.children.iter().map(|c| c.1).sum();
                if (total - 1.0).abs() > 1e-12 || n.children.iter().any(|c| c.1 < 0.0) {
                    return Err(Error::Model(format!("node {i}: child probabilities sum to {total}")));
                }
                if n.children.iter().any(|&(c, _)| c >= self.nodes.len() || c == i) {
                    return Err(Error::Model(format!("node {i}: bad child index")));
                }
            }
        }
        if self.topological_order().len() != self.nodes.len() {
            return Err(Error::Model("tree contains a cycle".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].prices.len()
    }

    /// Number of walk steps `n`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_recombining(&self) -> bool {
        self.recombining
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    /// Number of root-to-leaf histories.
    pub fn path_count(&self) -> u128 {
        let mut count = vec![0u128; self.nodes.len()];
        count[0] = 1;
        for id in self.topological_order() {
            let c = count[id];
            for &(ch, _) in &self.nodes[id].children {
                count[ch] = count[ch].saturating_add(c);
            }
        }
        self.leaves().map(|l| count[l]).fold(0u128, |a, b| a.saturating_add(b))
    }

    /// Product with an independent uniform coin revealed at time 0: a
    /// non-tradable chance root followed by `arity` copies of this tree.
    pub fn with_coin(&self, arity: usize) -> Result<EventTree> {
        if arity == 0 {
            return Err(Error::Model("coin arity must be positive".into()));
        }
        let size = self.nodes.len() as u128 * arity as u128 + 1;
        if size > NODE_BUDGET as u128 {
            return Err(Error::Budget {
                what: "product tree nodes",
                size,
                limit: NODE_BUDGET as u128,
            });
        }
        let mut nodes = vec![TreeNode {
            depth: 0,
            prices: self.nodes[0].prices.clone(),
            label: 0,
            children: Vec::new(),
            tradable: false,
            reach: 1.0,
        }];
        for c in 0..arity {
            let offset = nodes.len();
            nodes[0].children.push((offset, 1.0 / arity as f64));
            for n in &self.nodes {
                let mut copy = n.clone();
                copy.label = c;
                copy.children = n.children.iter().map(|&(ch, p)| (ch + offset, p)).collect();
                nodes.push(copy);
            }
        }
        let mut tree = EventTree {
            nodes,
            steps: self.steps,
            horizon: self.horizon,
            recombining: self.recombining,
        };
        tree.recompute_reach();
        tree.validate()?;
        Ok(tree)
    }

    /// Edge list `parent,child,prob,S2,...,Sd,label`; the root row has an
    /// empty parent.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let cols: Vec<String> = (2..=d).map(|i| format!("S{i}")).collect();
        let mut s = format!("parent,child,prob,{},label\n", cols.join(","));
        let row = |s: &mut String, parent: String, child: usize, prob: f64| {
            let n = &self.nodes[child];
            let prices: Vec<String> = n.prices[1..].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{parent},{child},{prob},{},{}", prices.join(","), n.label);
        };
        row(&mut s, String::new(), 0, 1.0);
        for id in self.topological_order() {
            for &(c, p) in &self.nodes[id].children {
                row(&mut s, id.to_string(), c, p);
            }
        }
        s
    }
}

/// Risky price paths along every root-to-leaf history of a full tree, each
/// with its probability. Fails on recombining trees above `limit` paths.
pub fn tree_paths(tree: &EventTree, limit: u128) -> Result<Vec<(Vec<usize>, f64)>> {
    let count = tree.path_count();
    if count > limit {
        return Err(Error::Budget {
            what: "tree histories",
            size: count,
            limit,
        });
    }
    let mut out = Vec::new();
    let mut stack = vec![(vec![0usize], 1.0)];
    while let Some((path, p)) = stack.pop() {
        let last = *path.last().expect("nonempty");
        let children = &tree.nodes[last].children;
        if children.is_empty() {
            out.push((path, p));
            continue;
        }
        for &(c, q) in children.iter().rev() {
            let mut next = path.clone();
            next.push(c);
            stack.push((next, p * q));
        }
    }
    Ok(out)
}

/// Kolmogorov distance between the leaf distribution of risky asset `i`
/// (0-based among all assets, `i ≥ 1`) and the log-normal law of the gbm
/// target at the horizon.
pub fn ks_to_lognormal(tree: &EventTree, spec: &ModelSpec, i: usize) -> Result<f64> {
    if i == 0 || i >= spec.d {
        return Err(Error::Model("the numeraire has no distribution".into()));
    }
    let (a, s) = (spec.gbm.drift[i - 1], spec.gbm.vol[i - 1]);
    if s == 0.0 {
        return Err(Error::Model("degenerate target distribution".into()));
    }
    let mean = spec.s0[i].ln() + (a - 0.5 * s * s) * spec.horizon;
    let normal = Normal::new(mean, s * spec.horizon.sqrt()).map_err(|e| Error::Model(e.to_string()))?;
    let mut atoms: Vec<(f64, f64)> = tree.leaves().map(|l| (tree.nodes[l].prices[i].ln(), tree.nodes[l].reach)).collect();
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut cdf = 0.0;
    let mut worst = 0.0f64;
    let mut k = 0;
    while k < atoms.len() {
        let v = atoms[k].0;
        let f = normal.cdf(v);
        worst = worst.max((f - cdf).abs());
        while k < atoms.len() && atoms[k].0 == v {
            cdf += atoms[k].1;
            k += 1;
        }
        worst = worst.max((f - cdf).abs());
    }
    Ok(worst)
}

/// `φ(x) = x / S` coordinatewise: monetary to physical units.
pub fn to_physical(prices: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if let Some(&s) = prices.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::NonPositivePrice(s));
    }
    crate::error::check_dim(prices.len(), x.len())?;
    Ok(x.iter().zip(prices).map(|(v, s)| v / s).collect())
}

/// `φ⁻¹(x) = x ⊙ S`: physical to monetary units.
pub fn to_monetary(prices: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if let Some(&s) = prices.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::NonPositivePrice(s));
    }
    crate::error::check_dim(prices.len(), x.len())?;
    Ok(x.iter().zip(prices).map(|(v, s)| v * s).collect())
}
