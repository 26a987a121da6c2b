use std::collections::HashMap;

use rayon::prelude::*;

use crate::cone::{SolvencyCone, TOL};
use crate::error::{Error, Result};
use crate::market::{path_rng, sample_with, EventTree, ModelSpec};
use crate::portfolio::{repair_strategy, wealth, Strategy};
use crate::utility::UtilitySpec;

use super::enumerate::Problem;
use super::{monetary, ActionGrid, Method, ValueReport};

/// Optimal trades recorded along an event tree, looked up by date, prices
/// and the holdings carried into the node.
#[derive(Debug, Clone, Default)]
pub struct TreePolicy {
    decisions: HashMap<(usize, Vec<u64>), Vec<(Vec<f64>, Vec<f64>)>>,
}

impl TreePolicy {
    /// Walks the tree forward from `x` along the enumerated optimum,
    /// recording each decision. Costs one enumeration per visited node.
    pub fn optimal(tree: &EventTree, x: &[f64], cone: &SolvencyCone, grid: &ActionGrid, utility: &UtilitySpec) -> Result<Self> {
        let work = super::enumeration_work(tree, grid);
        if work > super::ENUMERATION_BUDGET {
            return Err(Error::Budget {
                what: "enumeration work",
                size: work,
                limit: super::ENUMERATION_BUDGET,
            });
        }
        let problem = Problem { tree, cone, grid, utility };
        let mut policy = TreePolicy::default();
        let mut stack = vec![(0usize, x.to_vec())];
        while let Some((id, h)) = stack.pop() {
            let node = tree.node(id);
            if node.children.is_empty() {
                continue;
            }
            let (_, trade) = problem.best(id, &h, 2).ok_or(Error::NoAdmissibleProfile)?;
            let v = monetary(&node.prices, &h);
            let h2: Vec<f64> = v.iter().zip(&trade).zip(&node.prices).map(|((a, t), s)| (a + t) / s).collect();
            if node.tradable {
                policy.insert(node.depth, &node.prices, h.clone(), trade);
            }
            for &(c, _) in &node.children {
                stack.push((c, h2.clone()));
            }
        }
        Ok(policy)
    }

    fn insert(&mut self, depth: usize, prices: &[f64], holdings: Vec<f64>, trade: Vec<f64>) {
        let key = (depth, prices.iter().map(|p| p.to_bits()).collect());
        let list = self.decisions.entry(key).or_default();
        if !list.iter().any(|(h, _)| close(h, &holdings)) {
            list.push((holdings, trade));
        }
    }

    /// Recorded trade for this state, if any.
    pub fn lookup(&self, depth: usize, prices: &[f64], holdings: &[f64]) -> Option<&[f64]> {
        let key = (depth, prices.iter().map(|p| p.to_bits()).collect::<Vec<u64>>());
        self.decisions
            .get(&key)?
            .iter()
            .find(|(h, _)| close(h, holdings))
            .map(|(_, t)| t.as_slice())
    }

    pub fn len(&self) -> usize {
        self.decisions.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
}

/// Strategy families evaluated by [`mc_value`]. Each decides from the
/// current date, prices and carried holdings only.
#[derive(Debug, Clone)]
pub enum Policy {
    Zero,
    /// One monetary trade at time 0, then hold.
    BuyAndHold(Vec<f64>),
    /// Two assets: keep the risky share `V²/(V¹+V²)` inside `[lower, upper]`
    /// by trading to the nearest edge.
    Band { lower: f64, upper: f64 },
    /// Lookup of recorded tree decisions; states not found do not trade.
    Tree(TreePolicy),
}

impl Policy {
    fn act(&self, k: usize, last: bool, prices: &[f64], h: &[f64], cone: &SolvencyCone) -> Result<Vec<f64>> {
        let d = h.len();
        let zero = vec![0.0; d];
        if last {
            return Ok(zero);
        }
        match self {
            Policy::Zero => Ok(zero),
            Policy::BuyAndHold(a) => Ok(if k == 0 { a.clone() } else { zero }),
            Policy::Band { lower, upper } => {
                if d != 2 {
                    return Err(Error::Model("band policy needs two assets".into()));
                }
                let v = monetary(prices, h);
                let w = v[0] + v[1];
                if !(w > 0.0) {
                    return Ok(zero);
                }
                let share = v[1] / w;
                let buy_rate = transfer_rate(cone, 0, 1)?;
                let sell_rate = transfer_rate(cone, 1, 0)?;
                if share < *lower {
                    let c = (lower * w - v[1]) / (1.0 + lower * buy_rate);
                    Ok(vec![-c * (1.0 + buy_rate), c])
                } else if share > *upper {
                    let c = (v[1] - upper * w) / (1.0 + sell_rate * (1.0 - upper));
                    Ok(vec![c, -c * (1.0 + sell_rate)])
                } else {
                    Ok(zero)
                }
            }
            Policy::Tree(p) => Ok(p.lookup(k, prices, h).map(<[f64]>::to_vec).unwrap_or(zero)),
        }
    }
}

/// `λ` such that `1 + λ` units of `from` buy one unit of `to`.
fn transfer_rate(cone: &SolvencyCone, from: usize, to: usize) -> Result<f64> {
    let direct = cone
        .transfers()
        .iter()
        .find(|g| g[to] == -1.0 && g[from] > 0.0 && g.iter().enumerate().all(|(i, &v)| i == to || i == from || v == 0.0));
    if let Some(g) = direct {
        return Ok(g[from] - 1.0);
    }
    let mut probe = vec![0.0; cone.dim()];
    probe[to] = -1.0;
    let (mut lo, mut hi) = (1.0, 2.0);
    probe[from] = hi;
    while !cone.contains_fast(&probe, 0.0)? {
        hi *= 2.0;
        probe[from] = hi;
        if hi > 1e6 {
            return Err(Error::MalformedCone("no finite transfer rate".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        probe[from] = mid;
        if cone.contains_fast(&probe, 0.0)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi - 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub paths: usize,
    /// Grid cells per path.
    pub steps: usize,
    pub seed: u64,
}

/// Sample mean of `U(V_T)` under `policy`, with standard error. Every path is
/// repaired with zero margin first; a path whose repair fails is ruined and
/// scores `U = 0`, the utility of an empty position.
pub fn mc_value(
    spec: &ModelSpec,
    x: &[f64],
    cone: &SolvencyCone,
    utility: &UtilitySpec,
    policy: &Policy,
    options: &McOptions,
) -> Result<ValueReport> {
    if options.paths == 0 {
        return Err(Error::Model("need at least one path".into()));
    }
    if x.len() != spec.d || cone.dim() != spec.d {
        return Err(Error::Dimension {
            expected: spec.d,
            got: x.len(),
        });
    }
    let m = options.steps;
    let outcomes: Vec<Result<(f64, bool)>> = (0..options.paths)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let mut rng = path_rng(options.seed, i as u64);
            let prices = sample_with(spec, m, &mut rng)?.prices;
            let mut h = x.to_vec();
            let mut trades = Vec::with_capacity(m + 1);
            for k in 0..=m {
                let s = prices.at(k);
                let t = policy.act(k, k == m, s, &h, cone)?;
                let neg: Vec<f64> = t.iter().map(|v| -v).collect();
                let scale = neg.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                if !cone.contains_fast(&neg, TOL * scale)? {
                    return Err(Error::NotDecreasing { node: k });
                }
                h = h.iter().zip(&t).zip(s).map(|((a, b), p)| (a * p + b) / p).collect();
                trades.push(t);
            }
            let strategy = Strategy::from_trades(spec.horizon, &trades, cone)?;
            match repair_strategy(x, &strategy, &prices, cone, 0.0) {
                Ok(r) => {
                    let w = wealth(x, &r.strategy, &prices)?;
                    let l = cone.liquidation_fast(w.monetary.terminal())?;
                    Ok((utility.of_liquidation(l), false))
                }
                Err(Error::RepairFailed { .. }) => Ok((0.0, true)),
                Err(e) => Err(e),
            }
        })
        .collect();
    // Welford's update keeps a constant sample's mean exact, so its stderr is 0.
    let (mut count, mut mean, mut m2, mut ruined) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for o in outcomes {
        let (v, r) = o?;
        count += 1.0;
        let delta = v - mean;
        mean += delta / count;
        m2 += delta * (v - mean);
        ruined += r as usize;
    }
    let var = if count > 1.0 { m2 / (count - 1.0) } else { 0.0 };
    let n = count;
    let mut report = ValueReport::exact(mean, Method::Mc);
    report.stderr = (var / n).sqrt();
    report.ruined = ruined;
    Ok(report)
}
