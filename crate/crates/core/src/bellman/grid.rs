use crate::cone::{SolvencyCone, TOL};
use crate::error::{Error, Result};

use super::lex_less;

/// Default number of steps per transfer direction.
pub const DEFAULT_CAP: usize = 40;

/// Finite set of monetary trades in `−K` offered at every tradable node.
///
/// Actions are `−δ Σ k_g g` over the transfer rays `g` with `k_g ∈ 0..=κ`,
/// deduplicated and sorted lexicographically. The zero action is always
/// present. Scaling a position by `c` and the grid by the same `c` scales
/// every admissible strategy, which is what the power-scaling identity of the
/// value needs.
#[derive(Debug, Clone)]
pub struct ActionGrid {
    actions: Vec<Vec<f64>>,
    liquidate: bool,
    root_offset: Option<Vec<f64>>,
}

impl ActionGrid {
    /// Grid with step `step` and `cap` multiples per transfer direction.
    pub fn new(cone: &SolvencyCone, step: f64, cap: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Grid(format!("action step must be positive, got {step}")));
        }
        let dirs: Vec<Vec<f64>> = if cone.transfers().is_empty() {
            cone.generators()
                .iter()
                .filter(|g| g.iter().any(|&v| v < 0.0))
                .cloned()
                .collect()
        } else {
            cone.transfers().to_vec()
        };
        let d = cone.dim();
        let size = (cap as u128 + 1).checked_pow(dirs.len() as u32).unwrap_or(u128::MAX);
        if size > 1_000_000 {
            return Err(Error::Budget {
                what: "action grid",
                size,
                limit: 1_000_000,
            });
        }
        let mut actions = Vec::with_capacity(size as usize);
        let mut k = vec![0usize; dirs.len()];
        loop {
            let mut a = vec![0.0; d];
            for (g, &kg) in dirs.iter().zip(&k) {
                for i in 0..d {
                    a[i] -= step * kg as f64 * g[i];
                }
            }
            actions.push(a);
            let mut pos = 0;
            while pos < k.len() {
                k[pos] += 1;
                if k[pos] <= cap {
                    break;
                }
                k[pos] = 0;
                pos += 1;
            }
            if pos == k.len() {
                break;
            }
        }
        Self::assemble(cone, actions, true)
    }

    /// `δ = ℓ(x)/20` and `κ = 40`, enough to liquidate `x` in one trade.
    pub fn for_position(cone: &SolvencyCone, x: &[f64]) -> Result<Self> {
        let l = cone.liquidation_value(x)?;
        if !(l > 0.0) {
            return Err(Error::Grid(format!("default step needs ℓ(x) > 0, got {l}")));
        }
        Self::new(cone, l / 20.0, DEFAULT_CAP)
    }

    /// Explicit action list; each must lie in `−K`. The zero action is added.
    pub fn from_actions(cone: &SolvencyCone, actions: Vec<Vec<f64>>) -> Result<Self> {
        Self::assemble(cone, actions, true)
    }

    fn assemble(cone: &SolvencyCone, mut actions: Vec<Vec<f64>>, liquidate: bool) -> Result<Self> {
        let d = cone.dim();
        actions.push(vec![0.0; d]);
        for a in &mut actions {
            if a.len() != d {
                return Err(Error::Dimension { expected: d, got: a.len() });
            }
            for v in a.iter_mut() {
                if *v == 0.0 {
                    *v = 0.0;
                }
            }
        }
        actions.sort_by(|a, b| {
            if lex_less(a, b) {
                std::cmp::Ordering::Less
            } else if lex_less(b, a) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        actions.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-15 * (1.0 + x.abs())));
        for a in &actions {
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            let scale: f64 = neg.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if !cone.contains(&neg, TOL * scale)? {
                return Err(Error::Grid(format!("action {a:?} is not in -K")));
            }
        }
        Ok(Self {
            actions,
            liquidate,
            root_offset: None,
        })
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Whether "liquidate now" is offered besides the grid.
    pub fn liquidates(&self) -> bool {
        self.liquidate
    }

    pub fn with_liquidation(mut self, on: bool) -> Self {
        self.liquidate = on;
        self
    }

    /// Trade added to every grid action at the root, e.g. `ℓ(y−x)e₁ − (y−x)`
    /// to run `x`'s strategies from a dominating `y`.
    pub fn root_offset(&self) -> Option<&[f64]> {
        self.root_offset.as_deref()
    }

    pub fn with_root_offset(mut self, cone: &SolvencyCone, offset: Vec<f64>) -> Result<Self> {
        let neg: Vec<f64> = offset.iter().map(|v| -v).collect();
        let scale: f64 = neg.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if offset.len() != cone.dim() {
            return Err(Error::Dimension {
                expected: cone.dim(),
                got: offset.len(),
            });
        }
        if !cone.contains(&neg, TOL * scale)? {
            return Err(Error::Grid("root offset is not in -K".into()));
        }
        self.root_offset = Some(offset);
        Ok(self)
    }

    /// Every action times `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mul = |a: &Vec<f64>| a.iter().map(|v| c * v).collect::<Vec<f64>>();
        Self {
            actions: self.actions.iter().map(mul).collect(),
            liquidate: self.liquidate,
            root_offset: self.root_offset.as_ref().map(mul),
        }
    }

    /// `{αa + (1−α)b}`: a grid on which the mixture of any two strategies
    /// drawn from `self` and `other` is again a grid strategy. The liquidate
    /// action does not mix, so both inputs must have it switched off.
    pub fn mixture(&self, other: &ActionGrid, alpha: f64, cone: &SolvencyCone) -> Result<Self> {
        if self.liquidate || other.liquidate {
            return Err(Error::Grid("mixture of grids with a liquidate action".into()));
        }
        let mut actions = Vec::with_capacity(self.len() * other.len());
        for a in &self.actions {
            for b in &other.actions {
                actions.push(a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect());
            }
        }
        let mut g = Self::assemble(cone, actions, false)?;
        g.root_offset = match (&self.root_offset, &other.root_offset) {
            (None, None) => None,
            (a, b) => {
                let zero = vec![0.0; cone.dim()];
                let a = a.as_deref().unwrap_or(&zero);
                let b = b.as_deref().unwrap_or(&zero);
                Some(a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect())
            }
        };
        Ok(g)
    }

    /// Actions not componentwise dominated by another action. Dropping a
    /// dominated action never lowers a value, because more of every asset is
    /// both more solvent and worth more.
    pub fn undominated(&self) -> Vec<Vec<f64>> {
        let dominated = |a: &Vec<f64>| {
            self.actions
                .iter()
                .any(|b| b != a && b.iter().zip(a).all(|(x, y)| x >= y) && b.iter().zip(a).any(|(x, y)| x > y))
        };
        self.actions.iter().filter(|a| !dominated(a)).cloned().collect()
    }
}
