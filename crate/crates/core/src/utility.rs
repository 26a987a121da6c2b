//! Power utility of the liquidation value, `U(x) = ℓ(x)^{1−γ}/(1−γ)`.
//!
//! The family ignores the price argument. It satisfies the scaling condition
//! with `m₁(α) = 1 − (1−α)^{1−γ}`, `m₂ ≡ 0`, `ζ ≡ 0` because `ℓ` is positively
//! homogeneous, and the growth bound `U ≤ C(1 + ℘^γ)` with `C = 1/(1−γ)`
//! because `ℓ ≤ ℘`.

use crate::cone::{SolvencyCone, TOL};
use crate::error::{Error, Result};
use crate::kv::KeyValues;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec {
    pub gamma: f64,
    /// Growth constant `C`.
    pub growth: f64,
    /// Integrability exponent `q > 1/(1−γ)`.
    pub q: f64,
}

impl UtilitySpec {
    /// `C = 1/(1−γ)` and `q = 2/(1−γ)`.
    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0 / (1.0 - gamma), 2.0 / (1.0 - gamma))
    }

    pub fn new(gamma: f64, growth: f64, q: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Utility(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(growth > 0.0 && growth.is_finite()) {
            return Err(Error::Utility(format!("growth constant must be positive, got {growth}")));
        }
        if !(q * (1.0 - gamma) > 1.0 && q.is_finite()) {
            return Err(Error::Utility(format!("need q(1 - gamma) > 1, got q = {q}")));
        }
        Ok(Self { gamma, growth, q })
    }

    pub(crate) fn from_kv(kv: &KeyValues) -> Result<Self> {
        let u = |e: Error| Error::Utility(e.to_string());
        let gamma: f64 = kv.get("utility.gamma").ok_or_else(|| Error::Config("missing required key `utility.gamma`".into()))?.parse().map_err(|_| Error::Config("`utility.gamma`: not a number".into()))?;
        let base = Self::power(gamma)?;
        let growth = kv.parse_opt("utility.growth").map_err(u)?.unwrap_or(base.growth);
        let q = kv.parse_opt("utility.q").map_err(u)?.unwrap_or(base.q);
        Self::new(gamma, growth, q)
    }

    /// `ℓ^{1−γ}/(1−γ)` for a liquidation value `ℓ ≥ 0`.
    pub fn of_liquidation(&self, l: f64) -> f64 {
        let p = 1.0 - self.gamma;
        l.max(0.0).powf(p) / p
    }

    /// `U(x)` for a monetary position `x ∈ K`.
    pub fn eval(&self, x: &[f64], cone: &SolvencyCone) -> Result<f64> {
        let l = cone.liquidation_fast(x)?;
        if l < -TOL {
            return Err(Error::NotInCone { slack: -l });
        }
        Ok(self.of_liquidation(l))
    }

    /// `m₁(α) = 1 − (1−α)^{1−γ}`.
    pub fn m1(&self, alpha: f64) -> f64 {
        1.0 - (1.0 - alpha).powf(1.0 - self.gamma)
    }
}

#[derive(Debug, Clone)]
pub struct A1Certificate {
    /// `(α, m₁(α), m₂(α))` on the tabulation grid.
    pub table: Vec<(f64, f64, f64)>,
    pub zeta_mean: f64,
    /// Smallest `U((1−α)x) − (1−m₁(α))U(x) + m₂(α)ζ` over all pairs.
    pub worst_slack: f64,
}

#[derive(Debug, Clone)]
pub enum A1Outcome {
    Holds(A1Certificate),
    Violated { sample: usize, alpha: f64, slack: f64 },
}

/// Checks `U((1−α)x) ≥ (1−m₁(α))U(x)` on every sample and grid point,
/// evaluating both sides through independent liquidation programs.
pub fn check_a1(spec: &UtilitySpec, cone: &SolvencyCone, samples: &[Vec<f64>], alphas: &[f64]) -> Result<A1Outcome> {
    if samples.is_empty() {
        return Err(Error::Utility("no samples".into()));
    }
    let mut worst = f64::INFINITY;
    for (k, x) in samples.iter().enumerate() {
        let ux = spec.of_liquidation(cone.liquidation_value(x)?);
        for &alpha in alphas {
            let scaled: Vec<f64> = x.iter().map(|v| (1.0 - alpha) * v).collect();
            let lhs = spec.of_liquidation(cone.liquidation_value(&scaled)?);
            let slack = lhs - (1.0 - spec.m1(alpha)) * ux;
            worst = worst.min(slack);
            if slack < -1e-12 * (1.0 + ux) {
                return Ok(A1Outcome::Violated { sample: k, alpha, slack });
            }
        }
    }
    Ok(A1Outcome::Holds(A1Certificate {
        table: alphas.iter().map(|&a| (a, spec.m1(a), 0.0)).collect(),
        zeta_mean: 0.0,
        worst_slack: worst,
    }))
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub violations: Vec<usize>,
    /// Smallest `C(1 + ℘^γ) − U` over the samples.
    pub worst_slack: f64,
}

/// `U(x) ≤ C(1 + ℘(x)^γ)` on every sample.
pub fn check_growth_bound(spec: &UtilitySpec, cone: &SolvencyCone, samples: &[Vec<f64>]) -> Result<GrowthReport> {
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for (k, x) in samples.iter().enumerate() {
        let u = spec.eval(x, cone)?;
        let p = cone.purchase_value(x)?.max(0.0);
        let slack = spec.growth * (1.0 + p.powf(spec.gamma)) - u;
        worst = worst.min(slack);
        if slack < -1e-12 {
            violations.push(k);
        }
    }
    Ok(GrowthReport {
        violations,
        worst_slack: worst,
    })
}
