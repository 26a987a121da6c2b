//! Experiment configuration: one key-value file with `[section]` headers.
//! The full grammar is in `docs/config.md`.

use std::path::{Path, PathBuf};

use crate::bellman::{BoxMode, DpOptions, Policy, StudyOptions};
use crate::cone::CostMatrix;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::market::{ModelSpec, TreeLayout};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueMethod {
    Enumerate,
    Dp,
    Both,
    Mc,
}

impl std::str::FromStr for ValueMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enumerate" => Ok(Self::Enumerate),
            "dp" => Ok(Self::Dp),
            "both" => Ok(Self::Both),
            "mc" => Ok(Self::Mc),
            _ => Err(Error::Config(format!("unknown method `{s}` (enumerate, dp, both, mc)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Action step; `ℓ(x)/20` when absent.
    pub step: Option<f64>,
    pub cap: usize,
    pub liquidate: bool,
}

#[derive(Debug, Clone)]
pub struct RepairConfig {
    /// Scripted price path of asset 2, one value per node.
    pub prices: Vec<f64>,
    /// Fraction of the largest solvent leveraged purchase made at time 0.
    pub leverage: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub costs: CostMatrix,
    /// Where the cost matrix came from, for strategy CSV headers.
    pub cost_source: String,
    pub utility: UtilitySpec,
    pub x: Vec<f64>,
    pub grid: GridConfig,
    pub tree_steps: usize,
    pub layout: TreeLayout,
    pub dp: DpOptions,
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub policy: Policy,
    pub study: StudyOptions,
    pub coin_arity: usize,
    pub repair: RepairConfig,
    pub simulate_paths: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out: PathBuf,
    pub method: ValueMethod,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `text`; relative file names resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let cfg = Self::read(&kv, base).map_err(|e| match e {
            Error::Config(_) => e,
            Error::Model(m) | Error::CostMatrix(m) | Error::Utility(m) | Error::Grid(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        let unknown = kv.unused();
        if let Some(k) = unknown.first() {
            let line = kv.line_of(k).unwrap_or(0);
            return Err(Error::Config(format!("line {line}: unknown key `{k}`")));
        }
        Ok(cfg)
    }

    fn read(kv: &KeyValues, base: &Path) -> Result<Self> {
        for section in ["model", "costs", "utility", "position"] {
            if !kv.has_section(section) {
                return Err(Error::Config(format!("missing section [{section}]")));
            }
        }
        let tree_steps: usize = kv.parse_opt("tree.n")?.unwrap_or(2);
        let layout = match kv.get("tree.layout").unwrap_or("full") {
            "full" => TreeLayout::Full,
            "recombining" => TreeLayout::Recombining,
            other => return Err(Error::Config(format!("`tree.layout`: unknown layout `{other}`"))),
        };
        let model = ModelSpec::from_kv(kv, tree_steps)?;
        let (costs, cost_source) = match kv.get("costs.file") {
            Some(f) => {
                let path = base.join(f);
                let m = CostMatrix::from_file(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                if m.dim() != model.d {
                    return Err(Error::Config(format!("cost file has d = {}, model has {}", m.dim(), model.d)));
                }
                (m, f.to_string())
            }
            None => (CostMatrix::from_kv(kv, "costs", Some(model.d))?, "inline".to_string()),
        };
        let utility = UtilitySpec::from_kv(kv)?;
        let x: Vec<f64> = kv.parse_list("position.x")?.ok_or_else(|| missing("position.x"))?;
        if x.len() != model.d {
            return Err(Error::Config(format!("`position.x` has {} entries, model has {} assets", x.len(), model.d)));
        }

        let grid = GridConfig {
            step: kv.parse_opt("grid.step")?,
            cap: kv.parse_opt("grid.cap")?.unwrap_or(crate::bellman::DEFAULT_CAP),
            liquidate: kv.parse_opt("grid.liquidate")?.unwrap_or(true),
        };
        if let Some(s) = grid.step {
            positive("grid.step", s)?;
        }
        if grid.cap == 0 {
            return Err(Error::Config("`grid.cap` must be positive".into()));
        }

        let dp = read_dp(kv, "dp", DpOptions::default())?;
        let study_defaults = StudyOptions::default();
        let study = StudyOptions {
            ns: kv.parse_list("converge.ns")?.unwrap_or(study_defaults.ns),
            step: grid.step,
            cap: grid.cap,
            dp: read_dp(kv, "converge", study_defaults.dp)?,
            cps_eps: kv.parse_opt("converge.cps_eps")?.unwrap_or(study_defaults.cps_eps),
            mc_paths: kv.parse_opt("converge.mc_paths")?.unwrap_or(study_defaults.mc_paths),
            mc_steps: kv.parse_opt("converge.mc_steps")?.unwrap_or(study_defaults.mc_steps),
            seed: 0,
        };
        if study.ns.is_empty() || study.ns.contains(&0) {
            return Err(Error::Config("`converge.ns` needs positive step counts".into()));
        }
        positive("converge.cps_eps", study.cps_eps)?;
        if study.mc_paths > 0 && study.mc_steps == 0 {
            return Err(Error::Config("`converge.mc_steps` must be positive".into()));
        }

        let mc_paths: usize = kv.parse_opt("mc.paths")?.unwrap_or(2000);
        let mc_steps: usize = kv.parse_opt("mc.steps")?.unwrap_or(64);
        if mc_paths == 0 || mc_steps == 0 {
            return Err(Error::Config("`mc.paths` and `mc.steps` must be positive".into()));
        }
        let policy = match kv.get("mc.policy").unwrap_or("zero") {
            "zero" => Policy::Zero,
            "hold" => {
                let a: Vec<f64> = kv.parse_list("mc.trade")?.ok_or_else(|| missing("mc.trade"))?;
                if a.len() != model.d {
                    return Err(Error::Config(format!("`mc.trade` has {} entries, model has {} assets", a.len(), model.d)));
                }
                Policy::BuyAndHold(a)
            }
            "band" => {
                let lower: f64 = kv.require("mc.band_lower")?;
                let upper: f64 = kv.require("mc.band_upper")?;
                if !(0.0..=1.0).contains(&lower) || !(lower..=1.0).contains(&upper) {
                    return Err(Error::Config(format!("band needs 0 ≤ lower ≤ upper ≤ 1, got [{lower}, {upper}]")));
                }
                Policy::Band { lower, upper }
            }
            other => return Err(Error::Config(format!("`mc.policy`: unknown policy `{other}` (zero, hold, band)"))),
        };

        let coin_arity: usize = kv.parse_opt("randomize.coin_arity")?.unwrap_or(2);
        if coin_arity == 0 {
            return Err(Error::Config("`randomize.coin_arity` must be positive".into()));
        }

        let repair = RepairConfig {
            prices: kv
                .parse_list("repair.prices")?
                .unwrap_or_else(|| vec![1.0, 1.02, 0.9, 0.8, 0.7, 0.5, 0.55]),
            leverage: kv.parse_opt("repair.leverage")?.unwrap_or(0.05),
            margin: kv.parse_opt("repair.margin")?.unwrap_or(0.2),
        };
        if repair.prices.len() < 2 || repair.prices.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Config("`repair.prices` needs at least two positive prices".into()));
        }
        if !(0.0..=1.0).contains(&repair.leverage) {
            return Err(Error::Config("`repair.leverage` must lie in [0, 1]".into()));
        }
        if !(repair.margin >= 0.0) {
            return Err(Error::Config("`repair.margin` must be nonnegative".into()));
        }

        let simulate_paths: usize = kv.parse_opt("simulate.paths")?.unwrap_or(4);

        Ok(Self {
            model,
            costs,
            cost_source,
            utility,
            x,
            grid,
            tree_steps,
            layout,
            dp,
            mc_paths,
            mc_steps,
            policy,
            study,
            coin_arity,
            repair,
            simulate_paths,
            seed: kv.parse_opt("run.seed")?.unwrap_or(0),
            workers: kv.parse_opt("run.workers")?.unwrap_or(0),
            out: kv.get("run.out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
            method: kv.get("run.method").unwrap_or("dp").parse()?,
        })
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {v}")))
    }
}

fn read_dp(kv: &KeyValues, section: &str, defaults: DpOptions) -> Result<DpOptions> {
    let key = |k: &str| format!("{section}.{k}");
    let lattice: usize = kv.parse_opt(&key("lattice"))?.unwrap_or(defaults.lattice);
    if lattice < 2 {
        return Err(Error::Config(format!("`{}` must be at least 2", key("lattice"))));
    }
    let default_cap = match defaults.box_mode {
        BoxMode::Capped(c) => c,
        BoxMode::Reachable => 3.0,
    };
    let cap: Option<f64> = kv.parse_opt(&key("box_cap"))?;
    let box_mode = match kv.get(&key("box")) {
        None => match cap {
            Some(c) => BoxMode::Capped(c),
            None => defaults.box_mode,
        },
        Some("reachable") => BoxMode::Reachable,
        Some("capped") => BoxMode::Capped(cap.unwrap_or(default_cap)),
        Some(other) => return Err(Error::Config(format!("`{}`: unknown box `{other}` (reachable, capped)", key("box")))),
    };
    if let BoxMode::Capped(c) = box_mode {
        positive(&key("box_cap"), c)?;
    }
    let max_points: u128 = kv.parse_opt(&key("max_points"))?.unwrap_or(defaults.max_points);
    if max_points == 0 {
        return Err(Error::Config(format!("`{}` must be positive", key("max_points"))));
    }
    Ok(DpOptions {
        lattice,
        box_mode,
        max_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nd = 2\nsigma.2 = 0.2\n[costs]\nuniform = 0.01\n[utility]\ngamma = 0.5\n[position]\nx = 1, 0.5\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.x, vec![1.0, 0.5]);
        assert_eq!(c.costs.rate(0, 1), 0.01);
        assert_eq!(c.study.ns, vec![2, 4, 8, 16]);
        assert_eq!(c.method, ValueMethod::Dp);
        assert_eq!(c.grid.cap, 40);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::parse(&format!("{MINIMAL}[grid]\nstpe = 0.1\n"), Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("grid.stpe"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn missing_gamma_is_a_config_error() {
        let text = MINIMAL.replace("gamma = 0.5\n", "");
        let e = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn missing_section_is_reported() {
        let text = MINIMAL.replace("[position]\nx = 1, 0.5\n", "");
        let e = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("[position]"));
    }

    #[test]
    fn cost_dimension_must_match() {
        let text = MINIMAL.replace("uniform = 0.01", "d = 3\nuniform = 0.01");
        assert!(ExperimentConfig::parse(&text, Path::new(".")).is_err());
    }
}
