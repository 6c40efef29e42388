//! JSON problem files.
//!
//! ```json
//! {
//!   "process": { "name": "bm", "params": {} },
//!   "reward": { "form": "x_plus" },
//!   "alpha": 0.5,
//!   "solver": { "method": "one_sided", "side": "right" }
//! }
//! ```
//!
//! `process.name` is a catalog diffusion or `ou_jump` (params `gamma`,
//! `sigma`, `lambda`, `beta`). `tolerances`, `dft` and `mc` are optional.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffusion::{catalog, Diffusion, NamedReward, RewardBundle, Side};
use crate::error::{Error, Result};
use crate::jump::{DftParams, LevyOUSpec};
use crate::markov::Tolerances;
use crate::mc::{Scheme, SimConfig};
use crate::onesided::Bracket;

pub const OU_JUMP: &str = "ou_jump";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    OneSided {
        side: Side,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bracket: Option<Bracket>,
    },
    TwoSided {
        init: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<Bracket>,
    },
    General {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<Bracket>,
    },
    Jump {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bracket: Option<Bracket>,
    },
}

/// Monte-Carlo settings; missing fields fall back to [`SimConfig::for_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Start point of the simulated paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

impl McConfig {
    pub fn sim_config(&self, alpha: f64) -> SimConfig {
        let d = SimConfig::for_alpha(alpha);
        SimConfig {
            dt: self.dt.unwrap_or(d.dt),
            horizon: self.horizon.unwrap_or(d.horizon),
            paths: self.paths.unwrap_or(d.paths),
            seed: self.seed.unwrap_or(d.seed),
            scheme: self.scheme.unwrap_or(d.scheme),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub process: ProcessConfig,
    pub reward: NamedReward,
    pub alpha: f64,
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dft: Option<DftParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

/// A validated problem, ready for a solver.
#[derive(Debug, Clone)]
pub enum Problem {
    Diffusion { bundle: RewardBundle, solver: SolverConfig },
    Jump { spec: LevyOUSpec, dft: DftParams, bracket: Bracket },
}

fn parse_error(source: &str, e: &serde_json::Error) -> Error {
    // serde_json appends "at line L column C"
    Error::Config(format!("{source}: {e}"))
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| parse_error("config", &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| parse_error(&path.display().to_string(), &e))?;
        cfg.validate().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn is_jump(&self) -> bool {
        self.process.name == OU_JUMP
    }

    /// Field-level checks; the process and reward are also built once.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha: must be positive, got {}", self.alpha)));
        }
        self.tolerances.validate().map_err(|e| Error::Config(format!("tolerances: {e}")))?;
        self.reward.validate().map_err(|e| Error::Config(format!("reward: {e}")))?;
        if let Some(d) = &self.dft {
            d.validate().map_err(|e| Error::Config(format!("dft: {e}")))?;
        }
        let jump_solver = matches!(self.solver, SolverConfig::Jump { .. });
        if self.is_jump() != jump_solver {
            return Err(Error::Config("solver: method `jump` goes with process `ou_jump` and only with it".into()));
        }
        if self.is_jump() && self.reward != NamedReward::XPlus {
            return Err(Error::Config("reward: the jump solver handles `x_plus` only".into()));
        }
        if self.dft.is_some() && !self.is_jump() {
            return Err(Error::Config("dft: only used with process `ou_jump`".into()));
        }
        if let SolverConfig::TwoSided { init, .. } = &self.solver {
            if !(init[0] < init[1]) {
                return Err(Error::Config(format!("solver.init: need x_l < x_r, got {init:?}")));
            }
        }
        self.build().map(|_| ())
    }

    pub fn ou_spec(&self) -> Result<LevyOUSpec> {
        let p = &self.process.params;
        for k in p.keys() {
            if !["gamma", "sigma", "lambda", "beta"].contains(&k.as_str()) {
                return Err(Error::Config(format!("process.params: unknown parameter `{k}` for {OU_JUMP}")));
            }
        }
        let get = |k: &str| p.get(k).copied().ok_or_else(|| Error::Config(format!("process.params: missing `{k}`")));
        LevyOUSpec::new(get("gamma")?, get("sigma")?, get("lambda")?, get("beta")?, self.alpha)
            .map_err(|e| Error::Config(format!("process.params: {e}")))
    }

    pub fn diffusion(&self) -> Result<Arc<dyn Diffusion>> {
        catalog(&self.process.name, &self.process.params, self.alpha).map_err(|e| Error::Config(format!("process: {e}")))
    }

    pub fn build(&self) -> Result<Problem> {
        if self.is_jump() {
            let spec = self.ou_spec()?;
            let bracket = match &self.solver {
                SolverConfig::Jump { bracket: Some(b) } => Bracket::new(b.lo, b.hi)?,
                _ => Bracket::new(0.0, 5.0)?,
            };
            return Ok(Problem::Jump { spec, dft: self.dft.unwrap_or_default(), bracket });
        }
        let bundle = RewardBundle::from_named(self.diffusion()?, self.reward.clone())
            .map_err(|e| Error::Config(format!("reward: {e}")))?;
        Ok(Problem::Diffusion { bundle, solver: self.solver.clone() })
    }

    pub fn sim_config(&self) -> SimConfig {
        self.mc.unwrap_or_default().sim_config(self.alpha)
    }
}
