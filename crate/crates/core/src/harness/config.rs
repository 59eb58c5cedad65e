//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::features::WindowConfig;
use crate::lmp::PredictionMode;
use crate::regress::TrainConfig;
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub name: String,
    pub sat: usize,
    pub unsat: usize,
    /// Inclusive range of variable counts.
    pub vars: [u32; 2],
    /// Range of clause-to-variable ratios.
    pub ratio: [f64; 2],
    #[serde(default = "default_k")]
    pub k: usize,
    /// Solver whose reference solve labels and filters candidates.
    pub reference_solver: String,
    /// Keep only instances whose reference solve needs more conflicts than this.
    #[serde(default)]
    pub min_conflicts: u64,
    pub max_candidates: usize,
}

fn default_k() -> usize {
    3
}

/// Fixed-window accuracy and progress curves of a solver without restarts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSpec {
    pub solver: String,
    #[serde(default = "default_window")]
    pub window: WindowConfig,
}

fn default_window() -> WindowConfig {
    WindowConfig::NO_RESTART
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaceSpec {
    pub a: String,
    pub query_restart_a: u32,
    pub b: String,
    pub query_restart_b: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub solver: String,
    pub final_restart: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub ensemble: EnsembleSpec,
    pub solvers: BTreeMap<String, SolverConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Error factors reported by `evaluate`.
    #[serde(default = "default_factors")]
    pub factors: Vec<f64>,
    #[serde(default = "default_mode")]
    pub race_mode: PredictionMode,
    #[serde(default)]
    pub evaluate: Option<EvaluateSpec>,
    #[serde(default)]
    pub race: Option<RaceSpec>,
    #[serde(default)]
    pub chains: Vec<ChainSpec>,
}

fn default_factors() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}

fn default_mode() -> PredictionMode {
    PredictionMode::GeometricMean
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver(&self, name: &str) -> Result<&SolverConfig, HarnessError> {
        self.solvers.get(name).ok_or_else(|| HarnessError::Config(format!("unknown solver `{name}`")))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, s) in &self.solvers {
            s.validate().map_err(|e| HarnessError::Config(format!("solver `{name}`: {e}")))?;
        }
        self.solver(&self.ensemble.reference_solver)?;
        let e = &self.ensemble;
        if e.vars[0] > e.vars[1] || e.ratio[0] > e.ratio[1] || !(e.ratio[0] > 0.0) {
            return Err(HarnessError::Config("ensemble ranges must be ordered and positive".into()));
        }
        if e.k < 2 || e.k as u32 > e.vars[0] {
            return Err(HarnessError::Config("clause width must be at least 2 and at most the variable count".into()));
        }
        self.train.validate()?;
        if let Some(ev) = &self.evaluate {
            if self.solver(&ev.solver)?.restarts {
                return Err(HarnessError::Config(format!("evaluate solver `{}` must run without restarts", ev.solver)));
            }
        }
        if let Some(r) = &self.race {
            self.solver(&r.a)?;
            self.solver(&r.b)?;
        }
        for c in &self.chains {
            self.solver(&c.solver)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
seed = 7

[ensemble]
name = "toy"
sat = 3
unsat = 3
vars = [40, 50]
ratio = [4.1, 5.0]
reference_solver = "plain"
max_candidates = 100

[solvers.plain]
restarts = false

[solvers.a]
restart_factor = 1.5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(TEXT).unwrap();
        assert_eq!(cfg.ensemble.k, 3);
        assert!(!cfg.solvers["plain"].restarts);
        assert_eq!(cfg.solvers["a"].restart_base, 100);
        assert_eq!(cfg.train.folds, 10);
        assert_eq!(cfg.factors, vec![2.0, 4.0, 8.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml(&TEXT.replace("restart_factor = 1.5", "restart_factor = 1.0")).is_err());
        assert!(ExperimentConfig::from_toml(&TEXT.replace("reference_solver = \"plain\"", "reference_solver = \"x\"")).is_err());
        assert!(ExperimentConfig::from_toml(&TEXT.replace("seed = 7", "seed = 7\nbogus = 1")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{TEXT}\n[evaluate]\nsolver = \"a\"\n")).is_err());
        let ok = ExperimentConfig::from_toml(&format!("{TEXT}\n[evaluate]\nsolver = \"plain\"\n")).unwrap();
        assert_eq!(ok.evaluate.unwrap().window, WindowConfig::NO_RESTART);
    }
}
