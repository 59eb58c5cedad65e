//! Racing two solver configurations and keeping the one predicted to finish first.
//!
//! Both runs advance in lockstep, one conflict each per tick. A run pauses
//! once it reaches its query point. A run that finishes in fewer conflicts
//! than its query point wins outright; otherwise, once both runs have queried, the run with
//! the larger predicted cost is terminated and the other runs to completion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Formula;
use crate::features::{feature_names, window_for_restart};
use crate::lmp::{LmpModelPair, PredictionMode};
use crate::monitor::{Monitor, MonitorConfig};
use crate::solver::{ConfigError, RunState, Solver, SolverConfig, Status};

#[derive(Debug, Error, PartialEq)]
pub enum RaceError {
    #[error("run {0:?} reached its query point without a prediction")]
    MissingPrediction(Choice),
    #[error("restart {0} of this schedule has no observation window")]
    NoWindow(u32),
    #[error("neither run finished within the conflict budget")]
    BudgetExhausted,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("prediction failed: {0}")]
    Prediction(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    pub solver_a: SolverConfig,
    /// 1-based restart at which run A is queried.
    pub query_restart_a: u32,
    pub solver_b: SolverConfig,
    pub query_restart_b: u32,
    pub mode: PredictionMode,
}

impl Default for RaceConfig {
    fn default() -> Self {
        RaceConfig {
            solver_a: SolverConfig::geometric(1.5),
            query_restart_a: 9,
            solver_b: SolverConfig::geometric(1.2),
            query_restart_b: 19,
            mode: PredictionMode::GeometricMean,
        }
    }
}

/// Conflicts from the start of the solve to the end of the window of restart `r` (1-based).
pub fn query_conflicts(cfg: &SolverConfig, r: u32) -> Result<u64, RaceError> {
    let index = r.checked_sub(1).ok_or(RaceError::NoWindow(r))?;
    let limit = cfg.restart_limit(index).ok_or(RaceError::NoWindow(r))?;
    let window = window_for_restart(limit).ok_or(RaceError::NoWindow(r))?;
    let before: u64 = (0..index).map(|i| cfg.restart_limit(i).expect("restarts on")).sum();
    Ok(before + window.query_point())
}

/// What a complete run of one configuration looked like.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_conflicts: u64,
    pub query_conflicts: u64,
    /// ln of predicted total conflicts at the query point.
    pub pred: Option<f64>,
}

impl RunSummary {
    /// A run that ends on its query conflict without reaching the query also counts.
    fn finishes_early(&self) -> bool {
        self.total_conflicts < self.query_conflicts || (self.total_conflicts == self.query_conflicts && self.pred.is_none())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceResult {
    pub chosen: Choice,
    /// A run finished before the decision point.
    pub early_finish: bool,
    pub cost_a: u64,
    pub cost_b: u64,
    pub cost_chosen: u64,
    /// Conflicts the terminated run spent before it was stopped.
    pub overhead: u64,
    pub baseline_avg: f64,
    pub oracle: u64,
}

impl RaceResult {
    pub fn cost_with_overhead(&self) -> u64 {
        self.cost_chosen + self.overhead
    }
}

/// The race outcome implied by two complete runs (evaluation mode).
pub fn race_outcome(a: &RunSummary, b: &RunSummary) -> Result<RaceResult, RaceError> {
    let (chosen, early_finish, overhead) = match (a.finishes_early(), b.finishes_early()) {
        (true, true) if b.total_conflicts < a.total_conflicts => (Choice::B, true, b.total_conflicts.min(a.query_conflicts)),
        (true, _) => (Choice::A, true, a.total_conflicts.min(b.query_conflicts).min(b.total_conflicts)),
        (false, true) => (Choice::B, true, b.total_conflicts.min(a.query_conflicts)),
        (false, false) => {
            let pa = a.pred.ok_or(RaceError::MissingPrediction(Choice::A))?;
            let pb = b.pred.ok_or(RaceError::MissingPrediction(Choice::B))?;
            if pb < pa {
                (Choice::B, false, a.query_conflicts)
            } else {
                (Choice::A, false, b.query_conflicts)
            }
        }
    };
    let cost_chosen = match chosen {
        Choice::A => a.total_conflicts,
        Choice::B => b.total_conflicts,
    };
    Ok(RaceResult {
        chosen,
        early_finish,
        cost_a: a.total_conflicts,
        cost_b: b.total_conflicts,
        cost_chosen,
        overhead,
        baseline_avg: (a.total_conflicts + b.total_conflicts) as f64 / 2.0,
        oracle: a.total_conflicts.min(b.total_conflicts),
    })
}

/// Percentage saved against the average of the two runs.
pub fn improvement(baseline_total: f64, strategy_total: f64) -> f64 {
    100.0 * (baseline_total - strategy_total) / baseline_total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Oracle,
    LmpOracle,
    LmpAvg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub strategy: Strategy,
    /// Only the chosen run's conflicts are charged.
    pub improvement: f64,
    /// The terminated run's conflicts before the decision are charged too.
    pub improvement_with_overhead: f64,
}

/// Improvements of each strategy over an ensemble; `lmp` maps strategy to per-instance race results.
pub fn improvement_table(lmp: &BTreeMap<Strategy, Vec<RaceResult>>) -> Vec<ImprovementRow> {
    let Some(any) = lmp.values().next() else { return Vec::new() };
    let baseline: f64 = any.iter().map(|r| r.baseline_avg).sum();
    let oracle: f64 = any.iter().map(|r| r.oracle as f64).sum();
    let mut rows = vec![ImprovementRow { strategy: Strategy::Oracle, improvement: improvement(baseline, oracle), improvement_with_overhead: improvement(baseline, oracle) }];
    for (&strategy, results) in lmp {
        let plain: f64 = results.iter().map(|r| r.cost_chosen as f64).sum();
        let charged: f64 = results.iter().map(|r| r.cost_with_overhead() as f64).sum();
        rows.push(ImprovementRow { strategy, improvement: improvement(baseline, plain), improvement_with_overhead: improvement(baseline, charged) });
    }
    rows
}

/// Result of actually racing the two solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeployResult {
    pub chosen: Choice,
    pub status: Status,
    pub early_finish: bool,
    pub cost_chosen: u64,
    pub overhead: u64,
    pub pred_a: Option<f64>,
    pub pred_b: Option<f64>,
}

struct Racer {
    solver: Solver,
    monitor: Monitor,
    query: u64,
    finished: Option<(Status, u64)>,
}

impl Racer {
    fn new(formula: &Formula, cfg: &SolverConfig, restart: u32) -> Result<Racer, RaceError> {
        let mut mcfg = MonitorConfig::new(cfg.clone());
        mcfg.record_streams = false;
        mcfg.last_query_restart = Some(restart);
        Ok(Racer { solver: Solver::new(formula, cfg.clone())?, monitor: Monitor::new(formula, mcfg), query: query_conflicts(cfg, restart)?, finished: None })
    }

    /// Advances to `tick` conflicts, but not past the query point unless `free`.
    fn advance(&mut self, tick: Option<u64>, free: bool) {
        if self.finished.is_some() {
            return;
        }
        let target = if free { tick } else { Some(tick.map_or(self.query, |t| t.min(self.query))) };
        if target.is_some_and(|t| self.solver.total_conflicts() >= t) {
            return;
        }
        if let RunState::Finished(o) = self.solver.run(target, &mut self.monitor) {
            self.finished = Some((o.status, o.total_conflicts));
        }
    }

    fn prediction(&self, pair: &LmpModelPair, mode: PredictionMode) -> Result<Option<f64>, RaceError> {
        let Some(q) = self.monitor.report().queries.last() else { return Ok(None) };
        pair.predict(&feature_names(), &q.features.values, mode).map(|p| Some(p.log_conflicts_pred)).map_err(|e| RaceError::Prediction(e.to_string()))
    }
}

/// Deployment mode: runs both configurations in lockstep, decides at the query
/// points, and finishes only the survivor.
pub fn race(formula: &Formula, model_a: &LmpModelPair, model_b: &LmpModelPair, cfg: &RaceConfig) -> Result<DeployResult, RaceError> {
    let mut a = Racer::new(formula, &cfg.solver_a, cfg.query_restart_a)?;
    let mut b = Racer::new(formula, &cfg.solver_b, cfg.query_restart_b)?;
    let decision = a.query.max(b.query);
    let mut tick = 0u64;
    while tick < decision {
        tick = (tick + 64).min(decision);
        a.advance(Some(tick), false);
        b.advance(Some(tick), false);
        let done: Vec<(Choice, Status, u64)> = [(Choice::A, &a), (Choice::B, &b)].into_iter().filter_map(|(c, r)| r.finished.map(|(s, n)| (c, s, n))).collect();
        if let Some(&(chosen, status, cost)) = done.iter().min_by_key(|(c, _, n)| (*n, *c)) {
            let other = if chosen == Choice::A { &b } else { &a };
            let overhead = other.solver.total_conflicts().min(cost);
            return Ok(DeployResult { chosen, status, early_finish: true, cost_chosen: cost, overhead, pred_a: None, pred_b: None });
        }
    }
    let pred_a = a.prediction(model_a, cfg.mode)?;
    let pred_b = b.prediction(model_b, cfg.mode)?;
    let (pa, pb) = (pred_a.ok_or(RaceError::MissingPrediction(Choice::A))?, pred_b.ok_or(RaceError::MissingPrediction(Choice::B))?);
    let (chosen, mut survivor, loser) = if pb < pa { (Choice::B, b, a) } else { (Choice::A, a, b) };
    survivor.advance(None, true);
    let (status, cost) = survivor.finished.expect("unbounded run finishes");
    if status == Status::BudgetExhausted {
        return Err(RaceError::BudgetExhausted);
    }
    Ok(DeployResult { chosen, status, early_finish: false, cost_chosen: cost, overhead: loser.solver.total_conflicts(), pred_a, pred_b })
}
