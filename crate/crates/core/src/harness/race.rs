//! Cross-validated portfolio races and restart-chain comparisons.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::collect::{chain_instances, labeled_set, RunSet};
use super::evaluate::{within_factor, Label};
use super::io::csv_string;
use super::HarnessError;
use crate::lmp::{cross_validate_chain, cross_validate_pair, geometric_mean, plain_set, stratified_folds, PairPredictions, PredictionMode};
use crate::portfolio::{improvement_table, query_conflicts, race_outcome, Choice, ImprovementRow, RaceResult, RunSummary, Strategy};
use crate::regress::TrainConfig;
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRace {
    pub id: String,
    pub sat: bool,
    pub total_a: u64,
    pub total_b: u64,
    pub results: BTreeMap<Strategy, RaceResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTable {
    pub label: Label,
    pub n: usize,
    pub early_finishes: usize,
    pub rows: Vec<ImprovementRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub solver_a: String,
    pub solver_b: String,
    pub query_restart_a: u32,
    pub query_restart_b: u32,
    pub query_a: u64,
    pub query_b: u64,
    pub instances: Vec<InstanceRace>,
    pub tables: Vec<ImprovementTable>,
}

impl PortfolioReport {
    pub fn improvement(&self, label: Label, strategy: Strategy) -> Option<&ImprovementRow> {
        self.tables.iter().find(|t| t.label == label)?.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let header = ["label", "n", "early_finishes", "strategy", "improvement", "improvement_with_overhead"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = self
            .tables
            .iter()
            .flat_map(|t| {
                t.rows.iter().map(move |r| {
                    vec![
                        t.label.name().to_string(),
                        t.n.to_string(),
                        t.early_finishes.to_string(),
                        strategy_name(r.strategy).to_string(),
                        format!("{:.4}", r.improvement),
                        format!("{:.4}", r.improvement_with_overhead),
                    ]
                })
            })
            .collect();
        csv_string(&header, &rows)
    }

    pub fn instances_csv(&self) -> Result<String, HarnessError> {
        let header = ["id", "sat", "total_a", "total_b", "strategy", "chosen", "early_finish", "cost_chosen", "overhead"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = self
            .instances
            .iter()
            .flat_map(|i| {
                i.results.iter().map(move |(s, r)| {
                    vec![
                        i.id.clone(),
                        i.sat.to_string(),
                        i.total_a.to_string(),
                        i.total_b.to_string(),
                        strategy_name(*s).to_string(),
                        if r.chosen == Choice::A { "a" } else { "b" }.to_string(),
                        r.early_finish.to_string(),
                        r.cost_chosen.to_string(),
                        r.overhead.to_string(),
                    ]
                })
            })
            .collect();
        csv_string(&header, &rows)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "Portfolio {} (query restart {}, conflict {}) vs {} (query restart {}, conflict {})\n",
            self.solver_a, self.query_restart_a, self.query_a, self.solver_b, self.query_restart_b, self.query_b
        );
        let _ = writeln!(out, "{:<6} {:>4} {:>6} {:<11} {:>12} {:>14}", "label", "n", "early", "strategy", "improvement", "with_overhead");
        for t in &self.tables {
            for r in &t.rows {
                let _ = writeln!(out, "{:<6} {:>4} {:>6} {:<11} {:>12.2} {:>14.2}", t.label.name(), t.n, t.early_finishes, strategy_name(r.strategy), r.improvement, r.improvement_with_overhead);
            }
        }
        out
    }
}

pub fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Oracle => "oracle",
        Strategy::LmpOracle => "lmp-oracle",
        Strategy::LmpAvg => "lmp-avg",
    }
}

fn check_aligned(a: &RunSet, b: &RunSet) -> Result<(), HarnessError> {
    let same = a.runs.len() == b.runs.len() && a.runs.iter().zip(&b.runs).all(|(x, y)| x.id == y.id && x.sat == y.sat);
    if same {
        Ok(())
    } else {
        Err(HarnessError::Data(format!("runs of `{}` and `{}` cover different instances", a.solver_name, b.solver_name)))
    }
}

/// Out-of-fold predictions keyed by instance id.
fn pair_predictions(runs: &RunSet, restart: u32, cfg: &TrainConfig, seed: u64, folds: &BTreeMap<String, usize>) -> Result<BTreeMap<String, (f64, f64)>, HarnessError> {
    let set = labeled_set(runs, restart, None);
    if set.is_empty() {
        return Ok(BTreeMap::new());
    }
    let preds: PairPredictions = cross_validate_pair(&set, cfg, seed, folds)?;
    Ok(set.ids.into_iter().enumerate().map(|(r, id)| (id, (preds.sat_pred[r], preds.unsat_pred[r]))).collect())
}

fn pick(pred: Option<&(f64, f64)>, mode: PredictionMode) -> Option<f64> {
    pred.map(|&(s, u)| match mode {
        PredictionMode::OracleSat => s,
        PredictionMode::OracleUnsat => u,
        PredictionMode::GeometricMean => geometric_mean(s, u),
    })
}

/// Replays the race on every instance from complete runs of both solvers and
/// out-of-fold predictions at each solver's query restart.
pub fn portfolio(runs_a: &RunSet, restart_a: u32, runs_b: &RunSet, restart_b: u32, cfg: &TrainConfig, seed: u64) -> Result<PortfolioReport, HarnessError> {
    check_aligned(runs_a, runs_b)?;
    let ids: Vec<String> = runs_a.runs.iter().map(|r| r.id.clone()).collect();
    let sat: Vec<bool> = runs_a.runs.iter().map(|r| r.sat).collect();
    let folds = stratified_folds(&ids, &sat, cfg.folds, seed)?;
    let preds_a = pair_predictions(runs_a, restart_a, cfg, derive_seed(seed, 1), &folds)?;
    let preds_b = pair_predictions(runs_b, restart_b, cfg, derive_seed(seed, 2), &folds)?;
    let query_a = query_conflicts(&runs_a.solver, restart_a)?;
    let query_b = query_conflicts(&runs_b.solver, restart_b)?;
    let mut instances = Vec::new();
    for (ra, rb) in runs_a.runs.iter().zip(&runs_b.runs) {
        let mut results = BTreeMap::new();
        for (strategy, mode) in [(Strategy::LmpOracle, PredictionMode::oracle(ra.sat)), (Strategy::LmpAvg, PredictionMode::GeometricMean)] {
            let a = RunSummary { total_conflicts: ra.total_conflicts, query_conflicts: query_a, pred: pick(preds_a.get(&ra.id), mode) };
            let b = RunSummary { total_conflicts: rb.total_conflicts, query_conflicts: query_b, pred: pick(preds_b.get(&rb.id), mode) };
            results.insert(strategy, race_outcome(&a, &b)?);
        }
        instances.push(InstanceRace { id: ra.id.clone(), sat: ra.sat, total_a: ra.total_conflicts, total_b: rb.total_conflicts, results });
    }
    let tables = Label::ALL
        .into_iter()
        .map(|label| {
            let members: Vec<&InstanceRace> = instances.iter().filter(|i| label.matches(i.sat)).collect();
            let by_strategy: BTreeMap<Strategy, Vec<RaceResult>> =
                [Strategy::LmpOracle, Strategy::LmpAvg].into_iter().map(|s| (s, members.iter().map(|i| i.results[&s]).collect())).collect();
            let early_finishes = members.iter().filter(|i| i.results[&Strategy::LmpAvg].early_finish).count();
            ImprovementTable { label, n: members.len(), early_finishes, rows: improvement_table(&by_strategy) }
        })
        .collect();
    Ok(PortfolioReport {
        solver_a: runs_a.solver_name.clone(),
        solver_b: runs_b.solver_name.clone(),
        query_restart_a: restart_a,
        query_restart_b: restart_b,
        query_a,
        query_b,
        instances,
        tables,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainVariant {
    Plain,
    Augmented,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMode {
    Oracle,
    Avg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub variant: ChainVariant,
    pub mode: ChainMode,
    pub label: Label,
    pub n: usize,
    pub pct: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub solver: String,
    pub final_restart: u32,
    /// Restarts up to the final one that had observation windows.
    pub restarts: Vec<u32>,
    pub factors: Vec<f64>,
    pub rows: Vec<ChainRow>,
}

impl ChainReport {
    pub fn pct(&self, variant: ChainVariant, mode: ChainMode, label: Label, k: f64) -> Option<f64> {
        let col = self.factors.iter().position(|&f| f == k)?;
        self.rows.iter().find(|r| r.variant == variant && r.mode == mode && r.label == label).map(|r| r.pct[col])
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut header: Vec<String> = ["solver", "restart", "variant", "mode", "label", "n"].map(String::from).to_vec();
        header.extend(self.factors.iter().map(|k| format!("within_x{k}")));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    self.solver.clone(),
                    self.final_restart.to_string(),
                    format!("{:?}", r.variant).to_lowercase(),
                    format!("{:?}", r.mode).to_lowercase(),
                    r.label.name().to_string(),
                    r.n.to_string(),
                ];
                row.extend(r.pct.iter().map(|p| format!("{p:.2}")));
                row
            })
            .collect();
        csv_string(&header, &rows)
    }
}

/// Plain and history-augmented predictions at `final_restart`, on the same folds.
pub fn chain(runs: &RunSet, final_restart: u32, cfg: &TrainConfig, seed: u64, factors: &[f64]) -> Result<ChainReport, HarnessError> {
    let instances = chain_instances(runs, final_restart);
    let ids: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
    let sat: Vec<bool> = instances.iter().map(|i| i.sat).collect();
    let restarts: Vec<u32> = instances.iter().flat_map(|i| i.vectors.keys().copied()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let augmented = cross_validate_chain(&instances, final_restart, cfg, seed)?.by_restart.remove(&final_restart).unwrap_or_default();
    let folds = stratified_folds(&ids, &sat, cfg.folds, seed)?;
    let set = plain_set(&instances, final_restart);
    let plain: BTreeMap<String, (f64, f64)> = if set.is_empty() {
        BTreeMap::new()
    } else {
        let p = cross_validate_pair(&set, cfg, derive_seed(seed, final_restart as u64), &folds)?;
        set.ids.iter().enumerate().map(|(r, id)| (id.clone(), (p.sat_pred[r], p.unsat_pred[r]))).collect()
    };
    let mut rows = Vec::new();
    for (variant, preds) in [(ChainVariant::Plain, &plain), (ChainVariant::Augmented, &augmented)] {
        for mode in [ChainMode::Oracle, ChainMode::Avg] {
            for label in Label::ALL {
                let members: Vec<_> = instances.iter().filter(|i| label.matches(i.sat) && preds.contains_key(&i.id)).collect();
                let n = members.len();
                let pct = factors
                    .iter()
                    .map(|&k| {
                        let hit = members
                            .iter()
                            .filter(|i| {
                                let m = if mode == ChainMode::Oracle { PredictionMode::oracle(i.sat) } else { PredictionMode::GeometricMean };
                                within_factor(pick(preds.get(&i.id), m).expect("member has a prediction"), i.ln_conflicts, k)
                            })
                            .count();
                        if n == 0 { 0.0 } else { 100.0 * hit as f64 / n as f64 }
                    })
                    .collect();
                rows.push(ChainRow { variant, mode, label, n, pct });
            }
        }
    }
    Ok(ChainReport { solver: runs.solver_name.clone(), final_restart, restarts, factors: factors.to_vec(), rows })
}
