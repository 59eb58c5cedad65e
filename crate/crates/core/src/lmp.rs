//! Linear model prediction: paired sat/unsat cost models, their combination,
//! and chaining of predictions across restarts.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{augmented_names, feature_names, impute_history};
use crate::regress::{self, assign_folds, RegressError, RidgeModel, TrainConfig};
use crate::rng::{derive_seed, SeededRng};

pub const TRAINING_CAP: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum LmpError {
    #[error("{label} subset has {have} instances, need at least {need}")]
    LabelTooSmall { label: &'static str, have: usize, need: usize },
    #[error("model expects {expected} history entries, chain provides {got}")]
    HistoryMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Regress(#[from] RegressError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    OracleSat,
    OracleUnsat,
    GeometricMean,
}

impl PredictionMode {
    /// The oracle mode matching a known label.
    pub fn oracle(sat: bool) -> Self {
        if sat {
            PredictionMode::OracleSat
        } else {
            PredictionMode::OracleUnsat
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub restart_index: u32,
    /// Natural log of predicted total conflicts.
    pub log_conflicts_pred: f64,
    pub mode: PredictionMode,
}

/// Geometric mean of two predictions given in log units.
pub fn geometric_mean(ln_a: f64, ln_b: f64) -> f64 {
    0.5 * (ln_a + ln_b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmpModelPair {
    pub sat_model: RidgeModel,
    pub unsat_model: RidgeModel,
    /// 1-based restart the pair is queried at; `None` without restarts.
    pub query_restart: Option<u32>,
    pub history_len: usize,
}

impl LmpModelPair {
    pub fn predict_row(&self, row: &[f64], mode: PredictionMode) -> f64 {
        match mode {
            PredictionMode::OracleSat => self.sat_model.predict(row),
            PredictionMode::OracleUnsat => self.unsat_model.predict(row),
            PredictionMode::GeometricMean => geometric_mean(self.sat_model.predict(row), self.unsat_model.predict(row)),
        }
    }

    pub fn predict(&self, names: &[String], values: &[f64], mode: PredictionMode) -> Result<PredictionRecord, LmpError> {
        let sat = || self.sat_model.predict_named(names, values);
        let unsat = || self.unsat_model.predict_named(names, values);
        let log_conflicts_pred = match mode {
            PredictionMode::OracleSat => sat()?,
            PredictionMode::OracleUnsat => unsat()?,
            PredictionMode::GeometricMean => geometric_mean(sat()?, unsat()?),
        };
        Ok(PredictionRecord { restart_index: self.query_restart.unwrap_or(1), log_conflicts_pred, mode })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model pair serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LmpError> {
        serde_json::from_str(text).map_err(|e| LmpError::Regress(RegressError::Document(e.to_string())))
    }
}

/// Query-point rows with ground truth: one row per instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub sat: Vec<bool>,
    pub x: Vec<Vec<f64>>,
    /// Natural log of total conflicts.
    pub y: Vec<f64>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn rows_with_label(&self, sat: bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.sat[i] == sat).collect()
    }

    fn subset(&self, rows: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
        (rows.iter().map(|&r| self.x[r].clone()).collect(), rows.iter().map(|&r| self.y[r]).collect(), rows.iter().map(|&r| self.ids[r].clone()).collect())
    }
}

/// At most `cap` of `rows`, chosen by seed, in their original order.
pub fn cap_rows(rows: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, rows.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| rows[i]).collect()
}

fn label_name(sat: bool) -> &'static str {
    if sat {
        "sat"
    } else {
        "unsat"
    }
}

fn train_label(set: &LabeledSet, rows: &[usize], sat: bool, cfg: &TrainConfig, seed: u64) -> Result<RidgeModel, LmpError> {
    if rows.len() < cfg.folds {
        return Err(LmpError::LabelTooSmall { label: label_name(sat), have: rows.len(), need: cfg.folds });
    }
    let rows = cap_rows(rows, TRAINING_CAP, derive_seed(seed, sat as u64));
    let (x, y, g) = set.subset(&rows);
    Ok(regress::train(&set.names, &x, &y, &g, cfg, seed)?)
}

pub fn train_pair(set: &LabeledSet, cfg: &TrainConfig, seed: u64, query_restart: Option<u32>, history_len: usize) -> Result<LmpModelPair, LmpError> {
    Ok(LmpModelPair {
        sat_model: train_label(set, &set.rows_with_label(true), true, cfg, seed)?,
        unsat_model: train_label(set, &set.rows_with_label(false), false, cfg, seed)?,
        query_restart,
        history_len,
    })
}

/// One model over both labels, capped at twice the per-label cap.
pub fn train_single(set: &LabeledSet, cfg: &TrainConfig, seed: u64) -> Result<RidgeModel, LmpError> {
    let rows = cap_rows(&(0..set.len()).collect::<Vec<_>>(), 2 * TRAINING_CAP, seed);
    let (x, y, g) = set.subset(&rows);
    Ok(regress::train(&set.names, &x, &y, &g, cfg, seed)?)
}

/// Out-of-fold predictions of both models for every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPredictions {
    pub sat_pred: Vec<f64>,
    pub unsat_pred: Vec<f64>,
    pub fold_of_row: Vec<usize>,
}

impl PairPredictions {
    pub fn get(&self, row: usize, mode: PredictionMode) -> f64 {
        match mode {
            PredictionMode::OracleSat => self.sat_pred[row],
            PredictionMode::OracleUnsat => self.unsat_pred[row],
            PredictionMode::GeometricMean => geometric_mean(self.sat_pred[row], self.unsat_pred[row]),
        }
    }

    /// The prediction an oracle on the instance's label would use.
    pub fn oracle(&self, row: usize, sat: bool) -> f64 {
        self.get(row, PredictionMode::oracle(sat))
    }
}

/// Folds stratified by label: each label's instances are spread over all folds.
pub fn stratified_folds(ids: &[String], sat: &[bool], folds: usize, seed: u64) -> Result<BTreeMap<String, usize>, LmpError> {
    let mut out = BTreeMap::new();
    for label in [true, false] {
        let group: Vec<String> = ids.iter().zip(sat).filter(|(_, &s)| s == label).map(|(i, _)| i.clone()).collect();
        if group.len() < folds {
            return Err(LmpError::LabelTooSmall { label: label_name(label), have: group.len(), need: folds });
        }
        let assigned = assign_folds(&group, folds, derive_seed(seed, label as u64))?;
        out.extend(group.into_iter().zip(assigned));
    }
    Ok(out)
}

/// Cross-validates the pair: each fold trains both models without the fold's
/// instances and predicts every instance in it.
pub fn cross_validate_pair(set: &LabeledSet, cfg: &TrainConfig, seed: u64, folds_by_id: &BTreeMap<String, usize>) -> Result<PairPredictions, LmpError> {
    let fold_of_row: Vec<usize> = set.ids.iter().map(|id| folds_by_id[id]).collect();
    let mut sat_pred = vec![f64::NAN; set.len()];
    let mut unsat_pred = vec![f64::NAN; set.len()];
    for f in 0..cfg.folds {
        let train_rows = |label: bool| -> Vec<usize> { (0..set.len()).filter(|&r| fold_of_row[r] != f && set.sat[r] == label).collect() };
        let fold_seed = derive_seed(seed, f as u64);
        let sat_model = train_label(set, &train_rows(true), true, cfg, fold_seed)?;
        let unsat_model = train_label(set, &train_rows(false), false, cfg, fold_seed)?;
        for r in (0..set.len()).filter(|&r| fold_of_row[r] == f) {
            sat_pred[r] = sat_model.predict(&set.x[r]);
            unsat_pred[r] = unsat_model.predict(&set.x[r]);
        }
    }
    Ok(PairPredictions { sat_pred, unsat_pred, fold_of_row })
}

/// Feature vectors of one instance at each restart that had a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainInstance {
    pub id: String,
    pub sat: bool,
    pub ln_conflicts: f64,
    /// 1-based restart -> base feature vector.
    pub vectors: BTreeMap<u32, Vec<f64>>,
}

/// Builds the augmented row for restart `r` from a chain's earlier predictions.
pub fn augmented_row(base: &[f64], earlier: &BTreeMap<u32, f64>, r: u32) -> Vec<f64> {
    let slots: Vec<Option<f64>> = (1..r).map(|k| earlier.get(&k).copied()).collect();
    base.iter().copied().chain(impute_history(&slots)).collect()
}

/// Runs a chain of per-restart model pairs over one instance, feeding each
/// prediction into the history of the next.
pub fn predict_chain(models: &BTreeMap<u32, LmpModelPair>, vectors: &BTreeMap<u32, Vec<f64>>, mode: PredictionMode) -> Result<Vec<PredictionRecord>, LmpError> {
    let mut earlier = BTreeMap::new();
    let mut out = Vec::new();
    for (&r, pair) in models {
        let Some(base) = vectors.get(&r) else { continue };
        let row = augmented_row(base, &earlier, r);
        let history = row.len() - base.len();
        if history != pair.history_len {
            return Err(LmpError::HistoryMismatch { expected: pair.history_len, got: history });
        }
        let pred = pair.predict(&augmented_names(history), &row, mode)?;
        earlier.insert(r, pred.log_conflicts_pred);
        out.push(PredictionRecord { restart_index: r, ..pred });
    }
    Ok(out)
}

/// Out-of-fold chained predictions at every restart up to `final_restart`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPredictions {
    /// restart -> instance id -> (sat model, unsat model) predictions.
    pub by_restart: BTreeMap<u32, BTreeMap<String, (f64, f64)>>,
}

/// Cross-validated restart chain: at each restart, models are trained on
/// vectors augmented with the chain's own out-of-fold geometric-mean
/// predictions from earlier restarts.
pub fn cross_validate_chain(instances: &[ChainInstance], final_restart: u32, cfg: &TrainConfig, seed: u64) -> Result<ChainPredictions, LmpError> {
    let ids: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
    let sat: Vec<bool> = instances.iter().map(|i| i.sat).collect();
    let folds = stratified_folds(&ids, &sat, cfg.folds, seed)?;
    let restarts: std::collections::BTreeSet<u32> = instances.iter().flat_map(|i| i.vectors.keys().copied()).filter(|&r| r <= final_restart).collect();
    let mut earlier: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    let mut by_restart = BTreeMap::new();
    for r in restarts {
        let members: Vec<&ChainInstance> = instances.iter().filter(|i| i.vectors.contains_key(&r)).collect();
        let set = LabeledSet {
            names: augmented_names(r as usize - 1),
            ids: members.iter().map(|i| i.id.clone()).collect(),
            sat: members.iter().map(|i| i.sat).collect(),
            x: members.iter().map(|i| augmented_row(&i.vectors[&r], earlier.get(&i.id).unwrap_or(&BTreeMap::new()), r)).collect(),
            y: members.iter().map(|i| i.ln_conflicts).collect(),
        };
        let preds = cross_validate_pair(&set, cfg, derive_seed(seed, r as u64), &folds)?;
        let mut stage = BTreeMap::new();
        for (row, id) in set.ids.iter().enumerate() {
            earlier.entry(id.clone()).or_default().insert(r, preds.get(row, PredictionMode::GeometricMean));
            stage.insert(id.clone(), (preds.sat_pred[row], preds.unsat_pred[row]));
        }
        by_restart.insert(r, stage);
    }
    Ok(ChainPredictions { by_restart })
}

/// Plain (unaugmented) rows at one restart.
pub fn plain_set(instances: &[ChainInstance], r: u32) -> LabeledSet {
    let members: Vec<&ChainInstance> = instances.iter().filter(|i| i.vectors.contains_key(&r)).collect();
    LabeledSet {
        names: feature_names(),
        ids: members.iter().map(|i| i.id.clone()).collect(),
        sat: members.iter().map(|i| i.sat).collect(),
        x: members.iter().map(|i| i.vectors[&r].clone()).collect(),
        y: members.iter().map(|i| i.ln_conflicts).collect(),
    }
}
