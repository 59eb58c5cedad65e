//! Error-factor accuracy of the cost estimators at a fixed query point.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::collect::{labeled_set, RunSet};
use super::io::{csv_string, fmt_f64};
use super::HarnessError;
use crate::features::WindowConfig;
use crate::lmp::{cross_validate_pair, stratified_folds, PredictionMode};
use crate::regress::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Pb,
    Wbe,
    LmpOracle,
    LmpAvg,
    LmpSatModel,
    LmpUnsatModel,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [Estimator::Pb, Estimator::Wbe, Estimator::LmpOracle, Estimator::LmpAvg, Estimator::LmpSatModel, Estimator::LmpUnsatModel];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Pb => "pb",
            Estimator::Wbe => "wbe",
            Estimator::LmpOracle => "lmp-oracle",
            Estimator::LmpAvg => "lmp-avg",
            Estimator::LmpSatModel => "lmp-sat-model",
            Estimator::LmpUnsatModel => "lmp-unsat-model",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Sat,
    Unsat,
    All,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Sat, Label::Unsat, Label::All];

    pub fn name(self) -> &'static str {
        match self {
            Label::Sat => "sat",
            Label::Unsat => "unsat",
            Label::All => "all",
        }
    }

    pub fn matches(self, sat: bool) -> bool {
        match self {
            Label::Sat => sat,
            Label::Unsat => !sat,
            Label::All => true,
        }
    }
}

/// Estimates of one instance's total conflicts, all in natural log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub sat: bool,
    pub ln_true: f64,
    pub ln_pb: Option<f64>,
    pub ln_wbe: Option<f64>,
    pub lmp_sat: f64,
    pub lmp_unsat: f64,
}

impl PredictionRow {
    pub fn estimate(&self, e: Estimator) -> Option<f64> {
        let mode = match e {
            Estimator::Pb => return self.ln_pb,
            Estimator::Wbe => return self.ln_wbe,
            Estimator::LmpOracle => PredictionMode::oracle(self.sat),
            Estimator::LmpAvg => PredictionMode::GeometricMean,
            Estimator::LmpSatModel => PredictionMode::OracleSat,
            Estimator::LmpUnsatModel => PredictionMode::OracleUnsat,
        };
        Some(match mode {
            PredictionMode::OracleSat => self.lmp_sat,
            PredictionMode::OracleUnsat => self.lmp_unsat,
            PredictionMode::GeometricMean => crate::lmp::geometric_mean(self.lmp_sat, self.lmp_unsat),
        })
    }
}

/// True when the prediction is within a multiplicative factor `k` of the truth.
pub fn within_factor(ln_pred: f64, ln_true: f64, k: f64) -> bool {
    (ln_pred - ln_true).abs() <= k.ln() + 1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorFactorRow {
    pub estimator: Estimator,
    pub label: Label,
    pub n: usize,
    /// Instances without an estimate; they count as misses.
    pub missing: usize,
    /// Percentage within each factor, aligned with the report's factors.
    pub pct: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorFactorReport {
    pub window: WindowConfig,
    pub factors: Vec<f64>,
    pub rows: Vec<ErrorFactorRow>,
    pub predictions: Vec<PredictionRow>,
}

impl ErrorFactorReport {
    pub fn from_predictions(window: WindowConfig, factors: &[f64], predictions: Vec<PredictionRow>) -> Self {
        let mut rows = Vec::new();
        for label in Label::ALL {
            let members: Vec<&PredictionRow> = predictions.iter().filter(|p| label.matches(p.sat)).collect();
            for e in Estimator::ALL {
                let n = members.len();
                let missing = members.iter().filter(|p| p.estimate(e).is_none()).count();
                let pct = factors
                    .iter()
                    .map(|&k| {
                        let hit = members.iter().filter(|p| p.estimate(e).is_some_and(|v| within_factor(v, p.ln_true, k))).count();
                        if n == 0 { 0.0 } else { 100.0 * hit as f64 / n as f64 }
                    })
                    .collect();
                rows.push(ErrorFactorRow { estimator: e, label, n, missing, pct });
            }
        }
        ErrorFactorReport { window, factors: factors.to_vec(), rows, predictions }
    }

    /// Percentage of `label` instances `e` predicts within factor `k`.
    pub fn pct(&self, e: Estimator, label: Label, k: f64) -> Option<f64> {
        let col = self.factors.iter().position(|&f| f == k)?;
        self.rows.iter().find(|r| r.estimator == e && r.label == label).map(|r| r.pct[col])
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut header: Vec<String> = ["estimator", "label", "n", "missing"].map(String::from).to_vec();
        header.extend(self.factors.iter().map(|k| format!("within_x{k}")));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.estimator.name().to_string(), r.label.name().to_string(), r.n.to_string(), r.missing.to_string()];
                row.extend(r.pct.iter().map(|p| format!("{p:.2}")));
                row
            })
            .collect();
        csv_string(&header, &rows)
    }

    pub fn predictions_csv(&self) -> Result<String, HarnessError> {
        let header = ["id", "sat", "ln_true", "ln_pb", "ln_wbe", "ln_lmp_sat", "ln_lmp_unsat"].map(String::from).to_vec();
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let rows: Vec<Vec<String>> = self
            .predictions
            .iter()
            .map(|p| vec![p.id.clone(), p.sat.to_string(), fmt_f64(p.ln_true), opt(p.ln_pb), opt(p.ln_wbe), fmt_f64(p.lmp_sat), fmt_f64(p.lmp_unsat)])
            .collect();
        csv_string(&header, &rows)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("Error factors at conflict {} (window {}+{})\n", self.window.query_point(), self.window.wait, self.window.size);
        let _ = write!(out, "{:<16} {:<6} {:>4} {:>7}", "estimator", "label", "n", "missing");
        for k in &self.factors {
            let _ = write!(out, " {:>7}", format!("x{k}"));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<16} {:<6} {:>4} {:>7}", r.estimator.name(), r.label.name(), r.n, r.missing);
            for p in &r.pct {
                let _ = write!(out, " {p:>7.1}");
            }
            out.push('\n');
        }
        out
    }
}

/// Cross-validated LMP predictions next to the PB and WBE estimates taken at the
/// query of `window` in runs without restarts.
pub fn evaluate(runs: &RunSet, window: WindowConfig, cfg: &TrainConfig, seed: u64, factors: &[f64]) -> Result<ErrorFactorReport, HarnessError> {
    let set = labeled_set(runs, 1, Some(window));
    let folds = stratified_folds(&set.ids, &set.sat, cfg.folds, seed)?;
    let preds = cross_validate_pair(&set, cfg, seed, &folds)?;
    let by_id: std::collections::BTreeMap<&str, _> = runs.runs.iter().map(|r| (r.id.as_str(), r)).collect();
    let predictions = set
        .ids
        .iter()
        .enumerate()
        .map(|(row, id)| {
            let q = by_id[id.as_str()].query(1, Some(window)).expect("row comes from this query");
            PredictionRow {
                id: id.clone(),
                sat: set.sat[row],
                ln_true: set.y[row],
                ln_pb: q.pb_total.map(f64::ln),
                ln_wbe: q.wbe_log2_total.map(|v| v * LN_2),
                lmp_sat: preds.sat_pred[row],
                lmp_unsat: preds.unsat_pred[row],
            }
        })
        .collect();
    Ok(ErrorFactorReport::from_predictions(window, factors, predictions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(sat: bool, ln_true: f64, pb: Option<f64>, wbe: Option<f64>, s: f64, u: f64) -> PredictionRow {
        PredictionRow { id: String::new(), sat, ln_true, ln_pb: pb, ln_wbe: wbe, lmp_sat: s, lmp_unsat: u }
    }

    #[test]
    fn factor_boundary_is_inclusive() {
        let t = 1000f64.ln();
        assert!(within_factor(2000f64.ln(), t, 2.0));
        assert!(within_factor(500f64.ln(), t, 2.0));
        assert!(!within_factor(2001f64.ln(), t, 2.0));
    }

    #[test]
    fn percentages_by_label_and_estimator() {
        let l = |v: f64| v.ln();
        let preds = vec![
            row(true, l(100.0), None, Some(l(150.0)), l(100.0), l(900.0)),
            row(true, l(100.0), Some(l(1000.0)), Some(l(500.0)), l(300.0), l(100.0)),
            row(false, l(100.0), Some(l(100.0)), Some(l(1.0)), l(100.0), l(100.0)),
        ];
        let r = ErrorFactorReport::from_predictions(WindowConfig::NO_RESTART, &[2.0, 8.0], preds);
        assert_eq!(r.pct(Estimator::Pb, Label::Sat, 2.0), Some(0.0));
        assert_eq!(r.pct(Estimator::Wbe, Label::Sat, 2.0), Some(50.0));
        assert_eq!(r.pct(Estimator::Wbe, Label::Sat, 8.0), Some(100.0));
        assert_eq!(r.pct(Estimator::LmpOracle, Label::Sat, 2.0), Some(50.0));
        assert_eq!(r.pct(Estimator::LmpUnsatModel, Label::All, 2.0), Some(200.0 / 3.0));
        let pb_sat = r.rows.iter().find(|x| x.estimator == Estimator::Pb && x.label == Label::Sat).unwrap();
        assert_eq!(pb_sat.missing, 1);
        assert_eq!(r.to_csv().unwrap().lines().count(), 1 + 18);
    }
}
