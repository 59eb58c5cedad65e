//! Estimate quality as a run progresses, binned by normalized time.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::collect::{RunRecord, RunSet};
use super::evaluate::Label;
use super::io::csv_string;
use super::HarnessError;
use crate::wbe::EstimateRecord;

pub const DECILES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Wbe,
    Pb,
}

impl StreamKind {
    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Wbe => "wbe",
            StreamKind::Pb => "pb",
        }
    }

    fn stream(self, run: &RunRecord) -> &[EstimateRecord] {
        match self {
            StreamKind::Wbe => &run.wbe_stream,
            StreamKind::Pb => &run.pb_stream,
        }
    }
}

/// Decile of conflict `c` in a run of `total` conflicts.
pub fn decile(c: u64, total: u64) -> usize {
    ((DECILES as u64 * c / total.max(1)) as usize).min(DECILES - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub estimator: StreamKind,
    pub label: Label,
    pub decile: usize,
    /// Runs with at least one estimate in the decile.
    pub runs: usize,
    /// Mean over runs of each run's mean `ln(estimate / truth)`.
    pub mean_log_ratio: f64,
    pub mean_abs_log_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub points: Vec<CurvePoint>,
}

impl CurveReport {
    /// Mean |log ratio| per decile; `None` where no run had an estimate.
    pub fn series(&self, e: StreamKind, label: Label) -> Vec<Option<f64>> {
        let mut out = vec![None; DECILES];
        for p in self.points.iter().filter(|p| p.estimator == e && p.label == label) {
            out[p.decile] = Some(p.mean_abs_log_ratio);
        }
        out
    }

    /// Decile transitions along which the mean |log ratio| does not increase.
    pub fn non_increasing_transitions(&self, e: StreamKind, label: Label) -> usize {
        let s = self.series(e, label);
        s.windows(2).filter(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b <= a)).count()
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let header = ["estimator", "label", "decile", "runs", "mean_log_ratio", "mean_abs_log_ratio"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = self
            .points
            .iter()
            .map(|p| {
                vec![
                    p.estimator.name().to_string(),
                    p.label.name().to_string(),
                    p.decile.to_string(),
                    p.runs.to_string(),
                    format!("{:.6}", p.mean_log_ratio),
                    format!("{:.6}", p.mean_abs_log_ratio),
                ]
            })
            .collect();
        csv_string(&header, &rows)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("Mean |ln(estimate/actual)| by decile of normalized time\n");
        let _ = write!(out, "{:<4} {:<6}", "est", "label");
        for d in 0..DECILES {
            let _ = write!(out, " {:>6}", format!("d{d}"));
        }
        out.push('\n');
        for e in [StreamKind::Wbe, StreamKind::Pb] {
            for label in Label::ALL {
                let _ = write!(out, "{:<4} {:<6}", e.name(), label.name());
                for v in self.series(e, label) {
                    match v {
                        Some(v) => {
                            let _ = write!(out, " {v:>6.2}");
                        }
                        None => {
                            let _ = write!(out, " {:>6}", "-");
                        }
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Bins every run's estimate stream by decile of its own runtime.
pub fn curves(runs: &RunSet) -> CurveReport {
    let mut points = Vec::new();
    for e in [StreamKind::Wbe, StreamKind::Pb] {
        for label in Label::ALL {
            let mut sum = [0.0f64; DECILES];
            let mut sum_abs = [0.0f64; DECILES];
            let mut count = [0usize; DECILES];
            for run in runs.runs.iter().filter(|r| label.matches(r.sat)) {
                let truth = run.ln_conflicts();
                let mut acc = [(0.0f64, 0.0f64, 0usize); DECILES];
                for rec in e.stream(run) {
                    let ratio = rec.log2_total_cost * LN_2 - truth;
                    let a = &mut acc[decile(rec.conflict_index, run.total_conflicts)];
                    a.0 += ratio;
                    a.1 += ratio.abs();
                    a.2 += 1;
                }
                for (d, (s, sa, n)) in acc.into_iter().enumerate().filter(|(_, a)| a.2 > 0) {
                    sum[d] += s / n as f64;
                    sum_abs[d] += sa / n as f64;
                    count[d] += 1;
                }
            }
            for d in (0..DECILES).filter(|&d| count[d] > 0) {
                points.push(CurvePoint {
                    estimator: e,
                    label,
                    decile: d,
                    runs: count[d],
                    mean_log_ratio: sum[d] / count[d] as f64,
                    mean_abs_log_ratio: sum_abs[d] / count[d] as f64,
                });
            }
        }
    }
    CurveReport { points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverConfig;

    fn rec(c: u64, est: f64) -> EstimateRecord {
        EstimateRecord { conflict_index: c, log2_tree_size: None, log2_total_cost: est.log2() }
    }

    fn run(id: &str, sat: bool, total: u64, wbe: Vec<EstimateRecord>) -> RunRecord {
        RunRecord { id: id.into(), sat, total_conflicts: total, per_restart_conflicts: vec![total], queries: vec![], wbe_stream: wbe, pb_stream: vec![] }
    }

    #[test]
    fn decile_edges() {
        assert_eq!(decile(0, 100), 0);
        assert_eq!(decile(9, 100), 0);
        assert_eq!(decile(10, 100), 1);
        assert_eq!(decile(100, 100), 9);
    }

    #[test]
    fn runs_are_weighted_equally() {
        // run x: two samples in decile 0 with ratios ln 2 and ln 4; run y: one with ratio -ln 2
        let x = run("x", false, 100, vec![rec(1, 200.0), rec(2, 400.0)]);
        let y = run("y", false, 100, vec![rec(5, 50.0)]);
        let report = curves(&RunSet { solver_name: "p".into(), solver: SolverConfig::no_restarts(), runs: vec![x, y] });
        let p = report.points.iter().find(|p| p.estimator == StreamKind::Wbe && p.label == Label::Unsat && p.decile == 0).unwrap();
        assert_eq!(p.runs, 2);
        let l2 = 2f64.ln();
        assert!((p.mean_log_ratio - (1.5 * l2 - l2) / 2.0).abs() < 1e-12);
        assert!((p.mean_abs_log_ratio - (1.5 * l2 + l2) / 2.0).abs() < 1e-12);
        assert!(report.points.iter().all(|p| p.label != Label::Sat));
        assert_eq!(report.series(StreamKind::Wbe, Label::Unsat)[1], None);
    }

    #[test]
    fn counts_non_increasing_steps() {
        let s = [5.0, 4.0, 4.0, 4.5, 3.0, 2.0, 1.0, 1.0, 0.5, 0.1];
        let mut points = Vec::new();
        for (d, v) in s.iter().enumerate() {
            points.push(CurvePoint { estimator: StreamKind::Wbe, label: Label::All, decile: d, runs: 1, mean_log_ratio: 0.0, mean_abs_log_ratio: *v });
        }
        assert_eq!(CurveReport { points }.non_increasing_transitions(StreamKind::Wbe, Label::All), 8);
    }
}
