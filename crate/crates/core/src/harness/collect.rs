//! Monitored solves over a manifest, and the labelled datasets built from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::Manifest;
use super::io::{csv_string, fmt_f64};
use super::{par_map, HarnessError};
use crate::features::{feature_names, WindowConfig};
use crate::lmp::{ChainInstance, LabeledSet};
use crate::monitor::{Monitor, MonitorConfig, QueryPoint};
use crate::solver::{solve, SolverConfig, Status};
use crate::wbe::EstimateRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub sat: bool,
    pub total_conflicts: u64,
    pub per_restart_conflicts: Vec<u64>,
    pub queries: Vec<QueryPoint>,
    pub wbe_stream: Vec<EstimateRecord>,
    pub pb_stream: Vec<EstimateRecord>,
}

impl RunRecord {
    pub fn ln_conflicts(&self) -> f64 {
        (self.total_conflicts as f64).ln()
    }

    /// The query of restart `restart` (1-based), optionally for one window.
    pub fn query(&self, restart: u32, window: Option<WindowConfig>) -> Option<&QueryPoint> {
        self.queries.iter().find(|q| q.restart == restart && window.is_none_or(|w| q.window == w))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub solver_name: String,
    pub solver: SolverConfig,
    pub runs: Vec<RunRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectOptions {
    /// Windows of runs without restarts.
    pub fixed_windows: Vec<WindowConfig>,
    pub last_query_restart: Option<u32>,
    pub record_streams: bool,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions { fixed_windows: vec![WindowConfig::NO_RESTART, WindowConfig::NO_RESTART_LONG], last_query_restart: None, record_streams: true }
    }
}

/// Solves every manifest instance under the monitor; runs come back in manifest order.
pub fn collect(manifest: &Manifest, solver_name: &str, solver: &SolverConfig, opts: &CollectOptions, jobs: usize) -> Result<RunSet, HarnessError> {
    let runs = par_map(&manifest.instances, jobs, |inst| -> Result<RunRecord, HarnessError> {
        let formula = inst.load()?;
        let mut mcfg = MonitorConfig::new(solver.clone());
        mcfg.fixed_windows = opts.fixed_windows.clone();
        mcfg.last_query_restart = opts.last_query_restart;
        mcfg.record_streams = opts.record_streams;
        let mut monitor = Monitor::new(&formula, mcfg);
        let out = solve(&formula, solver, &mut monitor)?;
        let report = monitor.finish()?;
        let sat = match out.status {
            Status::Sat => true,
            Status::Unsat => false,
            Status::BudgetExhausted => return Err(HarnessError::Data(format!("{}: solver `{solver_name}` hit its budget", inst.id))),
        };
        if sat != inst.sat {
            return Err(HarnessError::Data(format!("{}: solver `{solver_name}` disagrees with the manifest label", inst.id)));
        }
        Ok(RunRecord {
            id: inst.id.clone(),
            sat,
            total_conflicts: out.total_conflicts,
            per_restart_conflicts: out.per_restart_conflicts,
            queries: report.queries,
            wbe_stream: report.wbe_stream,
            pb_stream: report.pb_stream,
        })
    });
    Ok(RunSet { solver_name: solver_name.to_string(), solver: solver.clone(), runs: runs.into_iter().collect::<Result<_, _>>()? })
}

/// Rows of the runs that reached the query of `restart` (and `window`, if given).
pub fn labeled_set(runs: &RunSet, restart: u32, window: Option<WindowConfig>) -> LabeledSet {
    let mut set = LabeledSet { names: feature_names(), ..LabeledSet::default() };
    for run in &runs.runs {
        if let Some(q) = run.query(restart, window) {
            set.ids.push(run.id.clone());
            set.sat.push(run.sat);
            set.x.push(q.features.values.clone());
            set.y.push(run.ln_conflicts());
        }
    }
    set
}

/// Per-restart feature vectors of every run, up to `final_restart`.
pub fn chain_instances(runs: &RunSet, final_restart: u32) -> Vec<ChainInstance> {
    runs.runs
        .iter()
        .map(|run| ChainInstance {
            id: run.id.clone(),
            sat: run.sat,
            ln_conflicts: run.ln_conflicts(),
            vectors: run.queries.iter().filter(|q| q.restart <= final_restart).map(|q| (q.restart, q.features.values.clone())).collect::<BTreeMap<_, _>>(),
        })
        .collect()
}

/// One CSV line per query point: identifiers, estimates, then every feature.
pub fn features_csv(runs: &RunSet) -> Result<String, HarnessError> {
    let mut header: Vec<String> = ["id", "sat", "total_conflicts", "restart", "wait", "size", "conflict_index", "wbe_log2_total", "pb_total"].map(String::from).to_vec();
    header.extend(feature_names());
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = runs
        .runs
        .iter()
        .flat_map(|r| {
            r.queries.iter().map(move |q| {
                let mut row = vec![
                    r.id.clone(),
                    r.sat.to_string(),
                    r.total_conflicts.to_string(),
                    q.restart.to_string(),
                    q.window.wait.to_string(),
                    q.window.size.to_string(),
                    q.conflict_index.to_string(),
                    opt(q.wbe_log2_total),
                    opt(q.pb_total),
                ];
                row.extend(q.features.values.iter().map(|v| fmt_f64(*v)));
                row
            })
        })
        .collect();
    csv_string(&header, &rows)
}

/// One CSV line per run.
pub fn runs_csv(runs: &RunSet) -> Result<String, HarnessError> {
    let header = ["id", "sat", "total_conflicts", "restarts", "queries"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = runs
        .runs
        .iter()
        .map(|r| vec![r.id.clone(), r.sat.to_string(), r.total_conflicts.to_string(), r.per_restart_conflicts.len().to_string(), r.queries.len().to_string()])
        .collect();
    csv_string(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::dataset::generate;

    fn manifest() -> Manifest {
        let cfg = ExperimentConfig::from_toml(
            r#"
seed = 3
[ensemble]
name = "c"
sat = 2
unsat = 2
vars = [60, 70]
ratio = [4.2, 4.4]
reference_solver = "plain"
min_conflicts = 20
max_candidates = 400
[solvers.plain]
restarts = false
"#,
        )
        .unwrap();
        generate(&cfg, 1, |_, _, _| {}).unwrap()
    }

    #[test]
    fn collected_runs_match_the_manifest() {
        let m = manifest();
        let solver = SolverConfig::geometric(1.5);
        let opts = CollectOptions { record_streams: false, ..CollectOptions::default() };
        let runs = collect(&m, "a", &solver, &opts, 1).unwrap();
        assert_eq!(runs.runs.len(), 4);
        for (run, inst) in runs.runs.iter().zip(&m.instances) {
            assert_eq!(run.id, inst.id);
            assert_eq!(run.sat, inst.sat);
            assert_eq!(run.per_restart_conflicts.iter().sum::<u64>(), run.total_conflicts);
            assert!(run.wbe_stream.is_empty());
        }
        // the first restart long enough for a window is the eighth
        assert!(runs.runs.iter().flat_map(|r| &r.queries).all(|q| q.restart >= 8));
        let chains = chain_instances(&runs, 7);
        assert!(chains.iter().all(|c| c.vectors.is_empty()));
        let csv = features_csv(&runs).unwrap();
        assert_eq!(csv.lines().count(), 1 + runs.runs.iter().map(|r| r.queries.len()).sum::<usize>());
    }

    #[test]
    fn collection_is_independent_of_jobs() {
        let m = manifest();
        let solver = SolverConfig::no_restarts();
        let one = collect(&m, "p", &solver, &CollectOptions::default(), 1).unwrap();
        let two = collect(&m, "p", &solver, &CollectOptions::default(), 2).unwrap();
        assert_eq!(one, two);
        let set = labeled_set(&one, 1, Some(WindowConfig::NO_RESTART));
        let reached: Vec<bool> = one.runs.iter().map(|r| r.total_conflicts > 2000).collect();
        assert_eq!(set.len(), reached.iter().filter(|&&b| b).count());
    }
}
