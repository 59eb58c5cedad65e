//! Search observer that runs the tree tracker, both estimators and the feature
//! windows over one solve, live or from a recorded trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{static_stats, ClauseDbCounts, Formula, InitFeatures};
use crate::features::{window_for_restart, ConflictObservation, FeatureVector, WindowConfig, WindowStats};
use crate::pbar::{self, DepthHistory};
use crate::solver::{SearchEvent, SearchObserver, SolverConfig, Status};
use crate::treetrace::{TraceError, TreeStep, TreeTracker};
use crate::wbe::{estimate_total_cost, sampling_gate, EstimateRecord, WbeError, WbeState};

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Wbe(#[from] WbeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// The configuration of the observed solver; fixes restart limits and windows.
    pub solver: SolverConfig,
    /// Windows used when restarts are off.
    pub fixed_windows: Vec<WindowConfig>,
    pub pb_alpha: f64,
    /// Keep the sampled estimate streams.
    pub record_streams: bool,
    /// Ignore windows of restarts after this one (1-based).
    pub last_query_restart: Option<u32>,
}

impl MonitorConfig {
    pub fn new(solver: SolverConfig) -> Self {
        MonitorConfig {
            solver,
            fixed_windows: vec![WindowConfig::NO_RESTART],
            pb_alpha: pbar::DEFAULT_ALPHA,
            record_streams: true,
            last_query_restart: None,
        }
    }
}

/// Features and estimates taken at the end of an observation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPoint {
    /// 1-based restart number.
    pub restart: u32,
    pub window: WindowConfig,
    /// Conflicts since the start of the solve.
    pub conflict_index: u64,
    pub features: FeatureVector,
    pub wbe_log2_tree: Option<f64>,
    pub wbe_log2_total: Option<f64>,
    pub pb_total: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub queries: Vec<QueryPoint>,
    pub wbe_stream: Vec<EstimateRecord>,
    pub pb_stream: Vec<EstimateRecord>,
    pub status: Option<Status>,
    pub total_conflicts: u64,
}

#[derive(Clone, Copy, Debug)]
struct PendingConflict {
    level: u32,
    leaf_depth: usize,
    conflict_size: u32,
    learnt_size: u32,
    assigned_before: u32,
}

pub struct Monitor {
    cfg: MonitorConfig,
    init: InitFeatures,
    num_vars: u32,
    db: ClauseDbCounts,
    tracker: TreeTracker,
    wbe: WbeState,
    pb: DepthHistory,
    per_restart: Vec<u64>,
    total_conflicts: u64,
    pending: Option<PendingConflict>,
    since_estimate: u64,
    last_depth: usize,
    windows: Vec<(WindowConfig, WindowStats)>,
    report: MonitorReport,
    error: Option<MonitorError>,
}

impl Monitor {
    pub fn new(formula: &Formula, cfg: MonitorConfig) -> Self {
        let mut db = ClauseDbCounts::default();
        for c in &formula.clauses {
            db.add(c.len());
        }
        Monitor {
            init: static_stats(formula),
            num_vars: formula.num_vars,
            db,
            tracker: TreeTracker::new(),
            wbe: WbeState::new(),
            pb: DepthHistory::new(cfg.pb_alpha),
            per_restart: Vec::new(),
            total_conflicts: 0,
            pending: None,
            since_estimate: 0,
            last_depth: 0,
            windows: Vec::new(),
            report: MonitorReport::default(),
            error: None,
            cfg,
        }
    }

    pub fn error(&self) -> Option<&MonitorError> {
        self.error.as_ref()
    }

    pub fn report(&self) -> &MonitorReport {
        &self.report
    }

    pub fn finish(self) -> Result<MonitorReport, MonitorError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.report),
        }
    }

    pub fn replay<'a>(formula: &Formula, cfg: MonitorConfig, events: impl IntoIterator<Item = &'a SearchEvent>) -> Result<MonitorReport, MonitorError> {
        let mut m = Monitor::new(formula, cfg);
        for e in events {
            m.on_event(e);
        }
        m.finish()
    }

    fn current_restart(&self) -> u32 {
        self.per_restart.len().saturating_sub(1) as u32
    }

    fn wbe_estimate(&self) -> Option<(f64, f64)> {
        let tree = self.wbe.estimate_tree_size()?;
        let cost = estimate_total_cost(&tree, &self.cfg.solver, &self.per_restart, self.current_restart());
        Some((tree.log2_size, cost.log2_total_conflicts))
    }

    fn pb_estimate(&self) -> Option<f64> {
        pbar::estimate_total(self.total_conflicts, &self.pb, self.tracker.branch().entries())
    }

    /// Samples both estimators into the streams; returns the WBE tree estimate.
    fn sample(&mut self) -> Option<(f64, f64)> {
        let wbe = self.wbe_estimate();
        if self.cfg.record_streams {
            if let Some((tree, total)) = wbe {
                self.report.wbe_stream.push(EstimateRecord { conflict_index: self.total_conflicts, log2_tree_size: Some(tree), log2_total_cost: total });
            }
            if let Some(total) = self.pb_estimate() {
                self.report.pb_stream.push(EstimateRecord { conflict_index: self.total_conflicts, log2_tree_size: None, log2_total_cost: total.log2() });
            }
        }
        self.since_estimate = 0;
        wbe
    }

    fn step(&mut self, event: &SearchEvent) -> Result<(), MonitorError> {
        let tree_step = self.tracker.step(event)?;
        match (event, tree_step) {
            (SearchEvent::Restart { index, conflict_limit }, _) => {
                self.wbe.reset();
                self.pb.clear();
                self.per_restart.push(0);
                self.since_estimate = 0;
                self.last_depth = 0;
                self.windows.clear();
                let number = index + 1;
                if self.cfg.last_query_restart.is_none_or(|last| number <= last) {
                    let windows: Vec<WindowConfig> = match conflict_limit {
                        Some(limit) => window_for_restart(*limit).into_iter().collect(),
                        None if *index == 0 => self.cfg.fixed_windows.clone(),
                        None => Vec::new(),
                    };
                    self.windows = windows.into_iter().map(|w| (w, WindowStats::new())).collect();
                }
            }
            (SearchEvent::Conflict { level, conflict_clause_size, learnt_clause_size, assigned_before }, TreeStep::Conflict { leaf_depth }) => {
                self.total_conflicts += 1;
                if let Some(c) = self.per_restart.last_mut() {
                    *c += 1;
                }
                self.since_estimate += 1;
                self.pending = Some(PendingConflict {
                    level: *level,
                    leaf_depth,
                    conflict_size: *conflict_clause_size,
                    learnt_size: *learnt_clause_size,
                    assigned_before: *assigned_before,
                });
            }
            (SearchEvent::Backjump { from_level, to_level, assigned_after }, TreeStep::Backjump(summary)) => {
                let pending = self.pending.take().expect("tracker checks conflict order");
                self.wbe.observe(&summary)?;
                self.pb.record(&summary.completed);
                if pending.learnt_size >= 2 {
                    self.db.add(pending.learnt_size as usize);
                }
                let in_restart = self.per_restart.last().copied().unwrap_or(0);
                let opening = self.windows.iter().any(|(w, _)| in_restart == w.wait + 1);
                let ln_wbe = if opening || sampling_gate(self.since_estimate, self.last_depth) {
                    self.last_depth = pending.leaf_depth;
                    self.sample().map(|(tree, _)| tree * std::f64::consts::LN_2)
                } else {
                    None
                };
                let obs = ConflictObservation {
                    num_vars: self.num_vars,
                    db: self.db,
                    decision_level: pending.level,
                    binary_depth: pending.leaf_depth,
                    backjump_size: from_level - to_level,
                    learnt_size: pending.learnt_size,
                    conflict_size: pending.conflict_size,
                    assigned_before: pending.assigned_before,
                    assigned_after: *assigned_after,
                    ln_wbe,
                };
                let mut closed = Vec::new();
                for (i, (w, stats)) in self.windows.iter_mut().enumerate() {
                    if in_restart > w.wait && in_restart <= w.query_point() {
                        stats.observe(&obs);
                    }
                    if in_restart == w.query_point() {
                        closed.push(i);
                    }
                }
                for &i in closed.iter().rev() {
                    let (window, stats) = self.windows.remove(i);
                    let features = stats.finalize(&self.init).expect("window saw its conflicts");
                    let wbe = self.wbe_estimate();
                    self.report.queries.push(QueryPoint {
                        restart: self.current_restart() + 1,
                        window,
                        conflict_index: self.total_conflicts,
                        features,
                        wbe_log2_tree: wbe.map(|w| w.0),
                        wbe_log2_total: wbe.map(|w| w.1),
                        pb_total: self.pb_estimate(),
                    });
                }
                self.report.queries.sort_by_key(|q| (q.conflict_index, q.window));
            }
            (SearchEvent::Reduce { removed }, _) => {
                self.db.clauses -= removed.clauses;
                self.db.binary -= removed.binary;
                self.db.ternary -= removed.ternary;
                self.db.literals -= removed.literals;
            }
            (SearchEvent::Solved { status }, step) => {
                if matches!(step, TreeStep::Exhausted) {
                    self.pending = None;
                    self.wbe.observe_exhausted();
                }
                if self.total_conflicts > 0 {
                    self.sample();
                }
                self.report.status = Some(*status);
                self.report.total_conflicts = self.total_conflicts;
            }
            _ => {}
        }
        Ok(())
    }
}

impl SearchObserver for Monitor {
    fn on_event(&mut self, event: &SearchEvent) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.step(event) {
            self.error = Some(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{generate_random_ksat, GeneratorConfig};
    use crate::features::NUM_FEATURES;
    use crate::solver::{solve, EventLog, Tee};

    fn instance(seed: u64) -> Formula {
        generate_random_ksat(&GeneratorConfig { num_vars: 130, ratio: 4.3, k: 3, seed }).unwrap()
    }

    #[test]
    fn online_equals_offline() {
        for (seed, cfg) in [(1, SolverConfig::no_restarts()), (2, SolverConfig::default()), (3, SolverConfig::geometric(1.2))] {
            let f = instance(seed);
            let mut live = Monitor::new(&f, MonitorConfig::new(cfg.clone()));
            let mut log = EventLog::default();
            let outcome = solve(&f, &cfg, &mut Tee(vec![&mut live, &mut log])).unwrap();
            let live = live.finish().unwrap();
            let replayed = Monitor::replay(&f, MonitorConfig::new(cfg), &log.0).unwrap();
            assert_eq!(live, replayed);
            assert_eq!(live.total_conflicts, outcome.total_conflicts);
            for q in &live.queries {
                assert_eq!(q.features.values.len(), NUM_FEATURES);
                let bits: Vec<u64> = q.features.values.iter().map(|v| v.to_bits()).collect();
                let other: Vec<u64> = replayed.queries.iter().find(|r| r.conflict_index == q.conflict_index).unwrap().features.values.iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits, other);
            }
        }
    }

    #[test]
    fn no_restart_query_lands_at_2000() {
        let cfg = SolverConfig::no_restarts();
        for seed in 0..30 {
            let f = instance(seed);
            let mut m = Monitor::new(&f, MonitorConfig::new(cfg.clone()));
            let outcome = solve(&f, &cfg, &mut m).unwrap();
            let report = m.finish().unwrap();
            if outcome.total_conflicts >= 2000 {
                assert_eq!(report.queries.len(), 1);
                let q = &report.queries[0];
                assert_eq!((q.restart, q.conflict_index), (1, 2000));
                assert!(q.wbe_log2_total.unwrap() >= 2000f64.log2());
                assert!(q.features.get("LWBE_avg").unwrap() > 0.0);
                assert_eq!(q.features.get("var"), Some(130.0));
            } else {
                assert!(report.queries.is_empty());
            }
        }
    }

    #[test]
    fn final_wbe_estimate_is_tree_size() {
        let cfg = SolverConfig::no_restarts();
        let (outcome, report) = (0..)
            .find_map(|seed| {
                let f = generate_random_ksat(&GeneratorConfig { num_vars: 60, ratio: 4.8, k: 3, seed }).unwrap();
                let mut m = Monitor::new(&f, MonitorConfig::new(cfg.clone()));
                let outcome = solve(&f, &cfg, &mut m).unwrap();
                (outcome.status == Status::Unsat).then(|| (outcome, m.finish().unwrap()))
            })
            .unwrap();
        let last = report.wbe_stream.last().unwrap();
        assert_eq!(last.conflict_index, outcome.total_conflicts);
        let nodes = 2 * outcome.total_conflicts - 1;
        assert!((last.log2_tree_size.unwrap() - (nodes as f64).log2()).abs() < 1e-9);
    }

    #[test]
    fn restart_windows_follow_the_schedule() {
        let cfg = SolverConfig::default();
        let f = generate_random_ksat(&GeneratorConfig { num_vars: 200, ratio: 4.26, k: 3, seed: 8 }).unwrap();
        let mut m = Monitor::new(&f, MonitorConfig::new(cfg.clone()));
        let outcome = solve(&f, &cfg, &mut m).unwrap();
        let report = m.finish().unwrap();
        let mut start = 0;
        for (i, &c) in outcome.per_restart_conflicts.iter().enumerate() {
            let limit = cfg.restart_limit(i as u32).unwrap();
            if let Some(w) = window_for_restart(limit) {
                let q = report.queries.iter().find(|q| q.restart == i as u32 + 1);
                if c >= w.query_point() {
                    assert_eq!(q.unwrap().conflict_index, start + w.query_point());
                } else {
                    assert!(q.is_none());
                }
            }
            start += c;
        }
    }
}
