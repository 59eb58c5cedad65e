//! Observation windows and the search-behaviour feature vector.

use serde::{Deserialize, Serialize};

use crate::cnf::{ratio_or_zero, ClauseDbCounts, InitFeatures};

/// Streaming min/max/mean/population-SD/last (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStat {
    count: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
    last: f64,
}

impl RunningStat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        if self.count == 1 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.last = x;
    }

    pub fn count(&self) -> u64 {
        self.count
    }
    pub fn min(&self) -> f64 {
        self.min
    }
    pub fn max(&self) -> f64 {
        self.max
    }
    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn last(&self) -> f64 {
        self.last
    }
    pub fn sd(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0).sqrt()
        }
    }
}

/// Conflicts to skip at the start of a restart, then conflicts to observe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowConfig {
    pub wait: u64,
    pub size: u64,
}

impl WindowConfig {
    /// Window for runs without restarts, ending at conflict 2000.
    pub const NO_RESTART: WindowConfig = WindowConfig { wait: 500, size: 1500 };
    /// Window for runs without restarts, ending at conflict 35000.
    pub const NO_RESTART_LONG: WindowConfig = WindowConfig { wait: 500, size: 34500 };

    /// Conflicts into the restart at which the feature vector is complete.
    pub fn query_point(&self) -> u64 {
        self.wait + self.size
    }
}

/// The window of a restart with limit `s`: size `max(1000, 0.01 s)` after
/// `max(500, 0.02 s)` conflicts, or `None` when it does not fit.
pub fn window_for_restart(limit: u64) -> Option<WindowConfig> {
    let s = limit as f64;
    let size = (0.01 * s).round().max(1000.0) as u64;
    let wait = (0.02 * s).round().max(500.0) as u64;
    (wait + size <= limit).then_some(WindowConfig { wait, size })
}

const FULL: [&str; 5] = ["min", "max", "avg", "sd", "last"];
const CLAUSE: [&str; 3] = ["avg", "sd", "last"];
const DEPTH: [&str; 3] = ["max", "avg", "sd"];
const SPREAD: [&str; 4] = ["min", "max", "avg", "sd"];

/// Column groups in canonical order: name and the statistics reported.
const GROUPS: [(&str, &[&str]); 15] = [
    ("cls/var", &FULL),
    ("var/cls", &FULL),
    ("FBC", &CLAUSE),
    ("FTC", &CLAUSE),
    ("ACS", &CLAUSE),
    ("SD", &DEPTH),
    ("BSD", &DEPTH),
    ("BS", &DEPTH),
    ("LCS", &SPREAD),
    ("CCS", &SPREAD),
    ("ABB", &SPREAD),
    ("AAB", &SPREAD),
    ("AAB/ABB", &SPREAD),
    ("ABB/AAB", &SPREAD),
    ("LWBE", &FULL),
];

pub const INIT_NAMES: [&str; 7] = ["var", "cls", "cls/var", "var/cls", "FBC", "FTC", "ACS"];
pub const NUM_FEATURES: usize = 64;

/// Canonical feature names, in column order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = INIT_NAMES.iter().map(|s| s.to_string()).collect();
    for (group, stats) in GROUPS {
        names.extend(stats.iter().map(|s| format!("{group}_{s}")));
    }
    debug_assert_eq!(names.len(), NUM_FEATURES);
    names
}

/// Name of the `i`-th (1-based) previous-restart prediction column.
pub fn history_name(i: usize) -> String {
    format!("pred_r{i}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names().iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Base features plus the predictions made at earlier restarts, in log-conflict units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedFeatureVector {
    pub base: FeatureVector,
    pub history: Vec<f64>,
}

impl AugmentedFeatureVector {
    pub fn names(&self) -> Vec<String> {
        augmented_names(self.history.len())
    }

    pub fn values(&self) -> Vec<f64> {
        self.base.values.iter().chain(&self.history).copied().collect()
    }
}

pub fn augmented_names(history_len: usize) -> Vec<String> {
    let mut names = feature_names();
    names.extend((1..=history_len).map(history_name));
    names
}

/// Fills history slots that had no window with the latest earlier prediction (0 before any).
pub fn impute_history(slots: &[Option<f64>]) -> Vec<f64> {
    let mut last = 0.0;
    slots
        .iter()
        .map(|s| {
            if let Some(v) = s {
                last = *v;
            }
            last
        })
        .collect()
}

/// Everything observed about one conflict, after its backjump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConflictObservation {
    pub num_vars: u32,
    pub db: ClauseDbCounts,
    pub decision_level: u32,
    pub binary_depth: usize,
    pub backjump_size: u32,
    pub learnt_size: u32,
    pub conflict_size: u32,
    pub assigned_before: u32,
    pub assigned_after: u32,
    /// ln of the tree-size estimate, when the sampling gate fired.
    pub ln_wbe: Option<f64>,
}

/// Statistics accumulated over one observation window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowStats {
    stats: [RunningStat; 15],
    conflicts: u64,
}

impl WindowStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn observe(&mut self, o: &ConflictObservation) {
        self.conflicts += 1;
        let vars = o.num_vars as f64;
        let cls = o.db.clauses as f64;
        let abb = ratio_or_zero(o.assigned_before as f64, vars);
        let aab = ratio_or_zero(o.assigned_after as f64, vars);
        let values = [
            ratio_or_zero(cls, vars),
            ratio_or_zero(vars, cls),
            o.db.frac_binary(),
            o.db.frac_ternary(),
            o.db.avg_size(),
            o.decision_level as f64,
            o.binary_depth as f64,
            o.backjump_size as f64,
            o.learnt_size as f64,
            o.conflict_size as f64,
            abb,
            aab,
            ratio_or_zero(aab, abb),
            ratio_or_zero(abb, aab),
        ];
        for (stat, v) in self.stats.iter_mut().zip(values) {
            stat.push(v);
        }
        if let Some(l) = o.ln_wbe {
            self.stats[14].push(l);
        }
    }

    /// The 64 features, or `None` for an empty window.
    pub fn finalize(&self, init: &InitFeatures) -> Option<FeatureVector> {
        if self.conflicts == 0 {
            return None;
        }
        let mut values = vec![
            init.vars,
            init.clauses,
            init.clauses_per_var,
            init.vars_per_clause,
            init.frac_binary,
            init.frac_ternary,
            init.avg_clause_size,
        ];
        for ((_, names), stat) in GROUPS.iter().zip(&self.stats) {
            for name in names.iter() {
                let v = if stat.count() == 0 {
                    0.0
                } else {
                    match *name {
                        "min" => stat.min(),
                        "max" => stat.max(),
                        "avg" => stat.mean(),
                        "sd" => stat.sd(),
                        "last" => stat.last(),
                        _ => unreachable!(),
                    }
                };
                values.push(v);
            }
        }
        Some(FeatureVector { values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use rand::{Rng, SeedableRng};

    fn obs() -> ConflictObservation {
        let mut db = ClauseDbCounts::default();
        for _ in 0..426 {
            db.add(3);
        }
        ConflictObservation {
            num_vars: 100,
            db,
            decision_level: 12,
            binary_depth: 15,
            backjump_size: 8,
            learnt_size: 7,
            conflict_size: 3,
            assigned_before: 50,
            assigned_after: 20,
            ln_wbe: Some(4.0),
        }
    }

    fn init() -> InitFeatures {
        InitFeatures { vars: 100.0, clauses: 426.0, clauses_per_var: 4.26, vars_per_clause: 100.0 / 426.0, frac_binary: 0.0, frac_ternary: 1.0, avg_clause_size: 3.0 }
    }

    #[test]
    fn names_are_unique_and_64() {
        let names = feature_names();
        assert_eq!(names.len(), 64);
        let set: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), 64);
        assert_eq!(names[7], "cls/var_min");
        assert_eq!(names[63], "LWBE_last");
    }

    #[test]
    fn window_sizes() {
        assert_eq!(window_for_restart(100_000), Some(WindowConfig { wait: 2000, size: 1000 }));
        assert_eq!(window_for_restart(200_000), Some(WindowConfig { wait: 4000, size: 2000 }));
        assert_eq!(window_for_restart(1200), None);
        assert_eq!(window_for_restart(1500), Some(WindowConfig { wait: 500, size: 1000 }));
        assert_eq!(WindowConfig::NO_RESTART.query_point(), 2000);
        assert_eq!(WindowConfig::NO_RESTART_LONG.query_point(), 35000);
    }

    #[test]
    fn running_stat_basics() {
        let mut s = RunningStat::new();
        s.push(5.0);
        assert_eq!((s.min(), s.max(), s.mean(), s.sd(), s.last()), (5.0, 5.0, 5.0, 0.0, 5.0));
        for x in [1.0, 9.0] {
            s.push(x);
        }
        assert_eq!(s.mean(), 5.0);
        assert!((s.sd() - (32.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.last(), 9.0);
    }

    #[test]
    fn running_stat_matches_two_pass() {
        let mut rng = SeededRng::seed_from_u64(3);
        for _ in 0..2000 {
            let n = rng.random_range(1..200);
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let offset = scale * rng.random_range(-100.0..100.0);
            let xs: Vec<f64> = (0..n).map(|_| offset + scale * rng.random::<f64>()).collect();
            let mut s = RunningStat::new();
            xs.iter().for_each(|&x| s.push(x));
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((s.mean() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
            assert!((s.sd() - var.sqrt()).abs() <= 1e-9 * var.sqrt().max(scale));
            assert!(s.min() <= s.mean() && s.mean() <= s.max());
        }
    }

    #[test]
    fn backjump_and_assignment_ratios() {
        let mut w = WindowStats::new();
        w.observe(&obs());
        let v = w.finalize(&init()).unwrap();
        assert_eq!(v.get("BS_max"), Some(8.0));
        assert_eq!(v.get("ABB_avg"), Some(0.5));
        assert_eq!(v.get("AAB_avg"), Some(0.2));
        assert!((v.get("AAB/ABB_avg").unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(v.get("ABB/AAB_max"), Some(2.5));
    }

    #[test]
    fn learnt_clause_updates_average_size() {
        let mut o = obs();
        o.db.add(7);
        let mut w = WindowStats::new();
        w.observe(&o);
        let v = w.finalize(&init()).unwrap();
        assert_eq!(v.get("ACS_last"), Some((426.0 * 3.0 + 7.0) / 427.0));
    }

    #[test]
    fn constant_stream_and_single_conflict() {
        let mut w = WindowStats::new();
        w.observe(&obs());
        let v = w.finalize(&init()).unwrap();
        for name in feature_names().iter().filter(|n| n.ends_with("_sd")) {
            assert_eq!(v.get(name), Some(0.0), "{name}");
        }
        for _ in 0..10 {
            w.observe(&obs());
        }
        let v = w.finalize(&init()).unwrap();
        let cv = 4.26;
        for stat in ["min", "max", "avg", "last"] {
            assert!((v.get(&format!("cls/var_{stat}")).unwrap() - cv).abs() < 1e-12);
        }
        assert_eq!(v.get("cls/var_sd"), Some(0.0));
    }

    #[test]
    fn zero_denominators_give_zero() {
        let mut o = obs();
        o.assigned_before = 0;
        o.assigned_after = 0;
        let mut w = WindowStats::new();
        w.observe(&o);
        let v = w.finalize(&init()).unwrap();
        assert_eq!(v.get("AAB/ABB_avg"), Some(0.0));
        assert_eq!(v.get("ABB/AAB_avg"), Some(0.0));
    }

    #[test]
    fn empty_window_has_no_vector() {
        assert_eq!(WindowStats::new().finalize(&init()), None);
    }

    #[test]
    fn history_imputation() {
        assert_eq!(impute_history(&[None, Some(3.0), None, Some(5.0), None]), vec![0.0, 3.0, 3.0, 5.0, 5.0]);
        assert_eq!(augmented_names(2)[64..], ["pred_r1".to_string(), "pred_r2".to_string()]);
    }
}
