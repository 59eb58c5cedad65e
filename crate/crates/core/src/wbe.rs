//! Weighted backtrack estimation for conflict-driven search.
//!
//! The estimator keeps two quantities for the current tree:
//!
//! * `C`, which grows by 2 per conflict (the leaf, plus the node backtracked to);
//! * `P`, the explored probability mass: the sum of `2^-(d + 1)` over closed
//!   nodes on the current branch at binary depth `d`.
//!
//! The tree-size estimate is `C / P - 1`. On a chronological trace this equals
//! the leaf-weighted average of `2^(d + 1) - 1` with weights `2^-d`, and it
//! stays consistent under backjumps because closed nodes that are jumped over
//! leave the branch together with their mass. `P` gets as small as `2^-2000`
//! on deep structured searches, so it is kept as a log2 exponent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logspace::{log2_add, log2_minus_one, log2_sub, log2_sum};
use crate::solver::{restart_schedule, SolverConfig};
use crate::treetrace::{BackjumpSummary, BranchEntry};

/// Relative slack allowed when removing mass that should exactly match what was added.
const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum WbeError {
    #[error("removing closed mass 2^{removed} exceeds explored mass 2^{current}: branch and estimator out of sync")]
    MassDesync { removed: f64, current: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSizeEstimate {
    /// log2 of the estimated node count.
    pub log2_size: f64,
    /// The estimate as an integer when it is below 2^53.
    pub exact_size: Option<u64>,
}

impl TreeSizeEstimate {
    pub fn from_log2(log2_size: f64) -> Self {
        let exact_size = (log2_size < 53.0).then(|| log2_size.exp2().round() as u64);
        TreeSizeEstimate { log2_size, exact_size }
    }

    pub fn ln_size(&self) -> f64 {
        self.log2_size * std::f64::consts::LN_2
    }
}

/// `C` and `P` for the tree of the current restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WbeState {
    node_counter: u64,
    log2_mass: f64,
    complete: bool,
}

impl Default for WbeState {
    fn default() -> Self {
        WbeState { node_counter: 0, log2_mass: f64::NEG_INFINITY, complete: false }
    }
}

impl WbeState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The node counter `C`.
    pub fn node_counter(&self) -> u64 {
        self.node_counter
    }

    pub fn leaves_seen(&self) -> u64 {
        self.node_counter / 2
    }

    /// log2 of the explored mass `P`; -inf before the first conflict.
    pub fn log2_mass(&self) -> f64 {
        self.log2_mass
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn observe(&mut self, summary: &BackjumpSummary) -> Result<(), WbeError> {
        self.node_counter += 2;
        let mut remaining = self.log2_mass;
        if !summary.popped_closed_depths.is_empty() {
            let removed = log2_sum(summary.popped_closed_depths.iter().map(|&d| closed_exponent(d)));
            if removed > self.log2_mass + (1.0 + MASS_TOLERANCE).log2() {
                return Err(WbeError::MassDesync { removed, current: self.log2_mass });
            }
            remaining = if removed >= self.log2_mass { f64::NEG_INFINITY } else { log2_sub(self.log2_mass, removed) };
        }
        self.log2_mass = log2_add(remaining, closed_exponent(summary.target_depth));
        Ok(())
    }

    /// The final conflict closed the root: every node has been visited and `P = 1`.
    pub fn observe_exhausted(&mut self) {
        self.node_counter += 2;
        self.log2_mass = 0.0;
        self.complete = true;
    }

    pub fn reset(&mut self) {
        *self = WbeState::default();
    }

    /// `C / P - 1`, or `None` before the first conflict.
    pub fn estimate_tree_size(&self) -> Option<TreeSizeEstimate> {
        if self.node_counter == 0 || self.log2_mass == f64::NEG_INFINITY {
            return None;
        }
        if self.complete {
            let nodes = self.node_counter - 1;
            return Some(TreeSizeEstimate { log2_size: (nodes as f64).log2(), exact_size: Some(nodes) });
        }
        let log2_ratio = (self.node_counter as f64).log2() - self.log2_mass;
        Some(TreeSizeEstimate::from_log2(log2_minus_one(log2_ratio)))
    }
}

/// log2 of the mass a closed node at binary depth `depth` contributes.
pub fn closed_exponent(depth: usize) -> f64 {
    -(depth as f64 + 1.0)
}

/// log2 P recomputed from scratch over the closed entries of a branch.
pub fn recompute_log2_mass(entries: &[BranchEntry]) -> f64 {
    log2_sum(entries.iter().enumerate().filter(|(_, e)| e.closed).map(|(d, _)| closed_exponent(d)))
}

/// The leaf-weighted estimate computed term by term over a leaf-depth multiset:
/// `sum 2^-d (2^(d+1) - 1) / sum 2^-d`.
pub fn direct_estimate(depths: &[usize]) -> TreeSizeEstimate {
    assert!(!depths.is_empty(), "direct estimate needs at least one leaf");
    let numerator = log2_sum(depths.iter().map(|&d| -(d as f64) + log2_minus_one(d as f64 + 1.0)));
    let denominator = log2_sum(depths.iter().map(|&d| -(d as f64)));
    TreeSizeEstimate::from_log2(numerator - denominator)
}

/// Should the estimate be refreshed? Estimating every `d` conflicts keeps the
/// O(d) cost of reading the branch amortised O(1).
pub fn sampling_gate(conflicts_since_last_estimate: u64, last_depth: usize) -> bool {
    conflicts_since_last_estimate >= last_depth.max(1) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub log2_total_conflicts: f64,
    /// First restart whose limit covers the estimated tree; `None` without restarts.
    pub restart_index_needed: Option<u32>,
}

/// Conflicts needed to explore a proper binary tree of `2^log2_nodes` nodes:
/// `ceil((T - 1) / 2)`, as log2.
pub fn log2_conflicts_for_tree(log2_nodes: f64) -> f64 {
    if log2_nodes >= 52.0 {
        return log2_nodes - 1.0;
    }
    let nodes = log2_nodes.exp2();
    let conflicts = ((nodes - 1.0) / 2.0 - 1e-9).ceil().max(1.0);
    conflicts.log2()
}

/// Projects the total conflicts of the run: conflicts of the restarts before
/// the first restart big enough for the estimated tree, plus the tree itself.
/// `per_restart_conflicts` holds the actual counts of restarts `0..=current_restart`.
pub fn estimate_total_cost(
    tree: &TreeSizeEstimate,
    cfg: &SolverConfig,
    per_restart_conflicts: &[u64],
    current_restart: u32,
) -> CostEstimate {
    let current = current_restart as usize;
    let past: u64 = per_restart_conflicts.iter().take(current).sum();
    let spent = past + per_restart_conflicts.get(current).copied().unwrap_or(0);
    let log2_tree = log2_conflicts_for_tree(tree.log2_size);

    let (log2_total, needed) = if !cfg.restarts {
        (log2_tree, None)
    } else if log2_tree < 50.0 {
        let tree_conflicts = log2_tree.exp2().round() as u64;
        let mut m = current_restart;
        let mut before = past;
        while restart_schedule(cfg, m) < tree_conflicts {
            before += restart_schedule(cfg, m);
            m += 1;
        }
        (((before + tree_conflicts) as f64).log2(), Some(m))
    } else {
        // Past 2^50 the integer rounding of limits is immaterial: use the
        // closed-form geometric series in log2.
        let g = cfg.restart_factor;
        let log2_base = (cfg.restart_base as f64).log2();
        let m = ((log2_tree - log2_base) / g.log2()).ceil().max(current as f64);
        // sum_{i=current}^{m-1} base g^i = base (g^m - g^current) / (g - 1)
        let log2_series = log2_base + log2_sub(m * g.log2(), current as f64 * g.log2()) - (g - 1.0).log2();
        let total = log2_add(log2_add(log2_series, log2_tree), (past.max(1) as f64).log2());
        (total, Some(m.min(u32::MAX as f64) as u32))
    };
    let floor = (spent.max(1) as f64).log2();
    CostEstimate { log2_total_conflicts: log2_total.max(floor), restart_index_needed: needed }
}

/// One row of the estimate stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// Conflicts since the start of the solve.
    pub conflict_index: u64,
    pub log2_tree_size: Option<f64>,
    pub log2_total_cost: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::solver::SearchEvent;
    use crate::treetrace::oracle::{build_explicit_tree, exhaustive_trace, random_trace, random_tree, OracleBuilder};
    use crate::treetrace::{TreeStep, TreeTracker};
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// Runs the tracker and estimator over a trace, calling `check` after every conflict's resolution.
    fn replay(events: &[SearchEvent], mut check: impl FnMut(&WbeState, &TreeTracker, &OracleBuilder)) -> WbeState {
        let mut tracker = TreeTracker::new();
        let mut oracle = OracleBuilder::new();
        let mut wbe = WbeState::new();
        for e in events {
            oracle.push(e).unwrap();
            match tracker.step(e).unwrap() {
                TreeStep::Backjump(s) => {
                    wbe.observe(&s).unwrap();
                    check(&wbe, &tracker, &oracle);
                }
                TreeStep::Exhausted => {
                    wbe.observe_exhausted();
                    check(&wbe, &tracker, &oracle);
                }
                TreeStep::Restart => wbe.reset(),
                _ => {}
            }
        }
        wbe
    }

    fn decide(level: u32) -> SearchEvent {
        SearchEvent::Decide { level, literal: level as i64 }
    }
    fn conflict(level: u32) -> SearchEvent {
        SearchEvent::Conflict { level, conflict_clause_size: 2, learnt_clause_size: 2, assigned_before: 0 }
    }
    fn backjump(from: u32, to: u32) -> SearchEvent {
        SearchEvent::Backjump { from_level: from, to_level: to, assigned_after: 0 }
    }

    #[test]
    fn first_conflict_at_depth_three() {
        let events = vec![decide(1), decide(2), decide(3), conflict(3), backjump(3, 2)];
        let wbe = replay(&events, |_, _, _| {});
        assert_eq!(wbe.node_counter(), 2);
        assert_eq!(wbe.log2_mass(), -3.0);
        assert_eq!(wbe.estimate_tree_size().unwrap().exact_size, Some(15));
    }

    #[test]
    fn complete_depth_two_tree() {
        let events = vec![
            decide(1), decide(2), conflict(2), backjump(2, 1),
            conflict(1), backjump(1, 0),
            decide(1), conflict(1), backjump(1, 0),
        ];
        let wbe = replay(&events, |_, _, _| {});
        assert_eq!(wbe.node_counter(), 6);
        assert!((wbe.log2_mass() - 0.75f64.log2()).abs() < 1e-15);
        assert_eq!(wbe.estimate_tree_size().unwrap().exact_size, Some(7));

        let mut all = events.clone();
        all.extend([conflict(0), SearchEvent::Solved { status: crate::solver::Status::Unsat }]);
        let wbe = replay(&all, |_, _, _| {});
        assert_eq!(wbe.node_counter(), 8);
        assert_eq!(wbe.estimate_tree_size().unwrap().exact_size, Some(7));
    }

    #[test]
    fn backjump_swaps_deep_mass_for_shallow() {
        // Closed entry at depth 5, then a jump that closes the node at depth 1.
        let mut events = Vec::new();
        events.extend((1..=6).map(decide));
        events.extend([conflict(6), backjump(6, 5)]); // closes depth 5
        events.extend([decide(6), conflict(6)]);
        let before = replay(&events, |_, _, _| {}).log2_mass();
        assert_eq!(before, -6.0);
        events.push(backjump(6, 1)); // closes the level-2 node at depth 1
        let after = replay(&events, |_, _, _| {}).log2_mass();
        let expected = (2f64.powi(-6) - 2f64.powi(-6) + 2f64.powi(-2)).log2();
        assert!((after - expected).abs() < 1e-15);
    }

    #[test]
    fn desync_is_reported() {
        let mut wbe = WbeState::new();
        let s = BackjumpSummary { leaf_depth: 4, target_depth: 1, popped_closed_depths: vec![2], completed: vec![] };
        assert!(matches!(wbe.observe(&s), Err(WbeError::MassDesync { .. })));
    }

    #[test]
    fn no_estimate_before_first_conflict() {
        assert_eq!(WbeState::new().estimate_tree_size(), None);
    }

    #[test]
    fn direct_estimate_examples() {
        assert_eq!(direct_estimate(&[3]).exact_size, Some(15));
        assert_eq!(direct_estimate(&[1, 1]).exact_size, Some(3));
        assert_eq!(direct_estimate(&[2, 2, 2]).exact_size, Some(7));
        assert!((direct_estimate(&[2, 2, 2]).log2_size - 7f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn cost_without_restarts_is_tree_conflicts() {
        let tree = TreeSizeEstimate::from_log2(801f64.log2());
        let est = estimate_total_cost(&tree, &SolverConfig::no_restarts(), &[10], 0);
        assert!((est.log2_total_conflicts - 400f64.log2()).abs() < 1e-12);
        assert_eq!(est.restart_index_needed, None);
    }

    #[test]
    fn cost_waits_for_big_enough_restart() {
        // 801 nodes need 400 conflicts; limits 100, 150, 225, 338, 506.
        let tree = TreeSizeEstimate::from_log2(801f64.log2());
        let est = estimate_total_cost(&tree, &SolverConfig::default(), &[40], 0);
        assert_eq!(est.restart_index_needed, Some(4));
        assert!((est.log2_total_conflicts - 1213f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn cost_fits_in_current_restart() {
        let tree = TreeSizeEstimate::from_log2(101f64.log2()); // 50 conflicts
        let est = estimate_total_cost(&tree, &SolverConfig::default(), &[100, 150, 20], 2);
        assert_eq!(est.restart_index_needed, Some(2));
        assert!((est.log2_total_conflicts - 300f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn cost_never_below_spent() {
        let tree = TreeSizeEstimate::from_log2(3f64.log2());
        let est = estimate_total_cost(&tree, &SolverConfig::default(), &[100, 150, 200], 2);
        assert!(est.log2_total_conflicts >= 450f64.log2());
    }

    #[test]
    fn cost_of_astronomical_tree_is_finite() {
        let tree = TreeSizeEstimate::from_log2(2001.0);
        let est = estimate_total_cost(&tree, &SolverConfig::default(), &[100, 150], 1);
        assert!(est.log2_total_conflicts.is_finite());
        assert!(est.log2_total_conflicts > 2000.0 && est.log2_total_conflicts < 2003.0);
        let est = estimate_total_cost(&tree, &SolverConfig::no_restarts(), &[5], 0);
        assert_eq!(est.log2_total_conflicts, 2000.0);
    }

    #[test]
    fn gate() {
        assert!(!sampling_gate(49, 50));
        assert!(sampling_gate(50, 50));
        assert!(sampling_gate(1, 0));
        assert!(!sampling_gate(0, 0));
    }

    #[test]
    fn deep_branch_stays_finite() {
        let mut events: Vec<SearchEvent> = (1..=2000).map(decide).collect();
        events.extend([conflict(2000), backjump(2000, 1999)]);
        let wbe = replay(&events, |_, _, _| {});
        let est = wbe.estimate_tree_size().unwrap();
        assert!(est.log2_size.is_finite());
        assert!((est.log2_size - 2001.0).abs() < 1e-9);
        assert_eq!(est.exact_size, None);
    }

    proptest! {
        #[test]
        fn equals_direct_estimate_on_any_trace(seed: u64, chronological: bool, max_level in 1u32..60) {
            let mut rng = SeededRng::seed_from_u64(seed);
            let events = random_trace(&mut rng, max_level, 400, chronological);
            replay(&events, |wbe, tracker, oracle| {
                let depths = oracle.tree().leaf_depths();
                let direct = direct_estimate(&depths);
                let incremental = wbe.estimate_tree_size().unwrap();
                if !wbe.is_complete() {
                    assert!((incremental.log2_size - direct.log2_size).abs() < 1e-9,
                        "incremental {} vs direct {}", incremental.log2_size, direct.log2_size);
                    let mass = log2_sum(depths.iter().map(|&d| -(d as f64)));
                    assert!((wbe.log2_mass() - mass).abs() < 1e-9);
                }
                let fresh = recompute_log2_mass(tracker.branch().entries());
                if !wbe.is_complete() {
                    assert!((wbe.log2_mass() - fresh).abs() < 1e-9);
                }
                assert!(wbe.log2_mass() <= 1e-12);
                assert!(incremental.log2_size >= 0.0);
            });
        }

        #[test]
        fn exhaustive_exploration_is_exact(seed: u64) {
            let mut rng = SeededRng::seed_from_u64(seed);
            let shape = random_tree(&mut rng, 0.62, 11);
            let events = exhaustive_trace(&shape);
            let wbe = replay(&events, |_, _, _| {});
            prop_assert_eq!(wbe.estimate_tree_size().unwrap().exact_size, Some(shape.num_nodes()));
            prop_assert_eq!(build_explicit_tree(&events).unwrap().current().num_nodes() as u64, shape.num_nodes());
        }

        #[test]
        fn cost_floor(log2_tree in 0.0f64..3000.0, spent in proptest::collection::vec(0u64..5000, 1..12), restarts: bool) {
            let cfg = if restarts { SolverConfig::default() } else { SolverConfig::no_restarts() };
            let current = spent.len() as u32 - 1;
            let est = estimate_total_cost(&TreeSizeEstimate::from_log2(log2_tree), &cfg, &spent, current);
            let total: u64 = spent.iter().sum();
            prop_assert!(est.log2_total_conflicts.is_finite());
            prop_assert!(est.log2_total_conflicts >= (total.max(1) as f64).log2() - 1e-12);
        }
    }
}
