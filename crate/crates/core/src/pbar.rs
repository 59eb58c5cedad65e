//! A Progress-Bar-like historical estimator.
//!
//! Every completed subtree is recorded under the binary depth of its parent
//! node, as an exponentially weighted mean of sizes in conflicts. The
//! remaining work is the sum, over the still-unexplored right children on the
//! current branch, of the mean size seen at that depth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::treetrace::{BranchEntry, CompletedSubtree};

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMean {
    pub mean: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthHistory {
    alpha: f64,
    depths: BTreeMap<usize, DepthMean>,
}

impl Default for DepthHistory {
    fn default() -> Self {
        DepthHistory::new(DEFAULT_ALPHA)
    }
}

impl DepthHistory {
    /// `alpha` is the weight of the newest observation, in `(0, 1]`.
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        DepthHistory { alpha, depths: BTreeMap::new() }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn on_subtree_closed(&mut self, depth: usize, size: u64) {
        let size = size as f64;
        self.depths
            .entry(depth)
            .and_modify(|m| {
                m.mean = self.alpha * size + (1.0 - self.alpha) * m.mean;
                m.count += 1;
            })
            .or_insert(DepthMean { mean: size, count: 1 });
    }

    pub fn record(&mut self, completed: &[CompletedSubtree]) {
        for c in completed {
            self.on_subtree_closed(c.parent_depth, c.leaves);
        }
    }

    pub fn mean(&self, depth: usize) -> Option<f64> {
        self.depths.get(&depth).map(|m| m.mean)
    }

    pub fn count(&self, depth: usize) -> u64 {
        self.depths.get(&depth).map_or(0, |m| m.count)
    }

    pub fn clear(&mut self) {
        self.depths.clear();
    }

    /// Conflicts left on the current branch, or `None` while some open depth has no history.
    pub fn estimate_remaining(&self, branch: &[BranchEntry]) -> Option<f64> {
        branch
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.closed)
            .map(|(d, _)| self.mean(d))
            .sum()
    }
}

/// Conflicts so far plus the estimated remainder.
pub fn estimate_total(conflicts_so_far: u64, history: &DepthHistory, branch: &[BranchEntry]) -> Option<f64> {
    history.estimate_remaining(branch).map(|r| conflicts_so_far as f64 + r)
}
