//! Proper-binary-tree view of a CDCL search.
//!
//! Each decision opens a binary node whose left child is the subtree below
//! the decision. A backjump to level `L` closes the left child of the
//! level-`L + 1` decision node and continues in its right child, even if the
//! next decision reuses level `L + 1`. Unclosed decision nodes deeper than the
//! target are backjumped over and spliced out (replaced by their left child),
//! and closed nodes deeper than the target are subsumed by it.
//!
//! [`BranchState`] tracks only the current branch (one entry per binary
//! node on it), which is all the estimators need. [`oracle`] builds the full
//! explicit tree for testing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{SearchEvent, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchEntry {
    /// Level of the decision that created the node; once closed, the level its
    /// right branch lives at.
    pub decision_level: u32,
    /// The left child has been fully explored.
    pub closed: bool,
    /// Leaf count when the node was opened (or, once closed, when it closed).
    pub stamp: u64,
}

/// A subtree that has been completely explored, with its size in leaves (conflicts).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompletedSubtree {
    /// Binary depth of the node owning the subtree as a child.
    pub parent_depth: usize,
    pub leaves: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackjumpSummary {
    pub leaf_depth: usize,
    pub target_depth: usize,
    pub popped_closed_depths: Vec<usize>,
    /// Subtrees finished by this backjump; not part of the oracle comparison.
    pub completed: Vec<CompletedSubtree>,
}

impl BackjumpSummary {
    /// The fields the explicit-tree oracle reproduces.
    pub fn shape(&self) -> (usize, usize, &[usize]) {
        (self.leaf_depth, self.target_depth, &self.popped_closed_depths)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("backjump to level {to_level} has no open decision at level {}", to_level + 1)]
    MissingTarget { to_level: u32 },
    #[error("decision at level {got} does not follow level {current}")]
    LevelSkip { got: u32, current: u32 },
    #[error("backjump without a preceding conflict")]
    BackjumpWithoutConflict,
}

/// The current branch of the binary tree.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BranchState {
    stack: Vec<BranchEntry>,
    leaves: u64,
    level: u32,
}

impl BranchState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[BranchEntry] {
        &self.stack
    }

    pub fn binary_depth(&self) -> usize {
        self.stack.len()
    }

    /// Conflicts seen in the current tree.
    pub fn leaves(&self) -> u64 {
        self.leaves
    }

    pub fn on_decide(&mut self, level: u32) -> Result<(), TraceError> {
        if level != self.level + 1 {
            return Err(TraceError::LevelSkip { got: level, current: self.level });
        }
        self.level = level;
        self.stack.push(BranchEntry { decision_level: level, closed: false, stamp: self.leaves });
        Ok(())
    }

    /// Registers the leaf of a conflict. Must precede `on_backjump` / `on_exhausted`.
    pub fn on_conflict(&mut self) -> usize {
        self.leaves += 1;
        self.stack.len()
    }

    pub fn on_backjump(&mut self, to_level: u32) -> Result<BackjumpSummary, TraceError> {
        let leaf_depth = self.stack.len();
        // Levels are non-decreasing along the branch, and exactly one unclosed
        // entry exists per live decision level.
        let target = self
            .stack
            .iter()
            .position(|e| e.decision_level > to_level)
            .filter(|&i| !self.stack[i].closed && self.stack[i].decision_level == to_level + 1)
            .ok_or(TraceError::MissingTarget { to_level })?;
        let mut popped_closed_depths = Vec::new();
        let mut completed = Vec::new();
        for depth in (target + 1..self.stack.len()).rev() {
            let entry = self.stack[depth];
            if entry.closed {
                popped_closed_depths.push(depth);
                completed.push(CompletedSubtree { parent_depth: depth, leaves: self.leaves - entry.stamp });
            }
        }
        popped_closed_depths.reverse();
        completed.reverse();
        self.stack.truncate(target + 1);
        let node = &mut self.stack[target];
        completed.push(CompletedSubtree { parent_depth: target, leaves: self.leaves - node.stamp });
        node.closed = true;
        node.decision_level = to_level;
        node.stamp = self.leaves;
        self.level = to_level;
        Ok(BackjumpSummary { leaf_depth, target_depth: target, popped_closed_depths, completed })
    }

    /// Conflict at the root: the whole tree has been explored.
    pub fn on_exhausted(&mut self) {
        self.stack.clear();
        self.level = 0;
    }

    pub fn on_restart(&mut self) {
        self.stack.clear();
        self.leaves = 0;
        self.level = 0;
    }
}

/// What a single event did to the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeStep {
    None,
    Decide { depth: usize },
    Conflict { leaf_depth: usize },
    Backjump(BackjumpSummary),
    /// The conflict just reported closed the root: the tree is complete.
    Exhausted,
    Restart,
}

/// Event-stream driver for a [`BranchState`].
#[derive(Clone, Debug, Default)]
pub struct TreeTracker {
    branch: BranchState,
    pending_conflict: bool,
}

impl TreeTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn branch(&self) -> &BranchState {
        &self.branch
    }

    pub fn step(&mut self, event: &SearchEvent) -> Result<TreeStep, TraceError> {
        Ok(match event {
            SearchEvent::Decide { level, .. } => {
                self.branch.on_decide(*level)?;
                TreeStep::Decide { depth: self.branch.binary_depth() }
            }
            SearchEvent::Conflict { .. } => {
                self.pending_conflict = true;
                TreeStep::Conflict { leaf_depth: self.branch.on_conflict() }
            }
            SearchEvent::Backjump { to_level, .. } => {
                if !std::mem::take(&mut self.pending_conflict) {
                    return Err(TraceError::BackjumpWithoutConflict);
                }
                TreeStep::Backjump(self.branch.on_backjump(*to_level)?)
            }
            SearchEvent::Solved { status: Status::Unsat } if self.pending_conflict => {
                self.pending_conflict = false;
                self.branch.on_exhausted();
                TreeStep::Exhausted
            }
            SearchEvent::Restart { .. } => {
                self.branch.on_restart();
                TreeStep::Restart
            }
            _ => TreeStep::None,
        })
    }
}

/// Replays a recorded trace and returns every backjump summary.
pub fn summaries(events: &[SearchEvent]) -> Result<Vec<BackjumpSummary>, TraceError> {
    let mut tracker = TreeTracker::new();
    let mut out = Vec::new();
    for e in events {
        if let TreeStep::Backjump(s) = tracker.step(e)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Explicit search trees and synthetic traces, used as test oracles.
pub mod oracle {
    use std::collections::BTreeMap;

    use rand::Rng;

    use super::TraceError;
    use crate::solver::{SearchEvent, Status};

    #[derive(Clone, Debug, PartialEq, Eq)]
    enum Kind {
        Internal,
        Leaf,
    }

    #[derive(Clone, Debug)]
    struct Node {
        parent: Option<usize>,
        children: [Option<usize>; 2],
        kind: Kind,
        removed: bool,
    }

    /// The full binary tree of one restart, built node by node.
    #[derive(Clone, Debug, Default)]
    pub struct ExplicitTree {
        nodes: Vec<Node>,
        root: Option<usize>,
        /// Where the next node attaches: parent and side (0 = left, 1 = right).
        slot: Option<(usize, usize)>,
        decisions: BTreeMap<u32, usize>,
        closed: Vec<bool>,
        leaves: Vec<usize>,
        complete: bool,
    }

    /// Per-backjump shape, comparable with [`super::BackjumpSummary::shape`].
    pub type Shape = (usize, usize, Vec<usize>);

    impl ExplicitTree {
        fn attach(&mut self, kind: Kind) -> usize {
            let id = self.nodes.len();
            let parent = self.slot.map(|(p, _)| p);
            self.nodes.push(Node { parent, children: [None, None], kind, removed: false });
            self.closed.push(false);
            match self.slot {
                Some((p, side)) => {
                    assert!(self.nodes[p].children[side].is_none(), "slot already occupied");
                    self.nodes[p].children[side] = Some(id);
                }
                None => {
                    assert!(self.root.is_none(), "second root");
                    self.root = Some(id);
                }
            }
            id
        }

        pub fn depth(&self, mut id: usize) -> usize {
            let mut d = 0;
            while let Some(p) = self.nodes[id].parent {
                d += 1;
                id = p;
            }
            d
        }

        fn decide(&mut self, level: u32) {
            let id = self.attach(Kind::Internal);
            self.decisions.insert(level, id);
            self.slot = Some((id, 0));
        }

        fn conflict(&mut self) -> usize {
            let id = self.attach(Kind::Leaf);
            self.leaves.push(id);
            id
        }

        fn backjump(&mut self, leaf: usize, to_level: u32) -> Result<Shape, TraceError> {
            let target = *self.decisions.get(&(to_level + 1)).ok_or(TraceError::MissingTarget { to_level })?;
            let leaf_depth = self.depth(leaf);
            let doomed: Vec<usize> = self.decisions.range(to_level + 2..).map(|(_, &id)| id).collect();
            let mut popped_closed = Vec::new();
            let mut cursor = self.nodes[leaf].parent;
            while let Some(id) = cursor {
                if id == target {
                    break;
                }
                if self.closed[id] {
                    popped_closed.push(self.depth(id));
                } else {
                    assert!(doomed.contains(&id), "open node on branch that is not a live decision");
                }
                cursor = self.nodes[id].parent;
            }
            assert_eq!(cursor, Some(target), "target is not an ancestor of the leaf");
            popped_closed.reverse();
            for id in doomed {
                self.splice(id);
            }
            let target_depth = self.depth(target);
            self.closed[target] = true;
            self.decisions.retain(|&l, _| l <= to_level);
            self.slot = Some((target, 1));
            Ok((leaf_depth, target_depth, popped_closed))
        }

        /// Replaces a node that never opened its right child by its left child.
        fn splice(&mut self, id: usize) {
            let node = self.nodes[id].clone();
            assert!(node.children[1].is_none(), "spliced node has a right subtree");
            let child = node.children[0].expect("spliced node has a left subtree");
            self.nodes[child].parent = node.parent;
            match node.parent {
                Some(p) => {
                    let side = if self.nodes[p].children[0] == Some(id) { 0 } else { 1 };
                    self.nodes[p].children[side] = Some(child);
                }
                None => self.root = Some(child),
            }
            self.nodes[id].removed = true;
        }

        /// Leaf-depth multiset of the tree as it stands.
        pub fn leaf_depths(&self) -> Vec<usize> {
            self.leaves.iter().map(|&l| self.depth(l)).collect()
        }

        pub fn num_leaves(&self) -> usize {
            self.leaves.len()
        }

        pub fn num_nodes(&self) -> usize {
            self.nodes.iter().filter(|n| !n.removed).count()
        }

        pub fn is_complete(&self) -> bool {
            self.complete
        }

        /// True when every live internal node has two children.
        pub fn is_proper(&self) -> bool {
            self.nodes.iter().filter(|n| !n.removed && n.kind == Kind::Internal).all(|n| n.children.iter().all(Option::is_some))
        }
    }

    /// Result of replaying a trace through the oracle.
    #[derive(Clone, Debug, Default)]
    pub struct OracleReplay {
        /// The tree of every restart, last one being current.
        pub trees: Vec<ExplicitTree>,
        pub shapes: Vec<Shape>,
    }

    impl OracleReplay {
        pub fn current(&self) -> &ExplicitTree {
            self.trees.last().expect("at least one tree")
        }
    }

    /// Streaming oracle: feed events one by one and inspect the tree between them.
    #[derive(Clone, Debug)]
    pub struct OracleBuilder {
        replay: OracleReplay,
        pending_leaf: Option<usize>,
    }

    impl Default for OracleBuilder {
        fn default() -> Self {
            OracleBuilder { replay: OracleReplay { trees: vec![ExplicitTree::default()], shapes: Vec::new() }, pending_leaf: None }
        }
    }

    impl OracleBuilder {
        pub fn new() -> Self {
            Self::default()
        }

        pub fn tree(&self) -> &ExplicitTree {
            self.replay.current()
        }

        pub fn push(&mut self, event: &SearchEvent) -> Result<(), TraceError> {
            let tree = self.replay.trees.last_mut().expect("tree");
            match event {
                SearchEvent::Decide { level, .. } => tree.decide(*level),
                SearchEvent::Conflict { .. } => self.pending_leaf = Some(tree.conflict()),
                SearchEvent::Backjump { to_level, .. } => {
                    let leaf = self.pending_leaf.take().ok_or(TraceError::BackjumpWithoutConflict)?;
                    let shape = tree.backjump(leaf, *to_level)?;
                    self.replay.shapes.push(shape);
                }
                SearchEvent::Solved { status: Status::Unsat } if self.pending_leaf.is_some() => {
                    self.pending_leaf = None;
                    tree.complete = true;
                }
                SearchEvent::Restart { .. } => {
                    if tree.nodes.is_empty() {
                        return Ok(());
                    }
                    self.replay.trees.push(ExplicitTree::default());
                }
                _ => {}
            }
            Ok(())
        }

        pub fn finish(self) -> OracleReplay {
            self.replay
        }
    }

    pub fn build_explicit_tree(events: &[SearchEvent]) -> Result<OracleReplay, TraceError> {
        let mut builder = OracleBuilder::new();
        for e in events {
            builder.push(e)?;
        }
        Ok(builder.finish())
    }

    /// A proper binary tree given as nested shape.
    #[derive(Clone, Debug, PartialEq, Eq)]
    pub enum TreeShape {
        Leaf,
        Node(Box<TreeShape>, Box<TreeShape>),
    }

    impl TreeShape {
        pub fn num_nodes(&self) -> u64 {
            match self {
                TreeShape::Leaf => 1,
                TreeShape::Node(l, r) => 1 + l.num_nodes() + r.num_nodes(),
            }
        }

        pub fn depth(&self) -> usize {
            match self {
                TreeShape::Leaf => 0,
                TreeShape::Node(l, r) => 1 + l.depth().max(r.depth()),
            }
        }

        /// Uniformly random root-to-leaf probe: returns the leaf depth.
        pub fn probe<R: Rng>(&self, rng: &mut R) -> usize {
            let mut node = self;
            let mut d = 0;
            while let TreeShape::Node(l, r) = node {
                node = if rng.random_bool(0.5) { l } else { r };
                d += 1;
            }
            d
        }
    }

    /// Random proper binary tree: a node at depth `d` is internal with
    /// probability `p_internal` while `d < max_depth`.
    pub fn random_tree<R: Rng>(rng: &mut R, p_internal: f64, max_depth: usize) -> TreeShape {
        fn grow<R: Rng>(rng: &mut R, p: f64, depth: usize, max_depth: usize) -> TreeShape {
            if depth < max_depth && (depth == 0 || rng.random_bool(p)) {
                TreeShape::Node(Box::new(grow(rng, p, depth + 1, max_depth)), Box::new(grow(rng, p, depth + 1, max_depth)))
            } else {
                TreeShape::Leaf
            }
        }
        grow(rng, p_internal, 0, max_depth)
    }

    /// The chronological DPLL trace that explores `tree` exhaustively.
    pub fn exhaustive_trace(tree: &TreeShape) -> Vec<SearchEvent> {
        fn visit(node: &TreeShape, level: u32, var: &mut i64, out: &mut Vec<SearchEvent>) {
            match node {
                TreeShape::Leaf => out.push(SearchEvent::Conflict {
                    level,
                    conflict_clause_size: 2,
                    learnt_clause_size: 1,
                    assigned_before: level,
                }),
                TreeShape::Node(l, r) => {
                    *var += 1;
                    out.push(SearchEvent::Decide { level: level + 1, literal: -*var });
                    visit(l, level + 1, var, out);
                    out.push(SearchEvent::Backjump { from_level: level + 1, to_level: level, assigned_after: level });
                    visit(r, level, var, out);
                }
            }
        }
        let mut out = vec![SearchEvent::Restart { index: 0, conflict_limit: None }];
        let mut var = 0;
        visit(tree, 0, &mut var, &mut out);
        out.push(SearchEvent::Solved { status: Status::Unsat });
        out
    }

    /// Random search trace with at most `max_conflicts` conflicts and decision
    /// levels capped at `max_level`. With `chronological`, every backjump goes
    /// exactly one level up; otherwise the target level is random.
    pub fn random_trace<R: Rng>(rng: &mut R, max_level: u32, max_conflicts: usize, chronological: bool) -> Vec<SearchEvent> {
        let mut out = vec![SearchEvent::Restart { index: 0, conflict_limit: None }];
        let mut level = 0u32;
        let mut conflicts = 0;
        let mut var = 0i64;
        // Bias towards deeper decisions early so traces reach interesting depths.
        let p_decide = 0.55 + 0.4 * rng.random::<f64>();
        loop {
            let decide = level < max_level && (level == 0 && conflicts == 0 || rng.random_bool(p_decide));
            if decide {
                level += 1;
                var += 1;
                out.push(SearchEvent::Decide { level, literal: var });
                continue;
            }
            out.push(SearchEvent::Conflict {
                level,
                conflict_clause_size: 3,
                learnt_clause_size: 2,
                assigned_before: level,
            });
            conflicts += 1;
            if level == 0 {
                out.push(SearchEvent::Solved { status: Status::Unsat });
                return out;
            }
            let to = if chronological || rng.random_bool(0.5) { level - 1 } else { rng.random_range(0..level) };
            out.push(SearchEvent::Backjump { from_level: level, to_level: to, assigned_after: to });
            level = to;
            if conflicts >= max_conflicts {
                out.push(SearchEvent::Solved { status: Status::Sat });
                return out;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::cnf::{generate_random_ksat, GeneratorConfig};
    use crate::rng::SeededRng;
    use crate::solver::{solve, EventLog, SolverConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;

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
    fn decisions_deepen_branch() {
        let mut b = BranchState::new();
        b.on_decide(1).unwrap();
        assert_eq!(b.binary_depth(), 1);
        b.on_decide(2).unwrap();
        b.on_decide(3).unwrap();
        b.on_decide(4).unwrap();
        assert_eq!(b.binary_depth(), 4);
        assert_eq!(b.on_decide(6), Err(TraceError::LevelSkip { got: 6, current: 4 }));
    }

    #[test]
    fn chronological_backtrack() {
        let mut b = BranchState::new();
        for l in 1..=3 {
            b.on_decide(l).unwrap();
        }
        b.on_conflict();
        let s = b.on_backjump(2).unwrap();
        assert_eq!(s.shape(), (3, 2, &[][..]));
    }

    #[test]
    fn decide_after_backjump_continues_right_branch() {
        let mut b = BranchState::new();
        for l in 1..=3 {
            b.on_decide(l).unwrap();
        }
        b.on_conflict();
        let s = b.on_backjump(2).unwrap();
        b.on_decide(3).unwrap();
        assert_eq!(b.binary_depth(), s.target_depth + 2);
    }

    #[test]
    fn backjumped_decisions_are_spliced() {
        // Decisions at levels 1..=5, conflict, jump to level 1: levels 3..=5 are backjumped over.
        let mut events = vec![SearchEvent::Restart { index: 0, conflict_limit: None }];
        events.extend((1..=5).map(decide));
        events.push(conflict(5));
        events.push(backjump(5, 1));
        events.push(decide(2));
        events.push(conflict(2));
        events.push(backjump(2, 1));
        let s = summaries(&events).unwrap();
        assert_eq!(s[0].shape(), (5, 1, &[][..]));
        // Spliced nodes contribute no depth: the next leaf sits right below the chain.
        assert_eq!(s[1].shape(), (3, 2, &[][..]));
        let replay = build_explicit_tree(&events).unwrap();
        assert_eq!(replay.current().leaf_depths(), vec![2, 3]);
    }

    #[test]
    fn repeated_backjumps_to_same_level_build_a_chain() {
        let mut events = vec![decide(1), decide(2), conflict(2), backjump(2, 1)];
        events.extend([decide(2), conflict(2), backjump(2, 1)]);
        let s = summaries(&events).unwrap();
        assert_eq!(s[0].target_depth, 1);
        assert_eq!(s[1].target_depth, 2);
        let replay = build_explicit_tree(&events).unwrap();
        let shapes: Vec<_> = s.iter().map(|x| (x.leaf_depth, x.target_depth, x.popped_closed_depths.clone())).collect();
        assert_eq!(shapes, replay.shapes);
    }

    #[test]
    fn closed_entries_popped_by_backjump() {
        let events = vec![decide(1), decide(2), decide(3), conflict(3), backjump(3, 2), decide(3), conflict(3), backjump(3, 1)];
        let s = summaries(&events).unwrap();
        assert_eq!(s[1].shape(), (4, 1, &[2][..]));
        assert_eq!(s[1].completed.iter().map(|c| (c.parent_depth, c.leaves)).collect::<Vec<_>>(), vec![(2, 1), (1, 2)]);
    }

    #[test]
    fn restart_clears_branch() {
        let mut t = TreeTracker::new();
        for l in 1..=7 {
            t.step(&decide(l)).unwrap();
        }
        assert_eq!(t.branch().binary_depth(), 7);
        t.step(&SearchEvent::Restart { index: 1, conflict_limit: Some(150) }).unwrap();
        assert_eq!(t.branch().binary_depth(), 0);
        t.step(&SearchEvent::Restart { index: 2, conflict_limit: Some(225) }).unwrap();
        assert_eq!(t.branch().binary_depth(), 0);
        t.step(&decide(1)).unwrap();
        assert_eq!(t.step(&conflict(1)).unwrap(), TreeStep::Conflict { leaf_depth: 1 });
    }

    #[test]
    fn missing_target_is_desync() {
        let mut b = BranchState::new();
        b.on_decide(1).unwrap();
        b.on_conflict();
        assert_eq!(b.on_backjump(3), Err(TraceError::MissingTarget { to_level: 3 }));
    }

    #[test]
    fn complete_depth_two_tree() {
        let tree = TreeShape::Node(
            Box::new(TreeShape::Node(Box::new(TreeShape::Leaf), Box::new(TreeShape::Leaf))),
            Box::new(TreeShape::Node(Box::new(TreeShape::Leaf), Box::new(TreeShape::Leaf))),
        );
        let replay = build_explicit_tree(&exhaustive_trace(&tree)).unwrap();
        let t = replay.current();
        assert_eq!(t.leaf_depths(), vec![2, 2, 2, 2]);
        assert!(t.is_complete() && t.is_proper());
        assert_eq!(t.num_nodes(), 7);
    }

    #[test]
    fn single_conflict_then_solved() {
        let mut events = vec![SearchEvent::Restart { index: 0, conflict_limit: None }];
        events.extend((1..=4).map(decide));
        events.push(conflict(4));
        events.push(backjump(4, 3));
        events.push(SearchEvent::Solved { status: Status::Sat });
        assert_eq!(build_explicit_tree(&events).unwrap().current().leaf_depths(), vec![4]);
    }

    #[test]
    fn solver_traces_match_oracle() {
        for seed in 0..6 {
            let f = generate_random_ksat(&GeneratorConfig { num_vars: 50, ratio: 4.3, k: 3, seed }).unwrap();
            for cfg in [SolverConfig::no_restarts(), SolverConfig { restart_base: 10, ..SolverConfig::default() }] {
                let mut log = EventLog::default();
                solve(&f, &cfg, &mut log).unwrap();
                let streaming: Vec<Shape> = summaries(&log.0)
                    .unwrap()
                    .into_iter()
                    .map(|s| (s.leaf_depth, s.target_depth, s.popped_closed_depths))
                    .collect();
                let replay = build_explicit_tree(&log.0).unwrap();
                assert_eq!(streaming, replay.shapes);
                // Binary depth never falls below the decision level.
                let mut t = TreeTracker::new();
                let mut level = 0;
                for e in &log.0 {
                    t.step(e).unwrap();
                    match e {
                        SearchEvent::Decide { level: l, .. } => level = *l,
                        SearchEvent::Backjump { to_level, .. } => level = *to_level,
                        SearchEvent::Restart { .. } => level = 0,
                        _ => {}
                    }
                    assert!(t.branch().binary_depth() >= level as usize);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn streaming_equals_oracle(seed: u64, chronological: bool, max_level in 1u32..40) {
            let mut rng = SeededRng::seed_from_u64(seed);
            let events = random_trace(&mut rng, max_level, 300, chronological);
            let streaming: Vec<Shape> = summaries(&events).unwrap().into_iter()
                .map(|s| (s.leaf_depth, s.target_depth, s.popped_closed_depths)).collect();
            let replay = build_explicit_tree(&events).unwrap();
            prop_assert_eq!(&streaming, &replay.shapes);
            if chronological {
                // No splices: everything between the leaf and the target was closed.
                prop_assert!(streaming.iter().all(|s| s.0 - s.1 - 1 == s.2.len()));
            }
        }

        #[test]
        fn exhaustive_traces_give_proper_trees(seed: u64) {
            let mut rng = SeededRng::seed_from_u64(seed);
            let shape = random_tree(&mut rng, 0.6, 9);
            let replay = build_explicit_tree(&exhaustive_trace(&shape)).unwrap();
            let t = replay.current();
            prop_assert!(t.is_complete() && t.is_proper());
            prop_assert_eq!(t.num_nodes() as u64, shape.num_nodes());
            prop_assert_eq!(t.num_leaves() as u64, (shape.num_nodes() + 1) / 2);
        }
    }
}
