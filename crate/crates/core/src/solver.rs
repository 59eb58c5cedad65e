//! A compact CDCL solver: two-watched-literal propagation, first-UIP
//! learning, backjumping to the asserting level, VSIDS branching, geometric
//! restarts and activity-based learnt clause deletion.
//!
//! Every atomic search action is reported to a [`SearchObserver`] as a
//! [`SearchEvent`]; the estimators and feature extractors are built purely
//! on that stream.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{ClauseDbCounts, Formula, Literal};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Conflict limit of the first restart.
    pub restart_base: u64,
    /// Geometric growth of successive restart limits.
    pub restart_factor: f64,
    /// When false the search runs as a single restart with no limit.
    pub restarts: bool,
    pub var_decay: f64,
    /// Learnt clauses kept is `max(cap, original clause count)`; `None` disables deletion.
    pub clause_db_cap: Option<usize>,
    pub polarity_default: bool,
    /// Zero keeps initial activities at 0; any other value jitters them.
    pub seed: u64,
    pub conflict_budget: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restart_base: 100,
            restart_factor: 1.5,
            restarts: true,
            var_decay: 0.95,
            clause_db_cap: Some(0),
            polarity_default: false,
            seed: 0,
            conflict_budget: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("restart_base must be at least 1")]
    RestartBase,
    #[error("restart_factor must be greater than 1, got {0}")]
    RestartFactor(f64),
    #[error("var_decay must lie in (0, 1), got {0}")]
    VarDecay(f64),
}

impl SolverConfig {
    pub fn no_restarts() -> Self {
        SolverConfig { restarts: false, ..SolverConfig::default() }
    }

    pub fn geometric(factor: f64) -> Self {
        SolverConfig { restart_factor: factor, ..SolverConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.restart_base < 1 {
            return Err(ConfigError::RestartBase);
        }
        if !(self.restart_factor > 1.0) {
            return Err(ConfigError::RestartFactor(self.restart_factor));
        }
        if !(self.var_decay > 0.0 && self.var_decay < 1.0) {
            return Err(ConfigError::VarDecay(self.var_decay));
        }
        Ok(())
    }

    /// Conflict limit of restart `index`, or `None` when restarts are off.
    pub fn restart_limit(&self, index: u32) -> Option<u64> {
        self.restarts.then(|| restart_schedule(self, index))
    }
}

/// `round(restart_base * restart_factor^index)`.
pub fn restart_schedule(cfg: &SolverConfig, index: u32) -> u64 {
    (cfg.restart_base as f64 * cfg.restart_factor.powi(index as i32)).round() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Sat,
    Unsat,
    BudgetExhausted,
}

/// One atomic search action, in the order the solver performs them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SearchEvent {
    Decide { level: u32, literal: i64 },
    Propagate { level: u32, literal: i64 },
    /// `level` is the decision level the conflict occurred at.
    Conflict { level: u32, conflict_clause_size: u32, learnt_clause_size: u32, assigned_before: u32 },
    Backjump { from_level: u32, to_level: u32, assigned_after: u32 },
    /// Learnt clauses evicted from the database.
    Reduce { removed: ClauseDbCounts },
    /// Start of restart `index`; emitted once before the first decision as well.
    Restart { index: u32, conflict_limit: Option<u64> },
    Solved { status: Status },
}

pub trait SearchObserver {
    fn on_event(&mut self, event: &SearchEvent);
}

impl<F: FnMut(&SearchEvent)> SearchObserver for F {
    fn on_event(&mut self, event: &SearchEvent) {
        self(event)
    }
}

/// Observer that drops everything.
pub struct NoObserver;

impl SearchObserver for NoObserver {
    fn on_event(&mut self, _: &SearchEvent) {}
}

/// Records every event.
#[derive(Default, Debug, Clone)]
pub struct EventLog(pub Vec<SearchEvent>);

impl SearchObserver for EventLog {
    fn on_event(&mut self, event: &SearchEvent) {
        self.0.push(event.clone());
    }
}

/// Fans one event stream out to several observers.
pub struct Tee<'a>(pub Vec<&'a mut dyn SearchObserver>);

impl SearchObserver for Tee<'_> {
    fn on_event(&mut self, event: &SearchEvent) {
        for obs in self.0.iter_mut() {
            obs.on_event(event);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: Status,
    pub total_conflicts: u64,
    pub total_decisions: u64,
    pub per_restart_conflicts: Vec<u64>,
    pub model: Option<Vec<bool>>,
}

/// Solves `formula` to completion (or budget), streaming events to `observer`.
pub fn solve(formula: &Formula, cfg: &SolverConfig, observer: &mut dyn SearchObserver) -> Result<SolveOutcome, ConfigError> {
    let mut solver = Solver::new(formula, cfg.clone())?;
    match solver.run(None, observer) {
        RunState::Finished(outcome) => Ok(outcome),
        RunState::Paused => unreachable!("no pause point was requested"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunState {
    Finished(SolveOutcome),
    /// Stopped at the requested conflict count; `run` resumes it.
    Paused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Lit(u32);

impl Lit {
    fn new(var: usize, positive: bool) -> Self {
        Lit(((var as u32) << 1) | (!positive) as u32)
    }
    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }
    fn positive(self) -> bool {
        self.0 & 1 == 0
    }
    fn neg(self) -> Self {
        Lit(self.0 ^ 1)
    }
    fn index(self) -> usize {
        self.0 as usize
    }
    fn to_dimacs(self) -> i64 {
        let v = self.var() as i64 + 1;
        if self.positive() {
            v
        } else {
            -v
        }
    }
    fn from_literal(l: Literal) -> Self {
        Lit::new(l.var() as usize - 1, l.is_positive())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Value {
    True,
    False,
    Unassigned,
}

type ClauseRef = u32;

#[derive(Clone, Debug)]
struct StoredClause {
    lits: Vec<Lit>,
    learnt: bool,
    activity: f64,
    deleted: bool,
}

#[derive(Clone, Copy, Debug)]
struct Watcher {
    cref: ClauseRef,
    blocker: Lit,
}

/// Max-heap of variables keyed by activity, ties to the lower index.
#[derive(Clone, Debug, Default)]
struct VarOrder {
    heap: Vec<usize>,
    position: Vec<Option<usize>>,
}

impl VarOrder {
    fn new(num_vars: usize) -> Self {
        VarOrder { heap: Vec::with_capacity(num_vars), position: vec![None; num_vars] }
    }

    fn before(activity: &[f64], a: usize, b: usize) -> bool {
        activity[a] > activity[b] || (activity[a] == activity[b] && a < b)
    }

    fn contains(&self, v: usize) -> bool {
        self.position[v].is_some()
    }

    fn insert(&mut self, v: usize, activity: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.position[v] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, activity);
    }

    fn bumped(&mut self, v: usize, activity: &[f64]) {
        if let Some(pos) = self.position[v] {
            self.sift_up(pos, activity);
        }
    }

    fn pop(&mut self, activity: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.position[top] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last] = Some(0);
            self.sift_down(0, activity);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut pos: usize, activity: &[f64]) {
        let v = self.heap[pos];
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if !Self::before(activity, v, self.heap[parent]) {
                break;
            }
            self.heap[pos] = self.heap[parent];
            self.position[self.heap[pos]] = Some(pos);
            pos = parent;
        }
        self.heap[pos] = v;
        self.position[v] = Some(pos);
    }

    fn sift_down(&mut self, mut pos: usize, activity: &[f64]) {
        let v = self.heap[pos];
        let len = self.heap.len();
        loop {
            let left = 2 * pos + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len && Self::before(activity, self.heap[right], self.heap[left]) { right } else { left };
            if !Self::before(activity, self.heap[child], v) {
                break;
            }
            self.heap[pos] = self.heap[child];
            self.position[self.heap[pos]] = Some(pos);
            pos = child;
        }
        self.heap[pos] = v;
        self.position[v] = Some(pos);
    }
}

const ACTIVITY_LIMIT: f64 = 1e100;
const CLAUSE_DECAY: f64 = 0.999;

/// Resumable solver state for one formula and configuration.
pub struct Solver {
    cfg: SolverConfig,
    clauses: Vec<StoredClause>,
    learnts: Vec<ClauseRef>,
    watches: Vec<Vec<Watcher>>,
    values: Vec<Value>,
    levels: Vec<u32>,
    reasons: Vec<Option<ClauseRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    queue_head: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    order: VarOrder,
    seen: Vec<bool>,
    num_original: usize,
    /// Set while loading when the input is already contradictory at the root.
    root_conflict: Option<u32>,
    started: bool,
    restart_index: u32,
    conflicts_in_restart: u64,
    per_restart_conflicts: Vec<u64>,
    total_conflicts: u64,
    total_decisions: u64,
    finished: Option<SolveOutcome>,
}

impl Solver {
    pub fn new(formula: &Formula, cfg: SolverConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let n = formula.num_vars as usize;
        let mut activity = vec![0.0; n];
        if cfg.seed != 0 {
            let mut rng = SeededRng::seed_from_u64(cfg.seed);
            for a in activity.iter_mut() {
                *a = rng.random::<f64>() * 1e-5;
            }
        }
        let mut solver = Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            values: vec![Value::Unassigned; n],
            levels: vec![0; n],
            reasons: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            queue_head: 0,
            activity,
            var_inc: 1.0,
            cla_inc: 1.0,
            order: VarOrder::new(n),
            seen: vec![false; n],
            num_original: formula.num_clauses(),
            root_conflict: None,
            started: false,
            restart_index: 0,
            conflicts_in_restart: 0,
            per_restart_conflicts: vec![0],
            total_conflicts: 0,
            total_decisions: 0,
            finished: None,
            cfg,
        };
        for v in 0..n {
            solver.order.insert(v, &solver.activity);
        }
        for clause in &formula.clauses {
            solver.add_original(clause.literals());
        }
        Ok(solver)
    }

    fn add_original(&mut self, literals: &[Literal]) {
        if self.root_conflict.is_some() {
            return;
        }
        let mut lits: Vec<Lit> = literals.iter().map(|&l| Lit::from_literal(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return; // tautology
        }
        match lits.len() {
            0 => self.root_conflict = Some(0),
            1 => match self.value(lits[0]) {
                Value::False => self.root_conflict = Some(1),
                Value::True => {}
                Value::Unassigned => self.assign(lits[0], None),
            },
            _ => {
                self.attach(lits, false);
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> ClauseRef {
        let cref = self.clauses.len() as ClauseRef;
        self.watches[lits[0].neg().index()].push(Watcher { cref, blocker: lits[1] });
        self.watches[lits[1].neg().index()].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(StoredClause { lits, learnt, activity: 0.0, deleted: false });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn value(&self, lit: Lit) -> Value {
        match self.values[lit.var()] {
            Value::Unassigned => Value::Unassigned,
            Value::True if lit.positive() => Value::True,
            Value::False if !lit.positive() => Value::True,
            _ => Value::False,
        }
    }

    fn level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn assign(&mut self, lit: Lit, reason: Option<ClauseRef>) {
        let v = lit.var();
        self.values[v] = if lit.positive() { Value::True } else { Value::False };
        self.levels[v] = self.level();
        self.reasons[v] = reason;
        self.trail.push(lit);
    }

    /// Unit propagation. Returns the falsified clause on conflict.
    fn propagate(&mut self, observer: &mut dyn SearchObserver) -> Option<ClauseRef> {
        while self.queue_head < self.trail.len() {
            let p = self.trail[self.queue_head];
            self.queue_head += 1;
            let false_lit = p.neg();
            let mut watchers = std::mem::take(&mut self.watches[p.index()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < watchers.len() {
                let w = watchers[i];
                i += 1;
                if self.value(w.blocker) == Value::True {
                    watchers[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                if self.clauses[cref as usize].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref as usize].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref as usize].lits[0];
                let watcher = Watcher { cref, blocker: first };
                if first != w.blocker && self.value(first) == Value::True {
                    watchers[j] = watcher;
                    j += 1;
                    continue;
                }
                let replacement = {
                    let lits = &self.clauses[cref as usize].lits;
                    (2..lits.len()).find(|&k| self.value(lits[k]) != Value::False)
                };
                if let Some(k) = replacement {
                    let lits = &mut self.clauses[cref as usize].lits;
                    lits.swap(1, k);
                    let new_watch = lits[1].neg();
                    self.watches[new_watch.index()].push(watcher);
                    continue;
                }
                watchers[j] = watcher;
                j += 1;
                if self.value(first) == Value::False {
                    conflict = Some(cref);
                    while i < watchers.len() {
                        watchers[j] = watchers[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.assign(first, Some(cref));
                    observer.on_event(&SearchEvent::Propagate { level: self.level(), literal: first.to_dimacs() });
                }
            }
            watchers.truncate(j);
            // Watchers pushed onto this list during the loop (none for p itself) are preserved.
            let pushed = std::mem::replace(&mut self.watches[p.index()], watchers);
            self.watches[p.index()].extend(pushed);
            if conflict.is_some() {
                self.queue_head = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > ACTIVITY_LIMIT {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: ClauseRef) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learnt clause (asserting literal first,
    /// highest remaining level second) and the backjump level.
    fn analyze(&mut self, conflict: ClauseRef) -> (Vec<Lit>, u32) {
        let current = self.level();
        let mut learnt = vec![Lit(0)];
        let mut pending = 0usize;
        let mut index = self.trail.len();
        let mut clause = conflict;
        let mut asserting: Option<Lit> = None;
        loop {
            self.bump_clause(clause);
            let start = usize::from(asserting.is_some());
            let lits = self.clauses[clause as usize].lits.clone();
            for &q in &lits[start..] {
                let v = q.var();
                if !self.seen[v] && self.levels[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.levels[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var()] {
                    break;
                }
            }
            let p = self.trail[index];
            self.seen[p.var()] = false;
            pending -= 1;
            asserting = Some(p);
            if pending == 0 {
                break;
            }
            clause = self.reasons[p.var()].expect("implied literal has a reason");
        }
        learnt[0] = asserting.expect("conflict has a UIP").neg();
        for l in &learnt[1..] {
            self.seen[l.var()] = false;
        }
        let backjump = if learnt.len() == 1 {
            0
        } else {
            let (max_i, _) = learnt[1..]
                .iter()
                .enumerate()
                .max_by_key(|(i, l)| (self.levels[l.var()], std::cmp::Reverse(*i)))
                .expect("non-empty");
            learnt.swap(1, max_i + 1);
            self.levels[learnt[1].var()]
        };
        (learnt, backjump)
    }

    fn cancel_until(&mut self, level: u32) {
        if self.level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for k in (lim..self.trail.len()).rev() {
            let v = self.trail[k].var();
            self.values[v] = Value::Unassigned;
            self.reasons[v] = None;
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.queue_head = lim;
    }

    fn decay_activities(&mut self) {
        self.var_inc /= self.cfg.var_decay;
        self.cla_inc /= CLAUSE_DECAY;
    }

    fn locked(&self, cref: ClauseRef) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.value(first) == Value::True && self.reasons[first.var()] == Some(cref)
    }

    fn reduce_db(&mut self, observer: &mut dyn SearchObserver) {
        let Some(cap) = self.cfg.clause_db_cap else { return };
        let limit = cap.max(self.num_original);
        if self.learnts.len() <= limit {
            return;
        }
        let mut order = self.learnts.clone();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            ca.activity.total_cmp(&cb.activity).then(a.cmp(&b))
        });
        let mut removed = ClauseDbCounts::default();
        let target = order.len() / 2;
        for &cref in &order {
            if removed.clauses as usize >= target {
                break;
            }
            if self.locked(cref) {
                continue;
            }
            let c = &mut self.clauses[cref as usize];
            c.deleted = true;
            removed.add(c.lits.len());
        }
        self.learnts.retain(|&c| !self.clauses[c as usize].deleted);
        for list in self.watches.iter_mut() {
            list.retain(|w| !self.clauses[w.cref as usize].deleted);
        }
        for cref in 0..self.clauses.len() {
            if self.clauses[cref].deleted {
                self.clauses[cref].lits = Vec::new();
            }
        }
        if removed.clauses > 0 {
            observer.on_event(&SearchEvent::Reduce { removed });
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.values[v] == Value::Unassigned {
                return Some(Lit::new(v, self.cfg.polarity_default));
            }
        }
        None
    }

    fn finish(&mut self, status: Status, observer: &mut dyn SearchObserver) -> SolveOutcome {
        observer.on_event(&SearchEvent::Solved { status });
        let model = (status == Status::Sat).then(|| {
            self.values
                .iter()
                .map(|v| match v {
                    Value::True => true,
                    Value::False => false,
                    Value::Unassigned => self.cfg.polarity_default,
                })
                .collect()
        });
        let outcome = SolveOutcome {
            status,
            total_conflicts: self.total_conflicts,
            total_decisions: self.total_decisions,
            per_restart_conflicts: self.per_restart_conflicts.clone(),
            model,
        };
        self.finished = Some(outcome.clone());
        outcome
    }

    pub fn total_conflicts(&self) -> u64 {
        self.total_conflicts
    }

    pub fn restart_index(&self) -> u32 {
        self.restart_index
    }

    pub fn outcome(&self) -> Option<&SolveOutcome> {
        self.finished.as_ref()
    }

    fn record_conflict(&mut self) {
        self.total_conflicts += 1;
        self.conflicts_in_restart += 1;
        *self.per_restart_conflicts.last_mut().expect("current restart") += 1;
    }

    /// Runs until solved, the budget is hit, or `pause_at` total conflicts
    /// have been performed (checked between conflicts).
    pub fn run(&mut self, pause_at: Option<u64>, observer: &mut dyn SearchObserver) -> RunState {
        if let Some(done) = &self.finished {
            return RunState::Finished(done.clone());
        }
        if !self.started {
            self.started = true;
            observer.on_event(&SearchEvent::Restart { index: 0, conflict_limit: self.cfg.restart_limit(0) });
            if let Some(size) = self.root_conflict {
                self.record_conflict();
                observer.on_event(&SearchEvent::Conflict {
                    level: 0,
                    conflict_clause_size: size,
                    learnt_clause_size: 0,
                    assigned_before: self.trail.len() as u32,
                });
                return RunState::Finished(self.finish(Status::Unsat, observer));
            }
            for k in 0..self.trail.len() {
                let lit = self.trail[k];
                observer.on_event(&SearchEvent::Propagate { level: 0, literal: lit.to_dimacs() });
            }
        }
        loop {
            if let Some(conflict) = self.propagate(observer) {
                self.record_conflict();
                let assigned_before = self.trail.len() as u32;
                let conflict_size = self.clauses[conflict as usize].lits.len() as u32;
                let from_level = self.level();
                if from_level == 0 {
                    observer.on_event(&SearchEvent::Conflict {
                        level: 0,
                        conflict_clause_size: conflict_size,
                        learnt_clause_size: 0,
                        assigned_before,
                    });
                    return RunState::Finished(self.finish(Status::Unsat, observer));
                }
                let (learnt, to_level) = self.analyze(conflict);
                observer.on_event(&SearchEvent::Conflict {
                    level: from_level,
                    conflict_clause_size: conflict_size,
                    learnt_clause_size: learnt.len() as u32,
                    assigned_before,
                });
                self.cancel_until(to_level);
                observer.on_event(&SearchEvent::Backjump {
                    from_level,
                    to_level,
                    assigned_after: self.trail.len() as u32,
                });
                let asserting = learnt[0];
                if learnt.len() == 1 {
                    self.assign(asserting, None);
                } else {
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.assign(asserting, Some(cref));
                }
                observer.on_event(&SearchEvent::Propagate { level: to_level, literal: asserting.to_dimacs() });
                self.decay_activities();

                if self.cfg.conflict_budget.is_some_and(|b| self.total_conflicts >= b) {
                    return RunState::Finished(self.finish(Status::BudgetExhausted, observer));
                }
                if self.cfg.restart_limit(self.restart_index).is_some_and(|limit| self.conflicts_in_restart >= limit) {
                    self.cancel_until(0);
                    self.restart_index += 1;
                    self.conflicts_in_restart = 0;
                    self.per_restart_conflicts.push(0);
                    observer.on_event(&SearchEvent::Restart {
                        index: self.restart_index,
                        conflict_limit: self.cfg.restart_limit(self.restart_index),
                    });
                }
                if pause_at.is_some_and(|p| self.total_conflicts >= p) {
                    return RunState::Paused;
                }
                continue;
            }
            self.reduce_db(observer);
            let Some(decision) = self.pick_branch() else {
                return RunState::Finished(self.finish(Status::Sat, observer));
            };
            self.total_decisions += 1;
            self.trail_lim.push(self.trail.len());
            self.assign(decision, None);
            observer.on_event(&SearchEvent::Decide { level: self.level(), literal: decision.to_dimacs() });
        }
    }
}
