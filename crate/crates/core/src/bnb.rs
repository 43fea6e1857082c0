//! LP-based branch and bound with propagation, conflict analysis and diving heuristics.

use std::collections::BTreeMap;
use std::rc::Rc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::{analyze_infeasibility, Cause, ConflictPool, Origin, PoolStats, DEFAULT_CAPACITY};
use crate::diving::{dive, fractional_vars, DiveInput, DivePolicy};
use crate::heuristics::{fractionality, HeuristicKind, DEFAULT_KAPPA};
use crate::locks::LockTable;
use crate::lp::{solve_lp_with_cutoff, Basis, LocalBounds, LpError, LpOptions, LpOutcome};
use crate::problem::{Point, Problem, Violation, FEAS_TOL, INT_TOL};
use crate::propagation::{propagate, BoundSide, ROUND_LIMIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub heuristics: Vec<HeuristicKind>,
    pub kappa: f64,
    /// Coefficient and conflict diving run at depths divisible by this; Farkas diving below
    /// the root too, once its root dive succeeded.
    pub dive_freq: usize,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub seed: u64,
    pub lp: LpOptions,
    pub pool_capacity: usize,
    /// Jump to the best-bound open node every this many nodes.
    pub best_bound_interval: usize,
    pub farkas_policy: DivePolicy,
    pub dive_policy: DivePolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            heuristics: Vec::new(),
            kappa: DEFAULT_KAPPA,
            dive_freq: 10,
            time_limit: None,
            node_limit: None,
            seed: 0,
            lp: LpOptions::default(),
            pool_capacity: DEFAULT_CAPACITY,
            best_bound_interval: 100,
            farkas_policy: DivePolicy::every_node(),
            dive_policy: DivePolicy::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_heuristics(heuristics: &[HeuristicKind]) -> Self {
        SolverConfig {
            heuristics: heuristics.to_vec(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("kappa must lie in [0, 1], got {0}")]
    Kappa(f64),
    #[error("dive frequency must be positive")]
    DiveFreq,
    #[error("invalid problem: {0}")]
    Invalid(#[from] Violation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
    /// The tree was exhausted but some node could not be resolved by the LP.
    Incomplete,
}

impl Status {
    pub fn is_solved(self) -> bool {
        matches!(self, Status::Optimal | Status::Infeasible | Status::Unbounded)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::NodeLimit => "node_limit",
            Status::TimeLimit => "time_limit",
            Status::Incomplete => "incomplete",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HeuristicStats {
    pub calls: usize,
    pub conflicts: usize,
    pub solutions: usize,
    /// Solutions that became the incumbent.
    pub improving: usize,
    pub total_depth: usize,
    pub lp_solves: usize,
    pub backtracks: usize,
    /// The dive at the root node returned a feasible solution.
    pub root_solution: bool,
}

impl HeuristicStats {
    pub fn avg_depth(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.total_depth as f64 / self.calls as f64
        }
    }
}

/// Bound progress at `time` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub time: f64,
    pub primal: Option<f64>,
    pub dual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Conflicts pooled from infeasible tree nodes.
    pub node_conflicts: usize,
    pub pool: PoolStats,
    pub heuristics: BTreeMap<HeuristicKind, HeuristicStats>,
    pub timeline: Vec<TimelineEvent>,
    pub time: f64,
    pub unresolved_nodes: usize,
    pub lemma_violations: usize,
}

impl SolveStats {
    /// Conflicts created by tree nodes and all dives.
    pub fn conflicts(&self) -> usize {
        self.node_conflicts + self.heuristics.values().map(|h| h.conflicts).sum::<usize>()
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    /// Best solution in the variable order of the input problem.
    pub incumbent: Option<Point>,
    /// Global lower bound on the objective.
    pub bound: f64,
    pub stats: SolveStats,
    /// Final conflict pool, indexed like the solved (possibly seed-permuted) problem.
    pub pool: ConflictPool,
}

impl SolveResult {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|x| x.objective)
    }
}

#[derive(Debug, Clone, Copy)]
struct Branching {
    var: usize,
    side: BoundSide,
    value: f64,
}

#[derive(Debug, Clone)]
struct Node {
    branchings: Vec<Branching>,
    depth: usize,
    lower_bound: f64,
    warm: Option<Rc<Basis>>,
    seq: u64,
}

/// Variable order for `seed`: identity for 0, a ChaCha permutation otherwise.
pub fn seed_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    if seed != 0 {
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    perm
}

/// Objective improvement demanded of the next incumbent.
pub fn cutoff_delta(p: &Problem, obj: f64) -> f64 {
    if p.has_integral_objective() {
        1.0
    } else {
        1e-6 * (1.0 + obj.abs())
    }
}

/// Most fractional integer variable (ties by index) and whether the up child goes first.
pub fn select_branching(p: &Problem, x: &[f64]) -> Option<(usize, bool)> {
    let mut best: Option<(usize, f64)> = None;
    for j in fractional_vars(p, x) {
        let phi = fractionality(x[j]);
        let score = phi.min(1.0 - phi);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| (j, fractionality(x[j]) >= 0.5))
}

pub fn solve(p: &Problem, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    solve_with_pool(p, config, None)
}

/// Like [`solve`], starting from the conflicts in `pool` (which must match the seed-permuted
/// variable order).
pub fn solve_with_pool(
    p: &Problem,
    config: &SolverConfig,
    pool: Option<ConflictPool>,
) -> Result<SolveResult, SolveError> {
    if !(0.0..=1.0).contains(&config.kappa) {
        return Err(SolveError::Kappa(config.kappa));
    }
    if config.dive_freq == 0 {
        return Err(SolveError::DiveFreq);
    }
    p.validate()?;
    let perm = seed_permutation(p.num_vars(), config.seed);
    let permuted;
    let q = if config.seed == 0 {
        p
    } else {
        permuted = p.permute_vars(&perm);
        &permuted
    };
    let pool = pool.unwrap_or_else(|| ConflictPool::new(q.num_vars(), config.pool_capacity));
    let mut search = Search::new(q, config, pool);
    search.run();
    let mut res = search.finish();
    if config.seed != 0 {
        if let Some(inc) = res.incumbent.as_mut() {
            let mut values = vec![0.0; inc.values.len()];
            for (k, &old) in perm.iter().enumerate() {
                values[old] = inc.values[k];
            }
            *inc = Point::new(p, values);
        }
    }
    Ok(res)
}

struct Search<'a> {
    p: &'a Problem,
    cfg: &'a SolverConfig,
    pool: ConflictPool,
    var_locks: LockTable,
    open: Vec<Node>,
    incumbent: Option<Point>,
    cutoff: Option<f64>,
    stats: SolveStats,
    start: Instant,
    next_seq: u64,
    unbounded: bool,
    limit: Option<Status>,
    farkas_root_found: bool,
    last_bound: f64,
}

impl<'a> Search<'a> {
    fn new(p: &'a Problem, cfg: &'a SolverConfig, pool: ConflictPool) -> Self {
        let mut stats = SolveStats::default();
        for &h in &cfg.heuristics {
            stats.heuristics.insert(h, HeuristicStats::default());
        }
        Search {
            p,
            cfg,
            pool,
            var_locks: LockTable::of_problem(p),
            open: Vec::new(),
            incumbent: None,
            cutoff: None,
            stats,
            start: Instant::now(),
            next_seq: 0,
            unbounded: false,
            limit: None,
            farkas_root_found: false,
            last_bound: f64::NEG_INFINITY,
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn push(&mut self, branchings: Vec<Branching>, depth: usize, lower_bound: f64, warm: Option<Rc<Basis>>) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.open.push(Node {
            branchings,
            depth,
            lower_bound,
            warm,
            seq,
        });
    }

    fn global_bound(&self) -> f64 {
        let open = self.open.iter().map(|n| n.lower_bound).fold(f64::INFINITY, f64::min);
        match &self.incumbent {
            Some(x) => open.min(x.objective),
            None => open,
        }
    }

    fn note_progress(&mut self) {
        let dual = self.global_bound();
        let primal = self.incumbent.as_ref().map(|x| x.objective);
        let changed = self
            .stats
            .timeline
            .last()
            .is_none_or(|e| e.primal != primal || e.dual != dual);
        if changed {
            let time = self.elapsed();
            self.stats.timeline.push(TimelineEvent { time, primal, dual });
        }
        self.last_bound = dual;
    }

    fn offer(&mut self, pt: Point) -> bool {
        if self.incumbent.as_ref().is_some_and(|x| pt.objective >= x.objective) {
            return false;
        }
        self.cutoff = Some(pt.objective - cutoff_delta(self.p, pt.objective));
        self.incumbent = Some(pt);
        true
    }

    fn prunable(&self, lower: f64) -> bool {
        self.cutoff.is_some_and(|u| lower > u + FEAS_TOL * (1.0 + u.abs()))
    }

    fn next_node(&mut self) -> Option<Node> {
        let interval = self.cfg.best_bound_interval;
        if interval > 0 && self.stats.nodes > 0 && self.stats.nodes.is_multiple_of(interval) {
            let k = self
                .open
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.lower_bound.total_cmp(&b.1.lower_bound).then(a.1.seq.cmp(&b.1.seq)))
                .map(|(k, _)| k)?;
            return Some(self.open.remove(k));
        }
        self.open.pop()
    }

    fn run(&mut self) {
        self.push(Vec::new(), 0, f64::NEG_INFINITY, None);
        while let Some(node) = self.next_node() {
            if let Some(limit) = self.cfg.node_limit {
                if self.stats.nodes >= limit {
                    self.open.push(node);
                    self.limit = Some(Status::NodeLimit);
                    break;
                }
            }
            if let Some(t) = self.cfg.time_limit {
                if self.elapsed() >= t {
                    self.open.push(node);
                    self.limit = Some(Status::TimeLimit);
                    break;
                }
            }
            if self.prunable(node.lower_bound) {
                continue;
            }
            self.stats.nodes += 1;
            let used = self.process(node);
            self.pool.age(&used);
            self.note_progress();
            if self.unbounded {
                break;
            }
        }
    }

    fn node_bounds(&self, node: &Node) -> LocalBounds {
        let mut b = LocalBounds::of(self.p);
        for br in &node.branchings {
            match br.side {
                BoundSide::Lower => b.lb[br.var] = b.lb[br.var].max(br.value),
                BoundSide::Upper => b.ub[br.var] = b.ub[br.var].min(br.value),
            }
        }
        b
    }

    fn analyze(&mut self, bounds: &LocalBounds, cause: Cause<'_>, depth: usize) {
        let a = analyze_infeasibility(
            self.p,
            &mut self.pool,
            bounds,
            cause,
            Origin::Node { depth },
            self.cfg.lp.farkas_tol,
        );
        if let Some(id) = a.created() {
            self.stats.node_conflicts += 1;
            self.check_lemma(id);
        }
    }

    fn check_lemma(&mut self, id: u64) {
        let Some(c) = self.pool.get(id) else { return };
        let proof = crate::conflict::FarkasProof {
            vars: c.vars.clone(),
            coefs: c.coefs.clone(),
            rhs: c.rhs,
            objective_bound: c.objective_bound,
        };
        if !proof.locks_consistent(self.p, &self.var_locks) {
            self.stats.lemma_violations += 1;
            debug_assert!(false, "conflict {id} has a coefficient without a matching lock");
        }
    }

    /// Processes one node; returns the pooled conflicts that were active in it.
    fn process(&mut self, node: Node) -> Vec<u64> {
        let p = self.p;
        let mut bounds = self.node_bounds(&node);
        if bounds.first_crossed().is_some() {
            return Vec::new();
        }
        let prop = propagate(p, Some(&self.pool), self.cutoff, &mut bounds, None, ROUND_LIMIT);
        let used = prop.conflicts_used;
        if let Some(row) = prop.infeasible {
            self.analyze(&bounds, Cause::Row(row), node.depth);
            return used;
        }
        let outcome = solve_lp_with_cutoff(p, &bounds, self.cutoff, node.warm.as_deref(), &self.cfg.lp);
        let opt = match outcome {
            Ok(LpOutcome::Optimal(opt)) => opt,
            Ok(LpOutcome::Infeasible { ray, iterations }) => {
                self.stats.lp_iterations += iterations;
                self.analyze(&bounds, Cause::Ray(&ray), node.depth);
                return used;
            }
            Ok(LpOutcome::Unbounded { .. }) => {
                self.unbounded = true;
                return used;
            }
            Err(e) => {
                log::debug!("node LP failed at depth {}: {e}", node.depth);
                self.split_unresolved(&node, &bounds, &e);
                return used;
            }
        };
        self.stats.lp_iterations += opt.iterations;
        let lower = opt.x.objective.max(node.lower_bound);
        if self.prunable(lower) {
            return used;
        }
        let x = opt.x.values.clone();
        if fractional_vars(p, &x).is_empty() {
            self.accept_integral(&x);
            return used;
        }
        let basis = Rc::new(opt.basis.clone());
        self.run_heuristics(&node, &bounds, &x, &basis);
        if self.prunable(lower) {
            return used;
        }
        let (j, up_first) = select_branching(p, &x).expect("fractional solution has a candidate");
        let down = Branching {
            var: j,
            side: BoundSide::Upper,
            value: x[j].floor(),
        };
        let up = Branching {
            var: j,
            side: BoundSide::Lower,
            value: x[j].ceil(),
        };
        let (first, second) = if up_first { (up, down) } else { (down, up) };
        for br in [second, first] {
            let mut b = node.branchings.clone();
            b.push(br);
            self.push(b, node.depth + 1, lower, Some(Rc::clone(&basis)));
        }
        used
    }

    fn accept_integral(&mut self, x: &[f64]) {
        let p = self.p;
        let mut r = x.to_vec();
        for &j in p.integer_vars() {
            r[j] = r[j].round();
        }
        for cand in [r, x.to_vec()] {
            if matches!(p.check_feasible(&cand, FEAS_TOL, INT_TOL), Ok(f) if f.is_feasible()) {
                self.offer(Point::new(p, cand));
                return;
            }
        }
        log::debug!("integral LP solution failed the feasibility check");
    }

    fn split_unresolved(&mut self, node: &Node, bounds: &LocalBounds, err: &LpError) {
        let p = self.p;
        let Some(&j) = p.integer_vars().iter().find(|&&j| bounds.lb[j] < bounds.ub[j]) else {
            log::warn!("node left unresolved: {err}");
            self.stats.unresolved_nodes += 1;
            return;
        };
        let (l, u) = (bounds.lb[j], bounds.ub[j]);
        let mid = match (l.is_finite(), u.is_finite()) {
            (true, true) => ((l + u) / 2.0).floor(),
            (true, false) => l,
            (false, true) => u - 1.0,
            (false, false) => 0.0,
        };
        for br in [
            Branching { var: j, side: BoundSide::Lower, value: mid + 1.0 },
            Branching { var: j, side: BoundSide::Upper, value: mid },
        ] {
            let mut b = node.branchings.clone();
            b.push(br);
            self.push(b, node.depth + 1, node.lower_bound, None);
        }
    }

    fn run_heuristics(&mut self, node: &Node, bounds: &LocalBounds, x: &[f64], basis: &Basis) {
        let p = self.p;
        let depth = node.depth;
        let nonzero_obj = p.objective().iter().any(|&c| c != 0.0);
        for &h in &self.cfg.heuristics {
            let due = match h {
                HeuristicKind::Farkas => {
                    if depth == 0 {
                        nonzero_obj
                    } else {
                        self.farkas_root_found && depth.is_multiple_of(self.cfg.dive_freq)
                    }
                }
                HeuristicKind::Coef | HeuristicKind::Conflict => depth.is_multiple_of(self.cfg.dive_freq),
            };
            if !due {
                continue;
            }
            let policy = match h {
                HeuristicKind::Farkas => self.cfg.farkas_policy,
                _ => self.cfg.dive_policy,
            };
            let before = self.pool.stats().admitted;
            let input = DiveInput {
                problem: p,
                var_locks: &self.var_locks,
                bounds,
                start: x,
                basis: Some(basis),
                cutoff: self.cutoff,
                kappa: self.cfg.kappa,
                lp: self.cfg.lp,
                node_depth: depth,
            };
            let res = dive(&input, &mut self.pool, h.rule(), &policy);
            let first_id = before;
            let last_id = self.pool.stats().admitted;
            for id in first_id..last_id {
                self.check_lemma(id);
            }
            let st = self.stats.heuristics.entry(h).or_default();
            st.calls += 1;
            st.conflicts += res.stats.conflicts;
            st.solutions += res.stats.solutions;
            st.total_depth += res.stats.depth;
            st.lp_solves += res.stats.lp_solves;
            st.backtracks += res.stats.backtracks;
            self.stats.lp_iterations += res.stats.lp_iterations;
            let found = res.solution.is_some();
            if depth == 0 {
                st.root_solution = found;
            }
            if let Some(sol) = res.solution {
                if self.offer(sol) {
                    self.stats.heuristics.entry(h).or_default().improving += 1;
                }
            }
            if h == HeuristicKind::Farkas && depth == 0 {
                self.farkas_root_found = found;
            }
        }
    }

    fn finish(mut self) -> SolveResult {
        self.stats.time = self.elapsed();
        self.stats.pool = self.pool.stats();
        let status = if self.unbounded {
            Status::Unbounded
        } else if let Some(l) = self.limit {
            l
        } else if self.stats.unresolved_nodes > 0 {
            Status::Incomplete
        } else if self.incumbent.is_some() {
            Status::Optimal
        } else {
            Status::Infeasible
        };
        let bound = match status {
            Status::Optimal => self.incumbent.as_ref().map_or(f64::INFINITY, |x| x.objective),
            Status::Infeasible => f64::INFINITY,
            Status::Unbounded => f64::NEG_INFINITY,
            _ => self.global_bound(),
        };
        if self.stats.timeline.last().is_none_or(|e| e.dual != bound) {
            let time = self.stats.time;
            let primal = self.incumbent.as_ref().map(|x| x.objective);
            self.stats.timeline.push(TimelineEvent { time, primal, dual: bound });
        }
        SolveResult {
            status,
            incumbent: self.incumbent,
            bound,
            stats: self.stats,
            pool: self.pool,
        }
    }
}
