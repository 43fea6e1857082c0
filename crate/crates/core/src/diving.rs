//! The generic diving procedure: fix, propagate, resolve, learn, backtrack one level.

use serde::{Deserialize, Serialize};

use crate::conflict::{analyze_infeasibility, Analysis, Cause, ConflictPool, Origin};
use crate::heuristics::{DiveContext, DiveHeuristic, Direction};
use crate::locks::{weighted_locks, LockTable};
use crate::lp::{solve_lp_with_cutoff, Basis, LocalBounds, LpError, LpOptions, LpOutcome};
use crate::problem::{Point, Problem, FEAS_TOL, INT_TOL};
use crate::propagation::{
    propagate, undo_trail, BoundChange, BoundSide, Reason, ROUND_LIMIT,
};

/// When a dive re-solves its LP and how far it may go.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivePolicy {
    pub lp_every_node: bool,
    pub lp_trigger_fraction: f64,
    pub max_dive_depth: Option<usize>,
    pub propagate: bool,
    pub lp_iter_limit: usize,
    /// Stop after this many backtracks in a row; `None` runs until the candidates run out.
    pub max_consecutive_failures: Option<usize>,
}

impl Default for DivePolicy {
    fn default() -> Self {
        DivePolicy {
            lp_every_node: false,
            lp_trigger_fraction: 0.15,
            max_dive_depth: None,
            propagate: true,
            lp_iter_limit: 10_000,
            max_consecutive_failures: None,
        }
    }
}

impl DivePolicy {
    /// Resolve the LP after every fixing.
    pub fn every_node() -> Self {
        DivePolicy {
            lp_every_node: true,
            ..Self::default()
        }
    }
}

pub fn lp_resolve_due(policy: &DivePolicy, changes_since_lp: usize, n: usize) -> bool {
    policy.lp_every_node || changes_since_lp as f64 > policy.lp_trigger_fraction * n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiveAbort {
    IterationLimit,
    Numerical,
    Unbounded,
    DepthLimit,
    Failures,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiveStats {
    /// Deepest trail depth reached.
    pub depth: usize,
    /// LP solutions used, counting the starting LP.
    pub lp_solves: usize,
    pub lp_iterations: usize,
    pub conflicts: usize,
    pub solutions: usize,
    pub backtracks: usize,
    pub abort: Option<DiveAbort>,
}

/// One step of a dive, recorded for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DiveEvent {
    Select { var: usize, dir: Direction, score: f64 },
    Propagated { changes: Vec<BoundChange> },
    PropagationInfeasible,
    LpOptimal { objective: f64, fractional: usize },
    LpInfeasible { conflict: Option<u64> },
    Backtrack { var: usize },
    Solution { objective: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiveResult {
    /// Best improving solution found, if any.
    pub solution: Option<Point>,
    pub stats: DiveStats,
    pub events: Vec<DiveEvent>,
}

/// Rounds the integer variables of `x` and returns the point if it is feasible.
pub fn round_to_solution(p: &Problem, x: &[f64]) -> Option<Point> {
    let mut v = x.to_vec();
    for &j in p.integer_vars() {
        v[j] = v[j].round();
    }
    match p.check_feasible(&v, FEAS_TOL, INT_TOL) {
        Ok(f) if f.is_feasible() => Some(Point::new(p, v)),
        _ => None,
    }
}

/// Integer variables of `x` that are fractional.
pub fn fractional_vars(p: &Problem, x: &[f64]) -> Vec<usize> {
    p.integer_vars()
        .iter()
        .copied()
        .filter(|&j| (x[j] - x[j].round()).abs() > INT_TOL)
        .collect()
}

/// Inputs shared by every dive started from one node.
pub struct DiveInput<'a> {
    pub problem: &'a Problem,
    pub var_locks: &'a LockTable,
    pub bounds: &'a LocalBounds,
    /// LP solution the dive starts from.
    pub start: &'a [f64],
    /// Basis of `start`, used to warm start the first resolve.
    pub basis: Option<&'a Basis>,
    /// Objective value every new solution must reach (`c'x <= cutoff`).
    pub cutoff: Option<f64>,
    pub kappa: f64,
    pub lp: LpOptions,
    /// Depth of the calling node, recorded in conflict origins.
    pub node_depth: usize,
}

struct Dive<'a, 'b> {
    inp: &'b DiveInput<'a>,
    pool: &'b mut ConflictPool,
    rule: &'b dyn DiveHeuristic,
    policy: DivePolicy,
    bounds: LocalBounds,
    trail: Vec<Vec<BoundChange>>,
    basis: Option<Basis>,
    cutoff: Option<f64>,
    best: Option<Point>,
    stats: DiveStats,
    events: Vec<DiveEvent>,
}

enum LpStep {
    Optimal(Vec<f64>),
    Infeasible,
    Abort,
}

impl Dive<'_, '_> {
    fn record(&mut self, x: &[f64]) {
        let p = self.inp.problem;
        let Some(pt) = round_to_solution(p, x) else {
            return;
        };
        let improves = self.cutoff.is_none_or(|u| pt.objective <= u + FEAS_TOL * (1.0 + u.abs()));
        let better = self.best.as_ref().is_none_or(|b| pt.objective < b.objective);
        if improves && better {
            self.events.push(DiveEvent::Solution {
                objective: pt.objective,
            });
            self.stats.solutions += 1;
            let delta = if p.has_integral_objective() {
                1.0
            } else {
                1e-6 * (1.0 + pt.objective.abs())
            };
            self.cutoff = Some(pt.objective - delta);
            self.best = Some(pt);
        }
    }

    fn solve_lp(&mut self) -> LpStep {
        let p = self.inp.problem;
        let opts = LpOptions {
            iter_limit: self.policy.lp_iter_limit,
            ..self.inp.lp
        };
        self.stats.lp_solves += 1;
        match solve_lp_with_cutoff(p, &self.bounds, self.cutoff, self.basis.as_ref(), &opts) {
            Ok(LpOutcome::Optimal(opt)) => {
                self.stats.lp_iterations += opt.iterations;
                let x = opt.x.values;
                self.events.push(DiveEvent::LpOptimal {
                    objective: opt.x.objective,
                    fractional: fractional_vars(p, &x).len(),
                });
                self.basis = Some(opt.basis);
                self.record(&x);
                LpStep::Optimal(x)
            }
            Ok(LpOutcome::Infeasible { ray, iterations }) => {
                self.stats.lp_iterations += iterations;
                let origin = Origin::Dive {
                    depth: self.inp.node_depth + self.trail.len(),
                };
                let a = analyze_infeasibility(
                    p,
                    self.pool,
                    &self.bounds,
                    Cause::Ray(&ray),
                    origin,
                    opts.farkas_tol,
                );
                if let Analysis::Invalid(e) = &a {
                    log::debug!("dive conflict analysis failed: {e}");
                }
                let id = a.created();
                if id.is_some() {
                    self.stats.conflicts += 1;
                }
                self.events.push(DiveEvent::LpInfeasible { conflict: id });
                LpStep::Infeasible
            }
            Ok(LpOutcome::Unbounded { .. }) => {
                self.stats.abort = Some(DiveAbort::Unbounded);
                LpStep::Abort
            }
            Err(LpError::IterationLimit(_)) => {
                self.stats.abort = Some(DiveAbort::IterationLimit);
                LpStep::Abort
            }
            Err(_) => {
                self.stats.abort = Some(DiveAbort::Numerical);
                LpStep::Abort
            }
        }
    }

    fn undo_last(&mut self) {
        if let Some(batch) = self.trail.pop() {
            undo_trail(&batch, &mut self.bounds);
        }
    }

    fn fix_unlocked(&mut self, cands: &[usize]) {
        let p = self.inp.problem;
        let locks = self.inp.var_locks;
        let mut batch = Vec::new();
        for &j in cands {
            let c = p.objective()[j];
            if c == 0.0 || locks.down[j] != 0 || locks.up[j] != 0 {
                continue;
            }
            let (side, v) = if c > 0.0 {
                (BoundSide::Upper, self.bounds.lb[j])
            } else {
                (BoundSide::Lower, self.bounds.ub[j])
            };
            if !v.is_finite() {
                continue;
            }
            let ch = BoundChange::set(&self.bounds, j, side, v, Reason::DivingFix);
            if ch.tightens() {
                ch.apply(&mut self.bounds);
                batch.push(ch);
            }
        }
        if !batch.is_empty() {
            self.trail.push(batch);
        }
    }

    fn run(&mut self) {
        let p = self.inp.problem;
        let n = p.num_vars();
        let mut x = self.inp.start.to_vec();
        self.record(&x);
        let mut cands = fractional_vars(p, &x);
        if cands.is_empty() {
            return;
        }
        let mut excluded = vec![false; n];
        let mut changes_since_lp = 0usize;
        let mut lp_fresh = true;
        let mut failures = 0usize;
        if self.rule.fixes_unlocked_first() {
            let before = self.trail.len();
            self.fix_unlocked(&cands);
            if self.trail.len() > before {
                changes_since_lp += self.trail[before].len();
                lp_fresh = false;
                let b = &self.bounds;
                cands.retain(|&j| b.lb[j] < b.ub[j]);
            }
        }

        loop {
            if cands.is_empty() {
                if !lp_fresh {
                    let _ = self.solve_lp();
                }
                break;
            }
            if let Some(k) = self.policy.max_consecutive_failures {
                if failures >= k {
                    self.stats.abort = Some(DiveAbort::Failures);
                    break;
                }
            }
            if let Some(d) = self.policy.max_dive_depth {
                if self.trail.len() >= d {
                    self.stats.abort = Some(DiveAbort::DepthLimit);
                    break;
                }
            }

            let conf = weighted_locks(self.inp.var_locks, self.pool.locks(), self.inp.kappa)
                .expect("kappa validated by caller");
            let ctx = DiveContext {
                c: p.objective(),
                x: &x,
                bounds: &self.bounds,
                vlocks: self.inp.var_locks,
                wlocks: &conf,
            };
            let mut pick: Option<(usize, Direction, f64)> = None;
            for &j in &cands {
                let dir = self.rule.round(j, &ctx);
                let score = self.rule.score(j, dir, &ctx);
                if pick.is_none_or(|(k, _, s)| score > s || (score == s && j < k)) {
                    pick = Some((j, dir, score));
                }
            }
            let (j, dir, score) = pick.expect("candidate set is non-empty");
            cands.retain(|&k| k != j);
            self.events.push(DiveEvent::Select { var: j, dir, score });

            let (side, v) = match dir {
                Direction::Up => (BoundSide::Lower, x[j].ceil()),
                Direction::Down => (BoundSide::Upper, x[j].floor()),
            };
            let (lb, ub) = (self.bounds.lb[j], self.bounds.ub[j]);
            let clash = match side {
                BoundSide::Lower => v > ub,
                BoundSide::Upper => v < lb,
            };
            let mut batch = Vec::new();
            let mut infeasible = clash;
            if !clash {
                let ch = BoundChange::set(&self.bounds, j, side, v, Reason::DivingFix);
                if ch.tightens() {
                    ch.apply(&mut self.bounds);
                    batch.push(ch);
                }
            }
            self.trail.push(Vec::new());
            self.stats.depth = self.stats.depth.max(self.trail.len());
            if !infeasible && self.policy.propagate && !batch.is_empty() {
                let res = propagate(
                    p,
                    Some(self.pool),
                    self.cutoff,
                    &mut self.bounds,
                    Some(&[j]),
                    ROUND_LIMIT,
                );
                if res.infeasible.is_some() {
                    infeasible = true;
                    self.events.push(DiveEvent::PropagationInfeasible);
                } else if !res.trail.is_empty() {
                    self.events.push(DiveEvent::Propagated {
                        changes: res.trail.clone(),
                    });
                }
                batch.extend(res.trail);
            }
            *self.trail.last_mut().expect("pushed above") = batch;

            if infeasible {
                self.undo_last();
                self.events.push(DiveEvent::Backtrack { var: j });
                self.stats.backtracks += 1;
                excluded[j] = true;
                failures += 1;
                continue;
            }
            let applied = self.trail.last().map_or(0, Vec::len);
            changes_since_lp += applied;
            let b = &self.bounds;
            cands.retain(|&k| b.lb[k] < b.ub[k]);

            if !lp_resolve_due(&self.policy, changes_since_lp, n) {
                lp_fresh = false;
                failures = 0;
                continue;
            }
            match self.solve_lp() {
                LpStep::Abort => break,
                LpStep::Infeasible => {
                    self.undo_last();
                    changes_since_lp -= applied;
                    self.events.push(DiveEvent::Backtrack { var: j });
                    self.stats.backtracks += 1;
                    excluded[j] = true;
                    failures += 1;
                }
                LpStep::Optimal(nx) => {
                    failures = 0;
                    x = nx;
                    lp_fresh = true;
                    changes_since_lp = 0;
                    let frac = fractional_vars(p, &x);
                    if frac.is_empty() {
                        break;
                    }
                    cands = frac.into_iter().filter(|&k| !excluded[k]).collect();
                }
            }
        }
    }
}

/// Runs one dive from the LP solution `input.start` with the given rounding/score rule.
/// Conflicts found along the way are added to `pool`; the caller's bounds are not modified.
pub fn dive(
    input: &DiveInput<'_>,
    pool: &mut ConflictPool,
    rule: &dyn DiveHeuristic,
    policy: &DivePolicy,
) -> DiveResult {
    let mut d = Dive {
        inp: input,
        pool,
        rule,
        policy: *policy,
        bounds: input.bounds.clone(),
        trail: Vec::new(),
        basis: input.basis.cloned(),
        cutoff: input.cutoff,
        best: None,
        stats: DiveStats {
            lp_solves: 1,
            ..DiveStats::default()
        },
        events: Vec::new(),
    };
    d.run();
    while let Some(batch) = d.trail.pop() {
        undo_trail(&batch, &mut d.bounds);
    }
    debug_assert_eq!(&d.bounds, input.bounds, "trail undo must restore the node bounds");
    DiveResult {
        solution: d.best,
        stats: d.stats,
        events: d.events,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{CoefficientDiving, ConflictDiving, FarkasDiving};
    use crate::lp::{solve_lp, LpOptimum, LpOutcome};
    use crate::problem::tests::e4;

    fn optimum(p: &Problem) -> LpOptimum {
        match solve_lp(p, &LocalBounds::of(p), None, &LpOptions::default()).unwrap() {
            LpOutcome::Optimal(o) => o,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn resolve_trigger() {
        let every = DivePolicy::every_node();
        let def = DivePolicy::default();
        assert!(lp_resolve_due(&every, 0, 100));
        assert!(!lp_resolve_due(&def, 15, 100));
        assert!(lp_resolve_due(&def, 16, 100));
        assert!(lp_resolve_due(&def, 2, 10));
    }

    #[test]
    fn rounding_examples() {
        let p = e4();
        assert_eq!(round_to_solution(&p, &[1.0, 0.0]).unwrap().objective, -1.0);
        assert!(round_to_solution(&p, &[0.75, 0.75]).is_none());
        let q = Problem::from_parts(
            vec![1.0],
            &[vec![(0, 1.0)]],
            vec![0.5],
            vec![0.0],
            vec![1.0],
            &[],
        );
        assert_eq!(round_to_solution(&q, &[0.6]).unwrap().values, vec![0.6]);
        assert!(round_to_solution(&q, &[0.4]).is_none());
    }

    #[test]
    fn integral_start_returns_immediately() {
        let p = Problem::from_parts(
            vec![1.0, 1.0],
            &[vec![(0, 1.0), (1, 1.0)]],
            vec![1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[0, 1],
        );
        let start = optimum(&p);
        let locks = LockTable::of_problem(&p);
        let b = LocalBounds::of(&p);
        let inp = DiveInput {
            problem: &p,
            var_locks: &locks,
            bounds: &b,
            start: &start.x.values,
            basis: Some(&start.basis),
            cutoff: None,
            kappa: 0.75,
            lp: LpOptions::default(),
            node_depth: 0,
        };
        let mut pool = ConflictPool::new(2, 100);
        let r = dive(&inp, &mut pool, &CoefficientDiving, &DivePolicy::default());
        assert_eq!(r.stats.depth, 0);
        assert_eq!(r.solution.unwrap().objective, 1.0);
    }

    #[test]
    fn e4_dive_any_rule_finds_optimum() {
        let p = e4();
        let start = optimum(&p);
        let locks = LockTable::of_problem(&p);
        let b = LocalBounds::of(&p);
        let inp = DiveInput {
            problem: &p,
            var_locks: &locks,
            bounds: &b,
            start: &start.x.values,
            basis: Some(&start.basis),
            cutoff: None,
            kappa: 0.75,
            lp: LpOptions::default(),
            node_depth: 0,
        };
        let rules: [&dyn DiveHeuristic; 3] = [&FarkasDiving, &CoefficientDiving, &ConflictDiving];
        for rule in rules {
            let mut pool = ConflictPool::new(2, 100);
            let r = dive(&inp, &mut pool, rule, &DivePolicy::every_node());
            assert_eq!(r.solution.map(|s| s.objective), Some(-1.0), "{}", rule.name());
        }
    }
}
