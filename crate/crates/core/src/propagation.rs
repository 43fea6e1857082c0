//! Activity-based bound tightening on `>=` rows (model rows, pooled conflicts, objective cutoff).

use serde::Serialize;

use crate::conflict::ConflictPool;
use crate::lp::LocalBounds;
use crate::problem::{Problem, FEAS_TOL, INT_TOL};

pub const PROP_EPS: f64 = 1e-7;
pub const ROUND_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reason {
    Branching,
    DivingFix,
    Propagation { row: usize },
    ConflictPropagation { id: u64 },
    Cutoff,
}

/// One entry of a bound trail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundChange {
    pub var: usize,
    pub side: BoundSide,
    pub old: f64,
    pub new: f64,
    pub reason: Reason,
}

impl BoundChange {
    /// Change of `var`'s bound on `side` to `new`, reading the old value from `bounds`.
    pub fn set(bounds: &LocalBounds, var: usize, side: BoundSide, new: f64, reason: Reason) -> Self {
        let old = match side {
            BoundSide::Lower => bounds.lb[var],
            BoundSide::Upper => bounds.ub[var],
        };
        BoundChange {
            var,
            side,
            old,
            new,
            reason,
        }
    }

    pub fn tightens(&self) -> bool {
        match self.side {
            BoundSide::Lower => self.new > self.old,
            BoundSide::Upper => self.new < self.old,
        }
    }

    pub fn apply(&self, bounds: &mut LocalBounds) {
        match self.side {
            BoundSide::Lower => bounds.lb[self.var] = self.new,
            BoundSide::Upper => bounds.ub[self.var] = self.new,
        }
    }

    pub fn undo(&self, bounds: &mut LocalBounds) {
        match self.side {
            BoundSide::Lower => bounds.lb[self.var] = self.old,
            BoundSide::Upper => bounds.ub[self.var] = self.old,
        }
    }
}

pub fn undo_trail(trail: &[BoundChange], bounds: &mut LocalBounds) {
    for c in trail.iter().rev() {
        c.undo(bounds);
    }
}

/// Identifies a `>=` row of the propagation system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowRef {
    Model(usize),
    Conflict(u64),
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowInfeasible;

/// Maximum activity of a row: finite part and number of infinite contributions.
pub fn max_activity(vars: &[usize], coefs: &[f64], bounds: &LocalBounds) -> (f64, usize) {
    let mut finite = 0.0;
    let mut infinite = 0;
    for (&j, &a) in vars.iter().zip(coefs) {
        let c = contribution(a, j, bounds);
        if c.is_infinite() {
            infinite += 1;
        } else {
            finite += c;
        }
    }
    (finite, infinite)
}

fn contribution(a: f64, j: usize, bounds: &LocalBounds) -> f64 {
    if a > 0.0 {
        a * bounds.ub[j]
    } else {
        a * bounds.lb[j]
    }
}

fn row_scale(coefs: &[f64]) -> f64 {
    coefs.iter().fold(1.0f64, |m, a| m.max(a.abs()))
}

/// Deductions of the row `sum a_j x_j >= rhs` against `bounds`, not applied.
pub fn propagate_row(
    vars: &[usize],
    coefs: &[f64],
    rhs: f64,
    bounds: &LocalBounds,
    is_int: impl Fn(usize) -> bool,
    reason: Reason,
) -> Result<Vec<BoundChange>, RowInfeasible> {
    let (finite, infinite) = max_activity(vars, coefs, bounds);
    if infinite == 0 && finite < rhs - FEAS_TOL * row_scale(coefs) {
        return Err(RowInfeasible);
    }
    let mut out = Vec::new();
    if infinite >= 2 {
        return Ok(out);
    }
    for (&j, &a) in vars.iter().zip(coefs) {
        if a == 0.0 {
            continue;
        }
        let c = contribution(a, j, bounds);
        let rest = match (infinite, c.is_infinite()) {
            (0, _) => finite - c,
            (1, true) => finite,
            _ => continue,
        };
        let v = (rhs - rest) / a;
        let side = if a > 0.0 {
            BoundSide::Lower
        } else {
            BoundSide::Upper
        };
        if let Some(ch) = tighten(j, side, v, bounds, is_int(j), reason)? {
            out.push(ch);
        }
    }
    Ok(out)
}

fn tighten(
    j: usize,
    side: BoundSide,
    v: f64,
    bounds: &LocalBounds,
    int: bool,
    reason: Reason,
) -> Result<Option<BoundChange>, RowInfeasible> {
    let (lb, ub) = (bounds.lb[j], bounds.ub[j]);
    let improves = |old: f64, new: f64| !old.is_finite() || (new - old).abs() > PROP_EPS * old.abs().max(1.0);
    match side {
        BoundSide::Lower => {
            let mut v = if int { (v - INT_TOL).ceil() } else { v };
            if v > ub {
                if int || v > ub + FEAS_TOL * ub.abs().max(1.0) {
                    return Err(RowInfeasible);
                }
                v = ub;
            }
            if v > lb && improves(lb, v) {
                return Ok(Some(BoundChange::set(bounds, j, side, v, reason)));
            }
        }
        BoundSide::Upper => {
            let mut v = if int { (v + INT_TOL).floor() } else { v };
            if v < lb {
                if int || v < lb - FEAS_TOL * lb.abs().max(1.0) {
                    return Err(RowInfeasible);
                }
                v = lb;
            }
            if v < ub && improves(ub, v) {
                return Ok(Some(BoundChange::set(bounds, j, side, v, reason)));
            }
        }
    }
    Ok(None)
}

/// Result of a propagation fixpoint run. `bounds` hold the tightened state; undo with the trail.
#[derive(Debug, Clone, Default)]
pub struct Propagation {
    pub trail: Vec<BoundChange>,
    pub infeasible: Option<RowRef>,
    /// Ids of pooled conflicts that tightened a bound or were found violated.
    pub conflicts_used: Vec<u64>,
    pub rounds: usize,
}

/// Runs row propagation to a fixpoint over the model rows, the pool, and the optional
/// objective cutoff row `-c'x >= -cutoff`. With `changed = Some(vars)` only rows touching
/// those variables are examined first; otherwise every row is.
pub fn propagate(
    p: &Problem,
    pool: Option<&ConflictPool>,
    cutoff: Option<f64>,
    bounds: &mut LocalBounds,
    changed: Option<&[usize]>,
    round_limit: usize,
) -> Propagation {
    let a = p.matrix();
    let m = p.num_rows();
    let slots = pool.map_or(0, |q| q.num_slots());
    let cut_row: Vec<(usize, f64)> = match cutoff {
        Some(_) => p
            .objective()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (j, -c))
            .collect(),
        None => Vec::new(),
    };
    let (cut_vars, cut_coefs): (Vec<usize>, Vec<f64>) = cut_row.into_iter().unzip();

    let mut model_dirty = vec![changed.is_none(); m];
    let mut conf_dirty = vec![changed.is_none(); slots];
    let mut cut_dirty = cutoff.is_some() && changed.is_none();
    let mark = |j: usize, md: &mut [bool], cd: &mut [bool], cut: &mut bool| {
        for &i in a.col(j).0 {
            md[i] = true;
        }
        if let Some(q) = pool {
            for &s in q.occurrences(j) {
                cd[s] = true;
            }
        }
        if cutoff.is_some() && p.objective()[j] != 0.0 {
            *cut = true;
        }
    };
    if let Some(vars) = changed {
        for &j in vars {
            mark(j, &mut model_dirty, &mut conf_dirty, &mut cut_dirty);
        }
    }

    let is_int = |j: usize| p.is_integer(j);
    let mut out = Propagation::default();
    let mut touched: Vec<usize> = Vec::new();
    while out.rounds < round_limit {
        if !cut_dirty && !model_dirty.contains(&true) && !conf_dirty.contains(&true) {
            break;
        }
        out.rounds += 1;
        let md = std::mem::replace(&mut model_dirty, vec![false; m]);
        let cd = std::mem::replace(&mut conf_dirty, vec![false; slots]);
        let cut = std::mem::replace(&mut cut_dirty, false);

        let mut rows: Vec<(RowRef, &[usize], &[f64], f64)> = Vec::new();
        for i in (0..m).filter(|&i| md[i]) {
            let (v, c) = a.row(i);
            rows.push((RowRef::Model(i), v, c, p.rhs()[i]));
        }
        if let Some(q) = pool {
            for s in (0..slots).filter(|&s| cd[s]) {
                if let Some(cc) = q.slot(s) {
                    rows.push((RowRef::Conflict(cc.id), &cc.vars, &cc.coefs, cc.rhs));
                }
            }
        }
        if cut {
            rows.push((RowRef::Cutoff, &cut_vars, &cut_coefs, -cutoff.unwrap_or(0.0)));
        }

        for (r, vars, coefs, rhs) in rows {
            let reason = match r {
                RowRef::Model(i) => Reason::Propagation { row: i },
                RowRef::Conflict(id) => Reason::ConflictPropagation { id },
                RowRef::Cutoff => Reason::Cutoff,
            };
            match propagate_row(vars, coefs, rhs, bounds, is_int, reason) {
                Err(RowInfeasible) => {
                    if let RowRef::Conflict(id) = r {
                        out.conflicts_used.push(id);
                    }
                    out.infeasible = Some(r);
                    return out;
                }
                Ok(changes) => {
                    if changes.is_empty() {
                        continue;
                    }
                    if let RowRef::Conflict(id) = r {
                        out.conflicts_used.push(id);
                    }
                    for ch in changes {
                        ch.apply(bounds);
                        out.trail.push(ch);
                        touched.push(ch.var);
                    }
                }
            }
        }
        for j in touched.drain(..) {
            mark(j, &mut model_dirty, &mut conf_dirty, &mut cut_dirty);
        }
    }
    out
}
