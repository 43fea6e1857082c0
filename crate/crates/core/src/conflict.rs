//! Farkas proofs built from dual rays and the pool of learned conflict constraints.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::locks::LockTable;
use crate::lp::{verify_farkas_ray, FarkasRay, LocalBounds, RayError, RayResiduals};
use crate::problem::Problem;
use crate::propagation::max_activity;

pub const DEFAULT_CAPACITY: usize = 10_000;
/// Relative magnitude below which proof coefficients are dropped.
pub const SNAP_TOL: f64 = 1e-9;
const PROPORTIONAL_TOL: f64 = 1e-9;

/// The aggregated row `(y'A) x >= y'b` of a dual ray, sparse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarkasProof {
    pub vars: Vec<usize>,
    pub coefs: Vec<f64>,
    pub rhs: f64,
    /// Set when the ray used the objective cutoff row; the proof is then valid only for
    /// points with objective at most this bound.
    pub objective_bound: Option<f64>,
}

impl FarkasProof {
    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(&self.coefs).map(|(&j, a)| a * x[j]).sum()
    }

    /// Maximum activity under `bounds` (infinite when some contribution is unbounded).
    pub fn max_activity(&self, bounds: &LocalBounds) -> f64 {
        let (finite, infinite) = max_activity(&self.vars, &self.coefs, bounds);
        if infinite > 0 {
            f64::INFINITY
        } else {
            finite
        }
    }

    pub fn is_violated_under(&self, bounds: &LocalBounds) -> bool {
        self.max_activity(bounds) < self.rhs
    }

    /// `a_j < 0` needs an up-lock on `j` and `a_j > 0` a down-lock, counting the cutoff
    /// row `-c'x >= -U` when the proof used it.
    pub fn locks_consistent(&self, p: &Problem, var_locks: &LockTable) -> bool {
        let obj = self.objective_bound.is_some();
        self.vars.iter().zip(&self.coefs).all(|(&j, &a)| {
            let c = p.objective()[j];
            if a < 0.0 {
                var_locks.up[j] > 0 || (obj && c > 0.0)
            } else {
                var_locks.down[j] > 0 || (obj && c < 0.0)
            }
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProofError {
    #[error("ray rejected: {0}")]
    Ray(#[from] RayError),
    #[error("proof is not violated under the local bounds (max activity {max_activity}, rhs {rhs})")]
    NotViolated { max_activity: f64, rhs: f64 },
}

/// Builds the Farkas proof of `ray`, which must certify infeasibility under `bounds`.
pub fn build_farkas_proof(
    p: &Problem,
    bounds: &LocalBounds,
    ray: &FarkasRay,
    farkas_tol: f64,
) -> Result<(FarkasProof, RayResiduals), ProofError> {
    let residuals = verify_farkas_ray(p, bounds, ray, farkas_tol)?;
    let row = ray.aggregated_row(p);
    let mut rhs = ray.aggregated_rhs(p);
    let norm = row.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let (mut vars, mut coefs) = (Vec::new(), Vec::new());
    for (j, &a) in row.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        if a.abs() < SNAP_TOL * norm {
            let worst = if a > 0.0 { a * p.upper()[j] } else { a * p.lower()[j] };
            if worst.is_finite() {
                rhs -= worst;
                continue;
            }
        }
        vars.push(j);
        coefs.push(a);
    }
    let proof = FarkasProof {
        vars,
        coefs,
        rhs,
        objective_bound: ray.cutoff.map(|c| c.bound),
    };
    let max_act = proof.max_activity(bounds);
    if max_act >= rhs {
        return Err(ProofError::NotViolated {
            max_activity: max_act,
            rhs,
        });
    }
    Ok((proof, residuals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Origin {
    Dive { depth: usize },
    Node { depth: usize },
}

/// A pooled conflict constraint `coefs' x >= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictConstraint {
    pub id: u64,
    pub vars: Vec<usize>,
    pub coefs: Vec<f64>,
    pub rhs: f64,
    pub objective_bound: Option<f64>,
    pub origin: Origin,
    pub age: u32,
}

impl ConflictConstraint {
    pub fn is_satisfied_by(&self, x: &[f64], tol: f64) -> bool {
        let act: f64 = self.vars.iter().zip(&self.coefs).map(|(&j, a)| a * x[j]).sum();
        let scale = self.coefs.iter().fold(1.0f64, |m, a| m.max(a.abs()));
        act >= self.rhs - tol * scale
    }
}

impl fmt::Display for ConflictConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{} age={}:", self.id, self.age)?;
        for (&j, a) in self.vars.iter().zip(&self.coefs) {
            write!(f, " {a:+}*x{j}")?;
        }
        write!(f, " >= {}", self.rhs)?;
        if let Some(u) = self.objective_bound {
            write!(f, " [obj <= {u}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolAdd {
    Admitted(u64),
    Evicted { id: u64, victim: u64 },
    Rejected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PoolStats {
    pub admitted: u64,
    pub rejected: u64,
    pub evicted: u64,
}

/// Bounded pool with duplicate detection, age-based eviction and incremental conflict locks.
#[derive(Debug, Clone)]
pub struct ConflictPool {
    capacity: usize,
    slots: Vec<Option<ConflictConstraint>>,
    free: Vec<usize>,
    by_id: HashMap<u64, usize>,
    by_support: HashMap<Vec<usize>, Vec<usize>>,
    occurs: Vec<Vec<usize>>,
    locks: LockTable,
    next_id: u64,
    stats: PoolStats,
}

impl ConflictPool {
    pub fn new(num_vars: usize, capacity: usize) -> Self {
        ConflictPool {
            capacity: capacity.max(1),
            slots: Vec::new(),
            free: Vec::new(),
            by_id: HashMap::new(),
            by_support: HashMap::new(),
            occurs: vec![Vec::new(); num_vars],
            locks: LockTable::new(num_vars),
            next_id: 0,
            stats: PoolStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn stats(&self) -> PoolStats {
        self.stats
    }

    /// Conflict locks of the current entries.
    pub fn locks(&self) -> &LockTable {
        &self.locks
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, s: usize) -> Option<&ConflictConstraint> {
        self.slots.get(s).and_then(|c| c.as_ref())
    }

    /// Slots of the entries whose support contains `j`.
    pub fn occurrences(&self, j: usize) -> &[usize] {
        &self.occurs[j]
    }

    pub fn get(&self, id: u64) -> Option<&ConflictConstraint> {
        self.by_id.get(&id).and_then(|&s| self.slot(s))
    }

    /// Entries in slot order.
    pub fn iter(&self) -> impl Iterator<Item = &ConflictConstraint> {
        self.slots.iter().flatten()
    }

    fn is_duplicate(&self, proof: &FarkasProof) -> bool {
        let Some(cands) = self.by_support.get(&proof.vars) else {
            return false;
        };
        cands.iter().any(|&s| {
            let other = self.slots[s].as_ref().expect("support index points at live slot");
            let ratio = proof.coefs[0] / other.coefs[0];
            ratio > 0.0
                && proof
                    .coefs
                    .iter()
                    .zip(&other.coefs)
                    .all(|(a, b)| (a - ratio * b).abs() <= PROPORTIONAL_TOL * a.abs().max(1.0))
        })
    }

    /// Highest age first, then oldest id.
    fn victim(&self) -> Option<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.as_ref().map(|c| (s, c.age, c.id)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(s, _, _)| s)
    }

    fn remove_slot(&mut self, s: usize) -> ConflictConstraint {
        let c = self.slots[s].take().expect("live slot");
        self.by_id.remove(&c.id);
        if let Some(v) = self.by_support.get_mut(&c.vars) {
            v.retain(|&t| t != s);
            if v.is_empty() {
                self.by_support.remove(&c.vars);
            }
        }
        for &j in &c.vars {
            self.occurs[j].retain(|&t| t != s);
        }
        self.locks.apply_row(&c.vars, &c.coefs, -1);
        self.free.push(s);
        c
    }

    /// Adds a non-empty proof. Duplicates (same support, proportional coefficients) are rejected.
    pub fn add(&mut self, proof: FarkasProof, origin: Origin) -> PoolAdd {
        if proof.is_empty() || self.is_duplicate(&proof) {
            self.stats.rejected += 1;
            return PoolAdd::Rejected;
        }
        let mut victim = None;
        if self.len() >= self.capacity {
            if let Some(s) = self.victim() {
                victim = Some(self.remove_slot(s).id);
                self.stats.evicted += 1;
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        // lowest free slot keeps slot order deterministic
        let slot = match self.free.iter().enumerate().min_by_key(|(_, &s)| s) {
            Some((k, _)) => self.free.swap_remove(k),
            None => {
                self.slots.push(None);
                self.slots.len() - 1
            }
        };
        for &j in &proof.vars {
            self.occurs[j].push(slot);
        }
        self.locks.apply_row(&proof.vars, &proof.coefs, 1);
        self.by_support.entry(proof.vars.clone()).or_default().push(slot);
        self.by_id.insert(id, slot);
        self.slots[slot] = Some(ConflictConstraint {
            id,
            vars: proof.vars,
            coefs: proof.coefs,
            rhs: proof.rhs,
            objective_bound: proof.objective_bound,
            origin,
            age: 0,
        });
        self.stats.admitted += 1;
        match victim {
            Some(v) => PoolAdd::Evicted { id, victim: v },
            None => PoolAdd::Admitted(id),
        }
    }

    /// Removes every entry for which `keep` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(&ConflictConstraint) -> bool) {
        let drop: Vec<usize> = (0..self.slots.len())
            .filter(|&s| self.slot(s).is_some_and(|c| !keep(c)))
            .collect();
        for s in drop {
            self.remove_slot(s);
        }
    }

    /// End-of-node aging: entries in `used` are reset to age 0, all others age by one.
    pub fn age(&mut self, used: &[u64]) {
        for c in self.slots.iter_mut().flatten() {
            if used.contains(&c.id) {
                c.age = 0;
            } else {
                c.age = c.age.saturating_add(1);
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn set_age(&mut self, id: u64, age: u32) {
        let s = self.by_id[&id];
        self.slots[s].as_mut().unwrap().age = age;
    }
}

impl fmt::Display for ConflictPool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.iter() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// What conflict analysis produced for an infeasible node.
#[derive(Debug, Clone, PartialEq)]
pub enum Analysis {
    /// A proof was pooled under this id.
    Added { id: u64, evicted: Option<u64> },
    /// The proof has empty support; it prunes the node but is not stored.
    EmptyProof,
    /// Duplicate of a pooled constraint.
    Duplicate,
    /// Infeasibility came from a row already in the system.
    RowCause,
    /// The ray or its proof failed verification.
    Invalid(ProofError),
}

impl Analysis {
    pub fn created(&self) -> Option<u64> {
        match self {
            Analysis::Added { id, .. } => Some(*id),
            _ => None,
        }
    }
}

/// Cause of an infeasible node.
#[derive(Debug, Clone, Copy)]
pub enum Cause<'a> {
    Ray(&'a FarkasRay),
    Row(crate::propagation::RowRef),
}

pub fn analyze_infeasibility(
    p: &Problem,
    pool: &mut ConflictPool,
    bounds: &LocalBounds,
    cause: Cause<'_>,
    origin: Origin,
    farkas_tol: f64,
) -> Analysis {
    let ray = match cause {
        Cause::Row(_) => return Analysis::RowCause,
        Cause::Ray(r) => r,
    };
    match build_farkas_proof(p, bounds, ray, farkas_tol) {
        Err(e) => Analysis::Invalid(e),
        Ok((proof, _)) if proof.is_empty() => Analysis::EmptyProof,
        Ok((proof, _)) => match pool.add(proof, origin) {
            PoolAdd::Admitted(id) => Analysis::Added { id, evicted: None },
            PoolAdd::Evicted { id, victim } => Analysis::Added {
                id,
                evicted: Some(victim),
            },
            PoolAdd::Rejected => Analysis::Duplicate,
        },
    }
}
