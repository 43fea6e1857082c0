//! LP relaxation solver over local bounds.
//!
//! The relaxation `min c'x  s.t.  Ax >= b, lb' <= x <= ub'` (optionally with the objective
//! cutoff row `-c'x >= -U`) is solved by a bounded-variable revised simplex. Cold starts use the
//! dual simplex when the slack basis is dual feasible and the primal two-phase method otherwise;
//! warm starts after bound tightenings use the dual simplex. Infeasibility is always reported
//! together with a Farkas ray `(y, s)` with `y >= 0`, `y'A + s = 0` and `y'b + s{lb',ub'} > 0`.

mod lu;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Point, Problem};

/// Local bounds `lb' <= x <= ub'` of a subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBounds {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl LocalBounds {
    /// The global bounds of `p`.
    pub fn of(p: &Problem) -> Self {
        LocalBounds {
            lb: p.lower().to_vec(),
            ub: p.upper().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.lb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lb.is_empty()
    }

    /// First variable with `lb' > ub'`.
    pub fn first_crossed(&self) -> Option<usize> {
        (0..self.lb.len()).find(|&j| self.lb[j] > self.ub[j])
    }

    pub fn is_fixed(&self, j: usize) -> bool {
        self.lb[j] == self.ub[j]
    }

    /// `true` if these bounds lie within `p`'s global bounds.
    pub fn within(&self, p: &Problem) -> bool {
        self.lb.len() == p.num_vars()
            && (0..self.lb.len()).all(|j| self.lb[j] >= p.lower()[j] && self.ub[j] <= p.upper()[j])
    }
}

/// Status of a variable (structural or row logical) in a simplex basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Simplex basis over `n` structurals followed by one logical per LP row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub(crate) head: Vec<usize>,
    pub(crate) status: Vec<VarStatus>,
}

impl Basis {
    pub fn num_rows(&self) -> usize {
        self.head.len()
    }

    pub fn status(&self) -> &[VarStatus] {
        &self.status
    }

    /// Variables in basis order.
    pub fn basic_vars(&self) -> &[usize] {
        &self.head
    }
}

/// The multiplier of the objective cutoff row `-c'x >= -bound` in a Farkas ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffMultiplier {
    pub weight: f64,
    pub bound: f64,
}

/// A dual ray `(y, s)` proving infeasibility of an LP relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasRay {
    /// Row multipliers, one per model row, all `>= 0`.
    pub y: Vec<f64>,
    /// Bound multipliers, one per variable.
    pub s: Vec<f64>,
    /// Multiplier on the objective cutoff row, when that row took part in the proof.
    pub cutoff: Option<CutoffMultiplier>,
}

impl FarkasRay {
    /// Ray with only row multipliers and `s` chosen as `-(y'A)`.
    pub fn from_rows(p: &Problem, y: Vec<f64>) -> Self {
        let s = p.matrix().transpose_mul(&y).into_iter().map(|v| -v).collect();
        FarkasRay { y, s, cutoff: None }
    }

    /// The ray multiplied by `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Self {
        FarkasRay {
            y: self.y.iter().map(|v| v * alpha).collect(),
            s: self.s.iter().map(|v| v * alpha).collect(),
            cutoff: self.cutoff.map(|c| CutoffMultiplier {
                weight: c.weight * alpha,
                bound: c.bound,
            }),
        }
    }

    /// Aggregated row `y'A` (including the cutoff row contribution `-w c`).
    pub fn aggregated_row(&self, p: &Problem) -> Vec<f64> {
        let mut row = p.matrix().transpose_mul(&self.y);
        if let Some(cut) = self.cutoff {
            for (r, c) in row.iter_mut().zip(p.objective()) {
                *r -= cut.weight * c;
            }
        }
        row
    }

    /// Aggregated right-hand side `y'b` (including `-w U` for the cutoff row).
    pub fn aggregated_rhs(&self, p: &Problem) -> f64 {
        let mut rhs: f64 = self.y.iter().zip(p.rhs()).map(|(y, b)| y * b).sum();
        if let Some(cut) = self.cutoff {
            rhs -= cut.weight * cut.bound;
        }
        rhs
    }
}

/// `s{lb,ub} = sum_{s_j>0} s_j lb_j + sum_{s_j<0} s_j ub_j`.
pub fn bound_activity(s: &[f64], bounds: &LocalBounds) -> f64 {
    s.iter()
        .enumerate()
        .map(|(j, &v)| {
            if v > 0.0 {
                v * bounds.lb[j]
            } else if v < 0.0 {
                v * bounds.ub[j]
            } else {
                0.0
            }
        })
        .sum()
}

/// Residuals of a Farkas ray check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayResiduals {
    /// `|y'A + s|_inf`.
    pub stationarity: f64,
    /// `y'b + s{lb',ub'}`; must be positive.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RayError {
    #[error("ray dimensions do not match the problem")]
    Dimension,
    #[error("negative row multiplier y[{0}]")]
    NegativeMultiplier(usize),
    #[error("s[{0}] has the sign of an infinite bound")]
    InfiniteBound(usize),
    #[error("|y'A + s| = {:e} exceeds tolerance", .0.stationarity)]
    Stationarity(RayResiduals),
    #[error("y'b + s{{lb,ub}} = {:e} is not positive", .0.violation)]
    NotViolated(RayResiduals),
}

/// Checks `y >= 0`, `|y'A + s|_inf <= tol * max(1, |y|_inf)` and `y'b + s{lb',ub'} > tol`.
pub fn verify_farkas_ray(
    p: &Problem,
    bounds: &LocalBounds,
    ray: &FarkasRay,
    tol: f64,
) -> Result<RayResiduals, RayError> {
    if ray.y.len() != p.num_rows() || ray.s.len() != p.num_vars() || bounds.len() != p.num_vars()
    {
        return Err(RayError::Dimension);
    }
    if let Some(i) = ray.y.iter().position(|&v| v < 0.0) {
        return Err(RayError::NegativeMultiplier(i));
    }
    if matches!(ray.cutoff, Some(c) if c.weight < 0.0) {
        return Err(RayError::NegativeMultiplier(p.num_rows()));
    }
    for (j, &v) in ray.s.iter().enumerate() {
        if (v > 0.0 && !bounds.lb[j].is_finite()) || (v < 0.0 && !bounds.ub[j].is_finite()) {
            return Err(RayError::InfiniteBound(j));
        }
    }
    let row = ray.aggregated_row(p);
    let stationarity = row
        .iter()
        .zip(&ray.s)
        .fold(0.0f64, |acc, (a, s)| acc.max((a + s).abs()));
    let violation = ray.aggregated_rhs(p) + bound_activity(&ray.s, bounds);
    let res = RayResiduals {
        stationarity,
        violation,
    };
    let ymax = ray
        .y
        .iter()
        .copied()
        .chain(ray.cutoff.map(|c| c.weight))
        .fold(1.0f64, f64::max);
    if stationarity > tol * ymax {
        return Err(RayError::Stationarity(res));
    }
    if violation <= tol {
        return Err(RayError::NotViolated(res));
    }
    Ok(res)
}

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub dual_tol: f64,
    pub farkas_tol: f64,
    pub pivot_tol: f64,
    pub iter_limit: usize,
    pub refactor_interval: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feas_tol: 1e-6,
            dual_tol: 1e-6,
            farkas_tol: 1e-6,
            pivot_tol: 1e-9,
            iter_limit: 100_000,
            refactor_interval: 100,
        }
    }
}

/// Optimal primal-dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LpOptimum {
    pub x: Point,
    /// Row duals, one per model row (`>= 0` up to tolerance).
    pub duals: Vec<f64>,
    /// Dual of the cutoff row, 0 when no cutoff row was present.
    pub cutoff_dual: f64,
    /// `r = c - A'y` (with the cutoff row contribution), 0 for basic variables.
    pub reduced_costs: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpOptimum),
    Infeasible { ray: FarkasRay, iterations: usize },
    Unbounded { direction: Vec<f64>, iterations: usize },
}

impl LpOutcome {
    pub fn iterations(&self) -> usize {
        match self {
            LpOutcome::Optimal(o) => o.iterations,
            LpOutcome::Infeasible { iterations, .. } | LpOutcome::Unbounded { iterations, .. } => {
                *iterations
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("local bounds cross at variable {0}")]
    InconsistentBounds(usize),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("numerical trouble: {0}")]
    Numerical(String),
}

/// Solves the LP relaxation over `bounds`.
pub fn solve_lp(
    p: &Problem,
    bounds: &LocalBounds,
    warm: Option<&Basis>,
    opts: &LpOptions,
) -> Result<LpOutcome, LpError> {
    solve_lp_with_cutoff(p, bounds, None, warm, opts)
}

/// Solves the LP relaxation over `bounds` with the extra row `c'x <= cutoff` when given.
pub fn solve_lp_with_cutoff(
    p: &Problem,
    bounds: &LocalBounds,
    cutoff: Option<f64>,
    warm: Option<&Basis>,
    opts: &LpOptions,
) -> Result<LpOutcome, LpError> {
    if let Some(j) = bounds.first_crossed() {
        return Err(LpError::InconsistentBounds(j));
    }
    simplex::solve(p, bounds, cutoff, warm, opts)
}
