//! In-memory MIP model `min c'x  s.t.  Ax >= b, lb <= x <= ub, x_j integral for j in I`.
//!
//! Every constraint is stored as a `>=` row. [`ProblemBuilder`] accepts `<=`, `=` and ranged
//! rows and normalizes them on [`ProblemBuilder::build`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default primal feasibility tolerance (absolute, scaled by `max(1, |row|_inf)` for rows).
pub const FEAS_TOL: f64 = 1e-6;
/// Default integrality tolerance.
pub const INT_TOL: f64 = 1e-6;

/// Sparse matrix holding synchronized row-major and column-major copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
}

impl SparseMatrix {
    /// Builds the matrix from rows given as `(column, value)` lists. Zero values are dropped and
    /// repeated columns within a row are summed.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        row_start.push(0);
        for row in rows {
            let mut entries: Vec<(usize, f64)> = row.clone();
            entries.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (j, v) in entries {
                assert!(j < ncols, "column index {j} out of range ({ncols} columns)");
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            for (j, v) in merged {
                if v != 0.0 {
                    row_idx.push(j);
                    row_val.push(v);
                }
            }
            row_start.push(row_idx.len());
        }
        let mut m = SparseMatrix {
            nrows: rows.len(),
            ncols,
            row_start,
            row_idx,
            row_val,
            col_start: Vec::new(),
            col_idx: Vec::new(),
            col_val: Vec::new(),
        };
        m.rebuild_columns();
        m
    }

    fn rebuild_columns(&mut self) {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.row_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let nnz = self.row_idx.len();
        let mut col_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        for i in 0..self.nrows {
            for k in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_idx[k];
                col_idx[next[j]] = i;
                col_val[next[j]] = self.row_val[k];
                next[j] += 1;
            }
        }
        self.col_start = counts;
        self.col_idx = col_idx;
        self.col_val = col_val;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Row `i` as parallel `(columns, values)` slices, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_start[i]..self.row_start[i + 1];
        (&self.row_idx[r.clone()], &self.row_val[r])
    }

    /// Column `j` as parallel `(rows, values)` slices, sorted by row.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_start[j]..self.col_start[j + 1];
        (&self.col_idx[r.clone()], &self.col_val[r])
    }

    /// `true` iff the column view holds exactly the entries of the row view.
    pub fn views_agree(&self) -> bool {
        let mut from_cols = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                from_cols.push((i, j, v.to_bits()));
            }
        }
        let mut from_rows = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                from_rows.push((i, j, v.to_bits()));
            }
        }
        from_cols.sort_unstable();
        from_rows.sort_unstable();
        from_cols == from_rows
    }

    /// `y'A` as a dense vector of length `ncols`.
    pub fn transpose_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate().take(self.nrows) {
            if yi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[j] += yi * v;
            }
        }
        out
    }

    /// `a_i' x` for row `i`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }
}

/// Structural problems reported by [`Problem::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("crossed bounds at j={0}")]
    CrossedBounds(usize),
    #[error("non-integral bound on integer variable j={0}")]
    NonIntegralBound(usize),
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("integer index {0} out of range")]
    IntegerIndex(usize),
    #[error("row-major and column-major views disagree")]
    ViewMismatch,
}

/// Outcome of [`Problem::check_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible,
    RowViolated { row: usize, activity: f64, rhs: f64 },
    BoundViolated { var: usize, value: f64 },
    NotIntegral { var: usize, value: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("point has length {got}, problem has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unbounded pseudo solution: best bound infinite for variables {0:?}")]
    UnboundedPseudoSolution(Vec<usize>),
    #[error("infeasible bounds for variable {name}: [{lb}, {ub}]")]
    InfeasibleBounds { name: String, lb: f64, ub: f64 },
    #[error(transparent)]
    Invalid(#[from] Violation),
}

/// A candidate solution with its cached objective value `c'x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub values: Vec<f64>,
    pub objective: f64,
}

impl Point {
    pub fn new(p: &Problem, values: Vec<f64>) -> Self {
        let objective = dot(p.objective(), &values);
        Point { values, objective }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A normalized mixed-integer program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    name: String,
    obj: Vec<f64>,
    obj_offset: f64,
    maximize: bool,
    matrix: SparseMatrix,
    rhs: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    is_int: Vec<bool>,
    int_vars: Vec<usize>,
    var_names: Vec<String>,
    row_names: Vec<String>,
}

impl Problem {
    /// Assembles a problem from already normalized parts without checking invariants; use
    /// [`Problem::validate`] afterwards. Prefer [`ProblemBuilder`].
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        obj: Vec<f64>,
        rows: &[Vec<(usize, f64)>],
        rhs: Vec<f64>,
        lb: Vec<f64>,
        ub: Vec<f64>,
        int_vars: &[usize],
    ) -> Self {
        let n = obj.len();
        let mut is_int = vec![false; n];
        let mut ints: Vec<usize> = int_vars.iter().copied().filter(|&j| j < n).collect();
        ints.sort_unstable();
        ints.dedup();
        for &j in &ints {
            is_int[j] = true;
        }
        let m = rows.len();
        Problem {
            name: String::from("problem"),
            matrix: SparseMatrix::from_rows(n, rows),
            obj_offset: 0.0,
            maximize: false,
            rhs,
            lb,
            ub,
            is_int,
            int_vars: ints,
            var_names: (0..n).map(|j| format!("x{j}")).collect(),
            row_names: (0..m).map(|i| format!("r{i}")).collect(),
            obj,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.obj
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lb
    }

    pub fn upper(&self) -> &[f64] {
        &self.ub
    }

    pub fn is_integer(&self, j: usize) -> bool {
        self.is_int[j]
    }

    /// Sorted indices of the integer variables.
    pub fn integer_vars(&self) -> &[usize] {
        &self.int_vars
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn row_names(&self) -> &[String] {
        &self.row_names
    }

    /// Constant added to `c'x` when reporting (in the original objective sense).
    pub fn objective_offset(&self) -> f64 {
        self.obj_offset
    }

    /// `true` when the source model maximized and `c` was negated.
    pub fn is_maximize(&self) -> bool {
        self.maximize
    }

    /// Converts an internal (minimization) objective value back to the source model's sense.
    pub fn external_objective(&self, internal: f64) -> f64 {
        let v = if self.maximize { -internal } else { internal };
        v + self.obj_offset
    }

    /// `true` if all objective coefficients on integer variables are integral and all continuous
    /// variables have zero cost, so every feasible objective value is integral.
    pub fn has_integral_objective(&self) -> bool {
        self.obj.iter().enumerate().all(|(j, &c)| {
            if self.is_int[j] {
                c == c.round()
            } else {
                c == 0.0
            }
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Returns the first invariant violation, if any.
    pub fn validate(&self) -> Result<(), Violation> {
        let n = self.num_vars();
        let m = self.num_rows();
        for (what, got) in [("lb", self.lb.len()), ("ub", self.ub.len())] {
            if got != n {
                return Err(Violation::Dimension {
                    what,
                    expected: n,
                    got,
                });
            }
        }
        if self.matrix.nrows() != m {
            return Err(Violation::Dimension {
                what: "rows",
                expected: m,
                got: self.matrix.nrows(),
            });
        }
        if self.matrix.ncols() != n {
            return Err(Violation::Dimension {
                what: "columns",
                expected: n,
                got: self.matrix.ncols(),
            });
        }
        if let Some(j) = self.obj.iter().position(|c| !c.is_finite()) {
            return Err(Violation::NonFinite {
                what: "objective",
                index: j,
            });
        }
        if let Some(i) = self.rhs.iter().position(|b| !b.is_finite()) {
            return Err(Violation::NonFinite {
                what: "rhs",
                index: i,
            });
        }
        if let Some(k) = self.matrix.row_val.iter().position(|v| !v.is_finite()) {
            return Err(Violation::NonFinite {
                what: "matrix",
                index: k,
            });
        }
        for j in 0..n {
            if self.lb[j].is_nan() || self.ub[j].is_nan() {
                return Err(Violation::NonFinite {
                    what: "bounds",
                    index: j,
                });
            }
            if self.lb[j] > self.ub[j] {
                return Err(Violation::CrossedBounds(j));
            }
        }
        for &j in &self.int_vars {
            if j >= n {
                return Err(Violation::IntegerIndex(j));
            }
            let integral = |v: f64| !v.is_finite() || v == v.round();
            if !integral(self.lb[j]) || !integral(self.ub[j]) {
                return Err(Violation::NonIntegralBound(j));
            }
        }
        if !self.matrix.views_agree() {
            return Err(Violation::ViewMismatch);
        }
        Ok(())
    }

    /// MIP feasibility of `x` under the global bounds.
    pub fn check_feasible(
        &self,
        x: &[f64],
        feas_tol: f64,
        int_tol: f64,
    ) -> Result<Feasibility, ModelError> {
        if x.len() != self.num_vars() {
            return Err(ModelError::DimensionMismatch {
                expected: self.num_vars(),
                got: x.len(),
            });
        }
        for i in 0..self.num_rows() {
            let (_, vals) = self.matrix.row(i);
            let scale = vals.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            let activity = self.matrix.row_dot(i, x);
            if activity < self.rhs[i] - feas_tol * scale {
                return Ok(Feasibility::RowViolated {
                    row: i,
                    activity,
                    rhs: self.rhs[i],
                });
            }
        }
        for (j, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < self.lb[j] - feas_tol || v > self.ub[j] + feas_tol {
                return Ok(Feasibility::BoundViolated { var: j, value: v });
            }
        }
        for &j in &self.int_vars {
            if (x[j] - x[j].round()).abs() > int_tol {
                return Ok(Feasibility::NotIntegral {
                    var: j,
                    value: x[j],
                });
            }
        }
        Ok(Feasibility::Feasible)
    }

    /// Every variable at its objective-best bound. Zero-cost variables take their lower bound if
    /// finite, else their upper bound if finite, else 0.
    pub fn pseudo_solution(&self) -> Result<Point, ModelError> {
        pseudo_solution_within(self, &self.lb, &self.ub)
    }

    /// Reorders the variables by `perm`: new variable `k` is old variable `perm[k]`.
    pub fn permute_vars(&self, perm: &[usize]) -> Problem {
        let n = self.num_vars();
        assert_eq!(perm.len(), n);
        let mut inv = vec![0usize; n];
        for (k, &old) in perm.iter().enumerate() {
            inv[old] = k;
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..self.num_rows())
            .map(|i| {
                let (cols, vals) = self.matrix.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| (inv[j], v)).collect()
            })
            .collect();
        let ints: Vec<usize> = self.int_vars.iter().map(|&j| inv[j]).collect();
        let mut q = Problem::from_parts(
            perm.iter().map(|&o| self.obj[o]).collect(),
            &rows,
            self.rhs.clone(),
            perm.iter().map(|&o| self.lb[o]).collect(),
            perm.iter().map(|&o| self.ub[o]).collect(),
            &ints,
        );
        q.name = self.name.clone();
        q.obj_offset = self.obj_offset;
        q.maximize = self.maximize;
        q.var_names = perm.iter().map(|&o| self.var_names[o].clone()).collect();
        q.row_names = self.row_names.clone();
        q
    }

    pub(crate) fn set_names(&mut self, vars: Vec<String>, rows: Vec<String>) {
        debug_assert_eq!(vars.len(), self.num_vars());
        debug_assert_eq!(rows.len(), self.num_rows());
        self.var_names = vars;
        self.row_names = rows;
    }

    pub(crate) fn set_objective_meta(&mut self, offset: f64, maximize: bool) {
        self.obj_offset = offset;
        self.maximize = maximize;
    }
}

pub(crate) fn pseudo_solution_within(
    p: &Problem,
    lb: &[f64],
    ub: &[f64],
) -> Result<Point, ModelError> {
    let c = p.objective();
    let mut values = Vec::with_capacity(c.len());
    let mut bad = Vec::new();
    for j in 0..c.len() {
        let v = if c[j] < 0.0 {
            ub[j]
        } else if c[j] > 0.0 || lb[j].is_finite() {
            lb[j]
        } else if ub[j].is_finite() {
            ub[j]
        } else {
            0.0
        };
        if !v.is_finite() {
            bad.push(j);
        }
        values.push(v);
    }
    if !bad.is_empty() {
        return Err(ModelError::UnboundedPseudoSolution(bad));
    }
    Ok(Point::new(p, values))
}

/// Constraint sense accepted by [`ProblemBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        })
    }
}

/// Collects variables and constraints in any sense and normalizes them into a [`Problem`].
#[derive(Debug, Clone, Default)]
pub struct ProblemBuilder {
    name: String,
    maximize: bool,
    obj_offset: f64,
    obj: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    is_int: Vec<bool>,
    var_names: Vec<String>,
    rows: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    row_names: Vec<String>,
}

impl ProblemBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ProblemBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn maximize(&mut self, yes: bool) -> &mut Self {
        self.maximize = yes;
        self
    }

    pub fn objective_offset(&mut self, offset: f64) -> &mut Self {
        self.obj_offset = offset;
        self
    }

    /// Adds a variable and returns its index.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        lb: f64,
        ub: f64,
        integer: bool,
    ) -> usize {
        self.obj.push(cost);
        self.lb.push(lb);
        self.ub.push(ub);
        self.is_int.push(integer);
        self.var_names.push(name.into());
        self.obj.len() - 1
    }

    /// Adds `a'x (sense) rhs`.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coefs: &[(usize, f64)],
        sense: Sense,
        rhs: f64,
    ) -> &mut Self {
        let (lo, hi) = match sense {
            Sense::Ge => (rhs, f64::INFINITY),
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Eq => (rhs, rhs),
        };
        self.add_ranged_row(name, coefs, lo, hi)
    }

    /// Adds `lo <= a'x <= hi`; either side may be infinite.
    pub fn add_ranged_row(
        &mut self,
        name: impl Into<String>,
        coefs: &[(usize, f64)],
        lo: f64,
        hi: f64,
    ) -> &mut Self {
        self.rows.push(coefs.to_vec());
        self.lo.push(lo);
        self.hi.push(hi);
        self.row_names.push(name.into());
        self
    }

    /// Normalizes into `>=` form: `<=` rows are negated, equality and ranged rows become two
    /// rows, a maximization objective is negated, and integer bounds are rounded inward.
    pub fn build(&self) -> Result<Problem, ModelError> {
        let n = self.obj.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut names = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let (lo, hi) = (self.lo[i], self.hi[i]);
            let two_sided = lo.is_finite() && hi.is_finite();
            if lo.is_finite() {
                rows.push(row.clone());
                rhs.push(lo);
                names.push(self.row_names[i].clone());
            }
            if hi.is_finite() {
                rows.push(row.iter().map(|&(j, v)| (j, -v)).collect());
                rhs.push(-hi);
                names.push(if two_sided {
                    format!("{}__neg", self.row_names[i])
                } else {
                    self.row_names[i].clone()
                });
            }
        }
        let mut lb = self.lb.clone();
        let mut ub = self.ub.clone();
        for j in 0..n {
            if self.is_int[j] {
                if lb[j].is_finite() {
                    lb[j] = (lb[j] - INT_TOL).ceil();
                }
                if ub[j].is_finite() {
                    ub[j] = (ub[j] + INT_TOL).floor();
                }
            }
            if lb[j] > ub[j] {
                return Err(ModelError::InfeasibleBounds {
                    name: self.var_names[j].clone(),
                    lb: lb[j],
                    ub: ub[j],
                });
            }
        }
        let obj: Vec<f64> = if self.maximize {
            self.obj.iter().map(|c| -c).collect()
        } else {
            self.obj.clone()
        };
        let ints: Vec<usize> = (0..n).filter(|&j| self.is_int[j]).collect();
        let mut p = Problem::from_parts(obj, &rows, rhs, lb, ub, &ints);
        p.name = self.name.clone();
        p.set_objective_meta(self.obj_offset, self.maximize);
        p.set_names(self.var_names.clone(), names);
        p.validate()?;
        Ok(p)
    }
}
