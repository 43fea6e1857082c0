//! Bounded-variable revised simplex (primal two-phase and dual) on `[A -I] w = 0`.
//!
//! Variables `w = (x, r)`: `x` are the structurals with the local bounds, `r_i = a_i'x` are the
//! row logicals bounded by `[b_i, +inf)`. The optional cutoff row is the last logical with
//! coefficients `-c` and bound `[-U, +inf)`.

use super::lu::BasisFactor;
use super::{
    verify_farkas_ray, Basis, CutoffMultiplier, FarkasRay, LocalBounds, LpError, LpOptimum,
    LpOptions, LpOutcome, VarStatus,
};
use crate::problem::{Point, Problem};

const NOT_BASIC: usize = usize::MAX;
const DEGENERATE_STEP: f64 = 1e-12;

struct Lp<'a> {
    p: &'a Problem,
    bounds: &'a LocalBounds,
    n: usize,
    m_model: usize,
    m: usize,
    cutoff: Option<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
}

impl<'a> Lp<'a> {
    fn new(p: &'a Problem, bounds: &'a LocalBounds, cutoff: Option<f64>) -> Self {
        let n = p.num_vars();
        let m_model = p.num_rows();
        let m = m_model + usize::from(cutoff.is_some());
        let mut lower = bounds.lb.clone();
        let mut upper = bounds.ub.clone();
        lower.extend_from_slice(p.rhs());
        upper.extend(std::iter::repeat_n(f64::INFINITY, m_model));
        if let Some(u) = cutoff {
            lower.push(-u);
            upper.push(f64::INFINITY);
        }
        let mut cost = p.objective().to_vec();
        cost.extend(std::iter::repeat_n(0.0, m));
        Lp {
            p,
            bounds,
            n,
            m_model,
            m,
            cutoff,
            lower,
            upper,
            cost,
        }
    }

    fn num_vars(&self) -> usize {
        self.n + self.m
    }

    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            let (rows, vals) = self.p.matrix().col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                f(i, v);
            }
            if self.cutoff.is_some() {
                let c = self.p.objective()[j];
                if c != 0.0 {
                    f(self.m_model, -c);
                }
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_col(j, |i, a| s += a * v[i]);
        s
    }
}

#[derive(Debug)]
enum Stop {
    Optimal,
    /// Row multipliers `pi` with `max_{w in box} (pi'M) w < 0`.
    Infeasible(Vec<f64>),
    Unbounded(Vec<f64>),
}

#[derive(Debug)]
enum Failure {
    IterLimit,
    Numerical(String),
}

struct Engine<'a> {
    lp: &'a Lp<'a>,
    opts: &'a LpOptions,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    pos: Vec<usize>,
    x: Vec<f64>,
    factor: BasisFactor,
    iters: usize,
    bland: bool,
    degenerate_run: usize,
}

fn slack_basis(lp: &Lp) -> (Vec<usize>, Vec<VarStatus>) {
    let head: Vec<usize> = (lp.n..lp.n + lp.m).collect();
    let mut status = vec![VarStatus::Basic; lp.num_vars()];
    for (j, st) in status.iter_mut().enumerate().take(lp.n) {
        let (l, u, c) = (lp.lower[j], lp.upper[j], lp.cost[j]);
        *st = if c < 0.0 && u.is_finite() {
            VarStatus::AtUpper
        } else if l.is_finite() {
            VarStatus::AtLower
        } else if u.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        };
    }
    (head, status)
}

fn warm_basis(lp: &Lp, b: &Basis) -> Option<(Vec<usize>, Vec<VarStatus>)> {
    let nv = lp.num_vars();
    let (mut head, mut status) = (b.head.clone(), b.status.clone());
    if status.len() + 1 == nv && head.len() + 1 == lp.m && lp.cutoff.is_some() {
        head.push(nv - 1);
        status.push(VarStatus::Basic);
    }
    if status.len() != nv || head.len() != lp.m {
        return None;
    }
    let basic = status.iter().filter(|s| **s == VarStatus::Basic).count();
    if basic != lp.m || head.iter().any(|&j| j >= nv || status[j] != VarStatus::Basic) {
        return None;
    }
    Some((head, status))
}

impl<'a> Engine<'a> {
    fn new(lp: &'a Lp<'a>, opts: &'a LpOptions, warm: Option<&Basis>, bland: bool) -> Self {
        let start = warm.and_then(|b| warm_basis(lp, b));
        let (mut head, mut status) = start.unwrap_or_else(|| slack_basis(lp));
        let factor = match Self::factor_for(lp, &head) {
            Some(f) => f,
            None => {
                (head, status) = slack_basis(lp);
                Self::factor_for(lp, &head).expect("slack basis is nonsingular")
            }
        };
        let mut eng = Engine {
            lp,
            opts,
            head,
            status,
            pos: vec![NOT_BASIC; lp.num_vars()],
            x: vec![0.0; lp.num_vars()],
            factor,
            iters: 0,
            bland,
            degenerate_run: 0,
        };
        for (k, &j) in eng.head.iter().enumerate() {
            eng.pos[j] = k;
        }
        for j in 0..lp.num_vars() {
            eng.fix_status(j);
        }
        eng
    }

    fn factor_for(lp: &Lp, head: &[usize]) -> Option<BasisFactor> {
        BasisFactor::factorize(lp.m, |k, col| lp.for_col(head[k], |i, a| col[i] = a)).ok()
    }

    /// Makes a nonbasic status consistent with the current (finite or infinite) bounds.
    fn fix_status(&mut self, j: usize) {
        let (l, u) = (self.lp.lower[j], self.lp.upper[j]);
        let st = &mut self.status[j];
        *st = match *st {
            VarStatus::Basic => VarStatus::Basic,
            VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
            VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if u.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        };
    }

    fn refactor(&mut self) -> Result<(), Failure> {
        match Self::factor_for(self.lp, &self.head) {
            Some(f) => {
                self.factor = f;
                Ok(())
            }
            None => Err(Failure::Numerical("singular basis on refactorization".into())),
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lp.lower[j],
            VarStatus::AtUpper => self.lp.upper[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    fn compute_primal(&mut self) {
        let mut rhs = vec![0.0; self.lp.m];
        for j in 0..self.lp.num_vars() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                self.lp.for_col(j, |i, a| rhs[i] -= a * v);
            }
        }
        self.factor.ftran(&mut rhs);
        for (k, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    fn basic_costs(&self) -> Vec<f64> {
        self.head.iter().map(|&j| self.lp.cost[j]).collect()
    }

    fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        self.factor.btran(&mut c);
        c
    }

    fn ftran_col(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.lp.m];
        self.lp.for_col(j, |i, a| v[i] = a);
        self.factor.ftran(&mut v);
        v
    }

    fn pivot(
        &mut self,
        row: usize,
        entering: usize,
        alpha: &[f64],
        leaving_to: VarStatus,
    ) -> Result<(), Failure> {
        let leaving = self.head[row];
        self.status[leaving] = leaving_to;
        self.pos[leaving] = NOT_BASIC;
        self.head[row] = entering;
        self.status[entering] = VarStatus::Basic;
        self.pos[entering] = row;
        self.iters += 1;
        if self.factor.num_updates() + 1 >= self.opts.refactor_interval {
            self.refactor()
        } else {
            self.factor.update(row, alpha);
            Ok(())
        }
    }

    fn check_iters(&self) -> Result<(), Failure> {
        if self.iters >= self.opts.iter_limit {
            Err(Failure::IterLimit)
        } else {
            Ok(())
        }
    }

    fn note_step(&mut self, step: f64) {
        if step <= DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run > 2 * self.lp.num_vars() {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lp.lower[j] == self.lp.upper[j]
    }

    /// Flips boxed nonbasics to their dual feasible bound; `false` if some unboxed nonbasic is
    /// dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let pi = self.btran(self.basic_costs());
        let tol = self.opts.dual_tol;
        for j in 0..self.lp.num_vars() {
            let st = self.status[j];
            if st == VarStatus::Basic {
                continue;
            }
            let d = self.lp.cost[j] - self.lp.col_dot(j, &pi);
            let (l, u) = (self.lp.lower[j], self.lp.upper[j]);
            match st {
                VarStatus::AtLower if d < -tol => {
                    if u.is_finite() {
                        self.status[j] = VarStatus::AtUpper;
                    } else {
                        return false;
                    }
                }
                VarStatus::AtUpper if d > tol => {
                    if l.is_finite() {
                        self.status[j] = VarStatus::AtLower;
                    } else {
                        return false;
                    }
                }
                VarStatus::Free if d.abs() > tol => return false,
                _ => {}
            }
        }
        true
    }

    fn dual(&mut self) -> Result<Stop, Failure> {
        let ftol = self.opts.feas_tol;
        let dtol = self.opts.dual_tol;
        let ptol = self.opts.pivot_tol;
        loop {
            self.check_iters()?;
            self.compute_primal();
            let mut leave: Option<(usize, f64, bool)> = None;
            for (k, &i) in self.head.iter().enumerate() {
                let v = self.x[i];
                let (amount, below) = if v < self.lp.lower[i] - ftol {
                    (self.lp.lower[i] - v, true)
                } else if v > self.lp.upper[i] + ftol {
                    (v - self.lp.upper[i], false)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((kb, ab, _)) => {
                        if self.bland {
                            i < self.head[kb]
                        } else {
                            amount > ab
                        }
                    }
                };
                if better {
                    leave = Some((k, amount, below));
                }
            }
            let Some((r, _, below)) = leave else {
                return Ok(Stop::Optimal);
            };
            let pi = self.btran(self.basic_costs());
            let mut unit = vec![0.0; self.lp.m];
            unit[r] = 1.0;
            let rho = self.btran(unit);

            // (var, |alpha|, ratio, dual slack)
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..self.lp.num_vars() {
                let st = self.status[j];
                if st == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = self.lp.col_dot(j, &rho);
                if a.abs() <= ptol {
                    continue;
                }
                let d = self.lp.cost[j] - self.lp.col_dot(j, &pi);
                let slack = match st {
                    VarStatus::AtLower if (below && a < 0.0) || (!below && a > 0.0) => d.max(0.0),
                    VarStatus::AtUpper if (below && a > 0.0) || (!below && a < 0.0) => {
                        (-d).max(0.0)
                    }
                    VarStatus::Free => d.abs(),
                    _ => continue,
                };
                cands.push((j, a.abs(), slack));
            }
            if cands.is_empty() {
                let ray = if below {
                    rho.iter().map(|v| -v).collect()
                } else {
                    rho
                };
                return Ok(Stop::Infeasible(ray));
            }
            let (q, step) = if self.bland {
                let mut best = cands[0];
                for &c in &cands[1..] {
                    let (rc, rb) = (c.2 / c.1, best.2 / best.1);
                    if rc < rb - 1e-12 || (rc <= rb + 1e-12 && c.0 < best.0) {
                        best = c;
                    }
                }
                (best.0, best.2 / best.1)
            } else {
                let bound = cands
                    .iter()
                    .map(|c| (c.2 + dtol) / c.1)
                    .fold(f64::INFINITY, f64::min);
                let best = cands
                    .iter()
                    .filter(|c| c.2 / c.1 <= bound)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .copied()
                    .unwrap_or(cands[0]);
                (best.0, best.2 / best.1)
            };
            let alpha = self.ftran_col(q);
            if alpha[r].abs() <= ptol {
                self.refactor()?;
                let alpha = self.ftran_col(q);
                if alpha[r].abs() <= ptol {
                    return Err(Failure::Numerical("dual pivot element vanished".into()));
                }
            }
            self.note_step(step);
            let to = if below {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.pivot(r, q, &alpha, to)?;
        }
    }

    fn primal(&mut self) -> Result<Stop, Failure> {
        let ftol = self.opts.feas_tol;
        let dtol = self.opts.dual_tol;
        let ptol = self.opts.pivot_tol;
        loop {
            self.check_iters()?;
            self.compute_primal();
            let m = self.lp.m;
            let mut cb = vec![0.0; m];
            let mut phase1 = false;
            for (k, &i) in self.head.iter().enumerate() {
                let v = self.x[i];
                if v < self.lp.lower[i] - ftol {
                    cb[k] = -1.0;
                    phase1 = true;
                } else if v > self.lp.upper[i] + ftol {
                    cb[k] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                cb = self.basic_costs();
            }
            let pi = self.btran(cb.clone());

            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.lp.num_vars() {
                let st = self.status[j];
                if st == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.lp.cost[j] };
                let d = cj - self.lp.col_dot(j, &pi);
                let dir = match st {
                    VarStatus::AtLower if d < -dtol => 1.0,
                    VarStatus::AtUpper if d > dtol => -1.0,
                    VarStatus::Free if d.abs() > dtol => -d.signum(),
                    _ => continue,
                };
                if enter.is_none_or(|(_, _, s)| d.abs() > s) {
                    enter = Some((j, dir, d.abs()));
                }
                if self.bland {
                    break;
                }
            }
            let Some((q, dir, _)) = enter else {
                return Ok(if phase1 {
                    Stop::Infeasible(pi)
                } else {
                    Stop::Optimal
                });
            };
            let alpha = self.ftran_col(q);

            // (basis position, distance, rate, status on leaving)
            let mut cands: Vec<(usize, f64, f64, VarStatus)> = Vec::new();
            for (k, &i) in self.head.iter().enumerate() {
                let a = alpha[k];
                if a.abs() <= ptol {
                    continue;
                }
                let delta = -dir * a;
                let v = self.x[i];
                let (l, u) = (self.lp.lower[i], self.lp.upper[i]);
                if phase1 && v < l - ftol {
                    if delta > 0.0 {
                        cands.push((k, l - v, delta, VarStatus::AtLower));
                    }
                } else if phase1 && v > u + ftol {
                    if delta < 0.0 {
                        cands.push((k, v - u, -delta, VarStatus::AtUpper));
                    }
                } else if delta < 0.0 && l.is_finite() {
                    cands.push((k, (v - l).max(0.0), -delta, VarStatus::AtLower));
                } else if delta > 0.0 && u.is_finite() {
                    cands.push((k, (u - v).max(0.0), delta, VarStatus::AtUpper));
                }
            }
            let chosen = if cands.is_empty() {
                None
            } else if self.bland {
                let mut best = cands[0];
                for &c in &cands[1..] {
                    let (rc, rb) = (c.1 / c.2, best.1 / best.2);
                    if rc < rb - 1e-12 || (rc <= rb + 1e-12 && self.head[c.0] < self.head[best.0])
                    {
                        best = c;
                    }
                }
                Some(best)
            } else {
                let bound = cands
                    .iter()
                    .map(|c| (c.1 + ftol) / c.2)
                    .fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 / c.2 <= bound)
                    .max_by(|a, b| a.2.total_cmp(&b.2))
                    .copied()
            };
            let (l, u) = (self.lp.lower[q], self.lp.upper[q]);
            let flip = if l.is_finite() && u.is_finite() {
                Some(u - l)
            } else {
                None
            };
            let step = chosen.map(|c| c.1 / c.2);
            match (chosen, flip) {
                (_, Some(f)) if step.is_none_or(|s| f <= s) => {
                    self.status[q] = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.iters += 1;
                    self.note_step(f);
                }
                (Some((k, _, _, to)), _) => {
                    self.note_step(step.unwrap_or(0.0));
                    self.pivot(k, q, &alpha, to)?;
                }
                (None, _) => {
                    if phase1 {
                        return Err(Failure::Numerical("unbounded phase-1 step".into()));
                    }
                    let mut dirv = vec![0.0; self.lp.n];
                    if q < self.lp.n {
                        dirv[q] = dir;
                    }
                    for (k, &i) in self.head.iter().enumerate() {
                        if i < self.lp.n {
                            dirv[i] = -dir * alpha[k];
                        }
                    }
                    return Ok(Stop::Unbounded(dirv));
                }
            }
        }
    }

    fn run(&mut self) -> Result<Stop, Failure> {
        if self.make_dual_feasible() {
            match self.dual()? {
                // the primal pass confirms optimality and repairs lost dual feasibility
                Stop::Optimal => self.primal(),
                other => Ok(other),
            }
        } else {
            self.primal()
        }
    }

    fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            status: self.status.clone(),
        }
    }

    fn optimum(&mut self) -> Result<LpOutcome, Failure> {
        self.compute_primal();
        let lp = self.lp;
        let pi = self.btran(self.basic_costs());
        let values: Vec<f64> = self.x[..lp.n].to_vec();
        let reduced: Vec<f64> = (0..lp.n)
            .map(|j| {
                if self.status[j] == VarStatus::Basic {
                    0.0
                } else {
                    lp.cost[j] - lp.col_dot(j, &pi)
                }
            })
            .collect();
        let tol = 2.0 * self.opts.feas_tol;
        for i in 0..lp.m_model {
            let (_, vals) = lp.p.matrix().row(i);
            let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if lp.p.matrix().row_dot(i, &values) < lp.p.rhs()[i] - tol * scale {
                return Err(Failure::Numerical(format!("row {i} violated at optimum")));
            }
        }
        for j in 0..lp.n {
            if values[j] < lp.lower[j] - tol || values[j] > lp.upper[j] + tol {
                return Err(Failure::Numerical(format!("bound of {j} violated at optimum")));
            }
        }
        Ok(LpOutcome::Optimal(LpOptimum {
            x: Point::new(lp.p, values),
            duals: pi[..lp.m_model].to_vec(),
            cutoff_dual: if lp.cutoff.is_some() { pi[lp.m_model] } else { 0.0 },
            reduced_costs: reduced,
            basis: self.basis(),
            iterations: self.iters,
        }))
    }

    fn farkas(&self, pi: &[f64]) -> Result<LpOutcome, Failure> {
        let lp = self.lp;
        let mut y: Vec<f64> = pi[..lp.m_model].iter().map(|v| v.max(0.0)).collect();
        let mut w = lp.cutoff.map(|_| pi[lp.m_model].max(0.0)).unwrap_or(0.0);
        let scale = y.iter().copied().fold(w, f64::max);
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Failure::Numerical("degenerate Farkas multipliers".into()));
        }
        y.iter_mut().for_each(|v| *v /= scale);
        w /= scale;
        let cutoff = match lp.cutoff {
            Some(bound) if w > 0.0 => Some(CutoffMultiplier { weight: w, bound }),
            _ => None,
        };
        let mut ray = FarkasRay {
            y,
            s: Vec::new(),
            cutoff,
        };
        let row = ray.aggregated_row(lp.p);
        ray.s = row
            .iter()
            .enumerate()
            .map(|(j, &a)| {
                let s = -a;
                if s.abs() < 1e-11
                    || (s > 0.0 && !lp.bounds.lb[j].is_finite())
                    || (s < 0.0 && !lp.bounds.ub[j].is_finite())
                {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        verify_farkas_ray(lp.p, lp.bounds, &ray, self.opts.farkas_tol)
            .map_err(|e| Failure::Numerical(format!("invalid Farkas ray: {e}")))?;
        Ok(LpOutcome::Infeasible {
            ray,
            iterations: self.iters,
        })
    }
}

fn attempt(lp: &Lp, warm: Option<&Basis>, opts: &LpOptions, bland: bool) -> Result<LpOutcome, Failure> {
    let mut eng = Engine::new(lp, opts, warm, bland);
    match eng.run()? {
        Stop::Optimal => eng.optimum(),
        Stop::Infeasible(pi) => eng.farkas(&pi),
        Stop::Unbounded(direction) => Ok(LpOutcome::Unbounded {
            direction,
            iterations: eng.iters,
        }),
    }
}

pub(super) fn solve(
    p: &Problem,
    bounds: &LocalBounds,
    cutoff: Option<f64>,
    warm: Option<&Basis>,
    opts: &LpOptions,
) -> Result<LpOutcome, LpError> {
    let lp = Lp::new(p, bounds, cutoff);
    match attempt(&lp, warm, opts, false) {
        Ok(out) => return Ok(out),
        Err(Failure::IterLimit) => return Err(LpError::IterationLimit(opts.iter_limit)),
        Err(Failure::Numerical(msg)) => {
            log::debug!("simplex retry from slack basis with Bland's rule: {msg}");
        }
    }
    match attempt(&lp, None, opts, true) {
        Ok(out) => Ok(out),
        Err(Failure::IterLimit) => Err(LpError::IterationLimit(opts.iter_limit)),
        Err(Failure::Numerical(msg)) => Err(LpError::Numerical(msg)),
    }
}
