//! Rounding and scoring rules of Farkas, coefficient and conflict diving.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::locks::{LockTable, WeightedLocks};
use crate::lp::LocalBounds;

/// Score factor for zero-objective candidates in Farkas diving.
pub const ZERO_OBJ_EPS: f64 = 1e-6;
pub const DEFAULT_KAPPA: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Up,
    Down,
}

pub fn fractionality(v: f64) -> f64 {
    v - v.floor()
}

/// Distance from `phi` to the rounding target in direction `dir`.
pub fn relative_fractionality(phi: f64, dir: Direction) -> f64 {
    match dir {
        Direction::Up => 1.0 - phi,
        Direction::Down => phi,
    }
}

/// `ceil(x) - lb` for `c < 0`, `ub - floor(x)` for `c > 0`; `None` for `c = 0` or an infinite bound.
pub fn dual_impact(c: f64, x: f64, lb: f64, ub: f64) -> Option<f64> {
    let d = if c < 0.0 {
        x.ceil() - lb
    } else if c > 0.0 {
        ub - x.floor()
    } else {
        return None;
    };
    d.is_finite().then_some(d)
}

pub fn farkas_round(c: f64, phi: f64) -> Direction {
    if c < 0.0 || (c == 0.0 && phi >= 0.5) {
        Direction::Up
    } else {
        Direction::Down
    }
}

/// `|c| * delta * phi'`; zero objective gives `eps * phi'`, infinite bound gives `delta = 1`.
pub fn farkas_score(c: f64, delta: Option<f64>, rel_frac: f64) -> f64 {
    if c == 0.0 {
        ZERO_OBJ_EPS * rel_frac
    } else {
        c.abs() * delta.unwrap_or(1.0) * rel_frac
    }
}

/// Direction with fewer locks, ties by fractionality; score is the lock count in that direction.
pub fn coef_round(down: f64, up: f64, phi: f64) -> Direction {
    if up < down || (up == down && phi >= 0.5) {
        Direction::Up
    } else {
        Direction::Down
    }
}

/// Direction with more weighted locks, ties by fractionality.
pub fn conflict_round(down_w: f64, up_w: f64, phi: f64) -> Direction {
    if up_w > down_w || (up_w == down_w && phi >= 0.5) {
        Direction::Up
    } else {
        Direction::Down
    }
}

pub fn locks_in(dir: Direction, down: f64, up: f64) -> f64 {
    match dir {
        Direction::Up => up,
        Direction::Down => down,
    }
}

/// What a heuristic sees when ranking a candidate.
#[derive(Debug, Clone, Copy)]
pub struct DiveContext<'a> {
    pub c: &'a [f64],
    pub x: &'a [f64],
    pub bounds: &'a LocalBounds,
    pub vlocks: &'a LockTable,
    pub wlocks: &'a WeightedLocks,
}

impl DiveContext<'_> {
    pub fn phi(&self, j: usize) -> f64 {
        fractionality(self.x[j])
    }
}

/// Rounding direction and score of a diving heuristic. Higher scores are selected first.
pub trait DiveHeuristic: Sync {
    fn name(&self) -> &'static str;
    fn round(&self, j: usize, ctx: &DiveContext<'_>) -> Direction;
    fn score(&self, j: usize, dir: Direction, ctx: &DiveContext<'_>) -> f64;
    /// Whether integer candidates without any lock and with `c_j != 0` are set to their best
    /// bound before the dive starts.
    fn fixes_unlocked_first(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FarkasDiving;

impl DiveHeuristic for FarkasDiving {
    fn name(&self) -> &'static str {
        "farkas"
    }

    fn round(&self, j: usize, ctx: &DiveContext<'_>) -> Direction {
        farkas_round(ctx.c[j], ctx.phi(j))
    }

    fn score(&self, j: usize, dir: Direction, ctx: &DiveContext<'_>) -> f64 {
        let c = ctx.c[j];
        let delta = dual_impact(c, ctx.x[j], ctx.bounds.lb[j], ctx.bounds.ub[j]);
        farkas_score(c, delta, relative_fractionality(ctx.phi(j), dir))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CoefficientDiving;

impl DiveHeuristic for CoefficientDiving {
    fn name(&self) -> &'static str {
        "coef"
    }

    fn round(&self, j: usize, ctx: &DiveContext<'_>) -> Direction {
        let l = ctx.vlocks;
        coef_round(f64::from(l.down[j]), f64::from(l.up[j]), ctx.phi(j))
    }

    fn score(&self, j: usize, dir: Direction, ctx: &DiveContext<'_>) -> f64 {
        let l = ctx.vlocks;
        locks_in(dir, f64::from(l.down[j]), f64::from(l.up[j]))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConflictDiving;

impl DiveHeuristic for ConflictDiving {
    fn name(&self) -> &'static str {
        "conflict"
    }

    fn round(&self, j: usize, ctx: &DiveContext<'_>) -> Direction {
        let w = ctx.wlocks;
        conflict_round(w.down_w[j], w.up_w[j], ctx.phi(j))
    }

    fn score(&self, j: usize, dir: Direction, ctx: &DiveContext<'_>) -> f64 {
        let w = ctx.wlocks;
        locks_in(dir, w.down_w[j], w.up_w[j])
    }

    fn fixes_unlocked_first(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Farkas,
    Coef,
    Conflict,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 3] = [HeuristicKind::Farkas, HeuristicKind::Coef, HeuristicKind::Conflict];

    pub fn rule(self) -> &'static dyn DiveHeuristic {
        match self {
            HeuristicKind::Farkas => &FarkasDiving,
            HeuristicKind::Coef => &CoefficientDiving,
            HeuristicKind::Conflict => &ConflictDiving,
        }
    }

    pub fn name(self) -> &'static str {
        self.rule().name()
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown heuristic '{0}' (expected farkas, coef or conflict)")]
pub struct UnknownHeuristic(pub String);

impl FromStr for HeuristicKind {
    type Err = UnknownHeuristic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "farkas" | "farkasdiving" => Ok(HeuristicKind::Farkas),
            "coef" | "coefficient" | "coefdiving" => Ok(HeuristicKind::Coef),
            "conflict" | "confdiving" => Ok(HeuristicKind::Conflict),
            _ => Err(UnknownHeuristic(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locks::weighted_locks;

    #[test]
    fn dual_impact_examples() {
        assert_eq!(dual_impact(2.0, 3.4, 0.0, 7.0), Some(4.0));
        assert_eq!(dual_impact(-1.0, 3.4, 0.0, 10.0), Some(4.0));
        assert_eq!(dual_impact(-1.0, 1.0, 1.0, 5.0), Some(0.0));
        assert_eq!(dual_impact(0.0, 1.5, 0.0, 5.0), None);
        assert_eq!(dual_impact(1.0, 1.5, 0.0, f64::INFINITY), None);
    }

    #[test]
    fn farkas_rules() {
        assert_eq!(farkas_round(-1.0, 0.1), Direction::Up);
        assert_eq!(farkas_round(0.0, 0.5), Direction::Up);
        assert_eq!(farkas_round(3.0, 0.9), Direction::Down);
        assert!((farkas_score(2.0, Some(4.0), 0.6) - 4.8).abs() < 1e-12);
        assert!((farkas_score(0.0, None, 0.3) - 3e-7).abs() < 1e-12);
        assert!((farkas_score(-3.0, None, 0.5) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn e4_farkas_scores_tie() {
        let c = [-1.0, -1.0];
        let x = [0.75, 0.75];
        let b = LocalBounds {
            lb: vec![0.0, 0.0],
            ub: vec![1.0, 1.0],
        };
        let v = LockTable::new(2);
        let w = weighted_locks(&v, &v, 0.75).unwrap();
        let ctx = DiveContext {
            c: &c,
            x: &x,
            bounds: &b,
            vlocks: &v,
            wlocks: &w,
        };
        for j in 0..2 {
            let d = FarkasDiving.round(j, &ctx);
            assert_eq!(d, Direction::Up);
            assert!((FarkasDiving.score(j, d, &ctx) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn coef_rules() {
        assert_eq!(coef_round(2.0, 0.0, 0.3), Direction::Up);
        assert_eq!(locks_in(Direction::Up, 2.0, 0.0), 0.0);
        assert_eq!(coef_round(3.0, 3.0, 0.2), Direction::Down);
        assert_eq!(locks_in(Direction::Down, 3.0, 3.0), 3.0);
        assert_eq!(coef_round(0.0, 0.0, 0.7), Direction::Up);
        assert_eq!(coef_round(0.0, 0.0, 0.3), Direction::Down);
    }

    #[test]
    fn conflict_rules() {
        assert_eq!(conflict_round(1.0, 3.5, 0.1), Direction::Up);
        assert_eq!(conflict_round(2.0, 2.0, 0.4), Direction::Down);
        assert_eq!(locks_in(Direction::Up, 1.0, 3.5), 3.5);
        assert_eq!(locks_in(Direction::Down, 0.0, 3.5), 0.0);
        // with kappa = 0 the rule is the reverse of coefficient rounding when locks differ
        for (d, u) in [(1.0, 2.0), (3.0, 0.0)] {
            assert_ne!(conflict_round(d, u, 0.5), coef_round(d, u, 0.5));
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("farkas".parse(), Ok(HeuristicKind::Farkas));
        assert_eq!(" Coef".parse(), Ok(HeuristicKind::Coef));
        assert_eq!("conflict".parse(), Ok(HeuristicKind::Conflict));
        assert!("fractional".parse::<HeuristicKind>().is_err());
        assert_eq!(HeuristicKind::Conflict.to_string(), "conflict");
    }
}
