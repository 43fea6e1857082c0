//! LP-based branch and bound with Farkas and conflict diving.

pub mod bnb;
pub mod conflict;
pub mod diving;
pub mod harness;
pub mod heuristics;
pub mod instances;
pub mod locks;
pub mod mps;
pub mod lp;
pub mod problem;
pub mod propagation;

pub use problem::{Feasibility, ModelError, Point, Problem, ProblemBuilder, Sense, SparseMatrix};
