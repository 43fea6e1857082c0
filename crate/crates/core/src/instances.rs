//! Seeded random MIP families for tests and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problem::{Problem, ProblemBuilder, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MipParams {
    pub binaries: usize,
    pub continuous: usize,
    pub rows: usize,
    /// Probability that a variable appears in a row.
    pub density: f64,
    /// Coefficients are nonzero integers in `[-coef_range, coef_range]`.
    pub coef_range: i32,
    /// Objective coefficients are integers in `[-obj_range, obj_range]`.
    pub obj_range: i32,
    /// Maximum slack of each row at the hidden point; 0 makes every row tight there.
    pub max_slack: i32,
    /// Rows are built around a hidden binary point, so the instance is feasible.
    pub planted: bool,
}

impl Default for MipParams {
    fn default() -> Self {
        MipParams {
            binaries: 10,
            continuous: 0,
            rows: 6,
            density: 0.5,
            coef_range: 9,
            obj_range: 10,
            max_slack: 6,
            planted: true,
        }
    }
}

fn nonzero(rng: &mut ChaCha8Rng, range: i32) -> f64 {
    let v = rng.gen_range(1..=range);
    f64::from(if rng.gen_bool(0.5) { v } else { -v })
}

/// A MIP with randomly signed `<=`/`>=` rows.
pub fn random_mip(seed: u64, params: &MipParams) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ProblemBuilder::new(format!("rand_{seed}"));
    let nb = params.binaries;
    let n = nb + params.continuous;
    for j in 0..nb {
        let c = f64::from(rng.gen_range(-params.obj_range..=params.obj_range));
        b.add_var(format!("x{j}"), c, 0.0, 1.0, true);
    }
    for j in 0..params.continuous {
        let c = f64::from(rng.gen_range(-params.obj_range..=params.obj_range)) / 2.0;
        b.add_var(format!("y{j}"), c, 0.0, f64::from(rng.gen_range(1..=5)), false);
    }
    let hidden: Vec<f64> = (0..n)
        .map(|j| {
            if j < nb {
                f64::from(u8::from(rng.gen_bool(0.5)))
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..params.rows {
        let mut coefs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(params.density) {
                coefs.push((j, nonzero(&mut rng, params.coef_range)));
            }
        }
        if coefs.is_empty() {
            let j = rng.gen_range(0..n);
            coefs.push((j, nonzero(&mut rng, params.coef_range)));
        }
        let act: f64 = if params.planted {
            coefs.iter().map(|&(j, a)| a * hidden[j]).sum()
        } else {
            let pos: f64 = coefs.iter().map(|&(_, a)| a.max(0.0)).sum();
            let neg: f64 = coefs.iter().map(|&(_, a)| a.min(0.0)).sum();
            f64::from(rng.gen_range(neg as i32..=pos as i32))
        };
        let slack = f64::from(rng.gen_range(0..=params.max_slack));
        if rng.gen_bool(0.5) {
            b.add_row(format!("r{i}"), &coefs, Sense::Le, act + slack);
        } else {
            b.add_row(format!("r{i}"), &coefs, Sense::Ge, act - slack);
        }
    }
    b.build().expect("generated bounds are consistent")
}

/// Binary instances with `lo..=hi` variables and about `n/2` rows, one per seed.
pub fn signed_binary_suite(count: usize, lo: usize, hi: usize, seed: u64) -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let binaries = rng.gen_range(lo..=hi);
            let params = MipParams {
                binaries,
                rows: binaries / 2,
                density: (8.0 / binaries as f64).clamp(0.05, 0.5),
                max_slack: 4,
                ..MipParams::default()
            };
            random_mip(seed.wrapping_mul(1000).wrapping_add(k as u64), &params)
                .with_name(format!("signed_{seed}_{k}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_point_is_feasible() {
        for seed in 0..20 {
            let p = random_mip(seed, &MipParams::default());
            assert!(p.validate().is_ok());
            assert_eq!(p.num_vars(), 10);
            // the planted point is one of the 2^10 binary vectors
            let feasible = (0u32..1 << 10).any(|mask| {
                let x: Vec<f64> = (0..10).map(|j| f64::from((mask >> j) & 1)).collect();
                p.check_feasible(&x, 1e-9, 1e-9).unwrap().is_feasible()
            });
            assert!(feasible, "seed {seed}");
        }
    }

    #[test]
    fn deterministic() {
        let a = random_mip(7, &MipParams::default());
        let b = random_mip(7, &MipParams::default());
        assert_eq!(a, b);
        let s = signed_binary_suite(3, 30, 80, 1);
        assert!(s.iter().all(|p| (30..=80).contains(&p.num_vars())));
    }
}
