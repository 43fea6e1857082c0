//! Exhaustive oracles and random instance families shared by the integration tests.
#![allow(dead_code)]

use mipdive::lp::LocalBounds;
use mipdive::Problem;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All integer points within the global bounds of a problem whose integer variables have
/// small finite domains and which has no continuous variables.
pub fn integer_points(p: &Problem) -> Vec<Vec<f64>> {
    let n = p.num_vars();
    assert_eq!(p.integer_vars().len(), n, "pure integer problems only");
    let mut out = Vec::new();
    let mut x: Vec<f64> = p.lower().to_vec();
    loop {
        out.push(x.clone());
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            if x[k] < p.upper()[k] {
                x[k] += 1.0;
                break;
            }
            x[k] = p.lower()[k];
            k += 1;
        }
    }
}

pub fn feasible_points(p: &Problem) -> Vec<Vec<f64>> {
    integer_points(p)
        .into_iter()
        .filter(|x| p.check_feasible(x, 1e-9, 1e-9).unwrap().is_feasible())
        .collect()
}

/// Optimal value by enumeration (pure integer problems), `None` if infeasible.
pub fn brute_force(p: &Problem) -> Option<f64> {
    feasible_points(p)
        .iter()
        .map(|x| x.iter().zip(p.objective()).map(|(a, b)| a * b).sum::<f64>())
        .min_by(f64::total_cmp)
}

/// Solves the square system `m x = r` by Gaussian elimination; `None` if singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs()))?;
        if m[piv][k].abs() < 1e-9 {
            return None;
        }
        m.swap(k, piv);
        r.swap(k, piv);
        for i in 0..n {
            if i != k {
                let f = m[i][k] / m[k][k];
                for c in k..n {
                    m[i][c] -= f * m[k][c];
                }
                r[i] -= f * r[k];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

/// LP optimum over `bounds` by enumerating vertices (all bounds finite). `None` if infeasible.
pub fn vertex_enumeration(p: &Problem, bounds: &LocalBounds) -> Option<f64> {
    let n = p.num_vars();
    let a = p.matrix();
    // each constraint as (coefs, rhs) in >= form, including bounds
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..p.num_rows() {
        let mut row = vec![0.0; n];
        let (v, c) = a.row(i);
        for (&j, &x) in v.iter().zip(c) {
            row[j] = x;
        }
        cons.push((row, p.rhs()[i]));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), bounds.lb[j]));
        cons.push((e.iter().map(|v| -v).collect(), -bounds.ub[j]));
    }
    let mut best: Option<f64> = None;
    let k = cons.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| cons[i].0.clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&i| cons[i].1).collect();
        if let Some(x) = solve_square(m, r) {
            let ok = cons.iter().all(|(row, rhs)| {
                let act: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                act >= rhs - 1e-7 * (1.0 + rhs.abs())
            });
            if ok {
                let obj: f64 = x.iter().zip(p.objective()).map(|(a, b)| a * b).sum();
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Random dense LP with `n` variables in finite boxes and `m` rows.
pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Problem {
    let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|_| (0..n).map(|j| (j, rng.gen_range(-5..=5) as f64)).collect())
        .collect();
    let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-8..=4) as f64).collect();
    let lb: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=0) as f64).collect();
    let ub: Vec<f64> = lb.iter().map(|l| l + rng.gen_range(1..=4) as f64).collect();
    Problem::from_parts(obj, &rows, rhs, lb, ub, &[])
}
