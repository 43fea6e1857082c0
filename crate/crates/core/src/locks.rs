//! Variable locks of `>=` rows and their weighted combination with conflict locks.

use serde::Serialize;
use thiserror::Error;

use crate::problem::Problem;

/// Per-variable counts of rows that moving the variable down (`down`) or up (`up`) can violate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LockTable {
    pub down: Vec<u32>,
    pub up: Vec<u32>,
}

impl LockTable {
    pub fn new(n: usize) -> Self {
        LockTable {
            down: vec![0; n],
            up: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.down.is_empty()
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) the locks of one `>=` row.
    pub fn apply_row(&mut self, vars: &[usize], coefs: &[f64], sign: i32) {
        for (&j, &a) in vars.iter().zip(coefs) {
            let slot = if a > 0.0 {
                &mut self.down[j]
            } else if a < 0.0 {
                &mut self.up[j]
            } else {
                continue;
            };
            *slot = slot.checked_add_signed(sign).expect("lock count underflow");
        }
    }

    /// Locks of the model rows (the objective cutoff row is not part of the model).
    pub fn of_problem(p: &Problem) -> Self {
        let a = p.matrix();
        compute_locks(p.num_vars(), (0..p.num_rows()).map(|i| a.row(i)))
    }
}

/// Counts positive (down) and negative (up) entries per column over `rows`.
pub fn compute_locks<'r, I>(n: usize, rows: I) -> LockTable
where
    I: IntoIterator<Item = (&'r [usize], &'r [f64])>,
{
    let mut t = LockTable::new(n);
    for (vars, coefs) in rows {
        t.apply_row(vars, coefs, 1);
    }
    t
}

#[derive(Debug, Error, PartialEq)]
pub enum LockError {
    #[error("kappa must lie in [0, 1], got {0}")]
    Kappa(f64),
    #[error("lock tables have lengths {0} and {1}")]
    Length(usize, usize),
}

/// `omega = kappa * conflict + (1 - kappa) * variable` per direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedLocks {
    pub kappa: f64,
    pub up_w: Vec<f64>,
    pub down_w: Vec<f64>,
}

pub fn weighted_locks(
    var: &LockTable,
    conf: &LockTable,
    kappa: f64,
) -> Result<WeightedLocks, LockError> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(LockError::Kappa(kappa));
    }
    if var.len() != conf.len() {
        return Err(LockError::Length(var.len(), conf.len()));
    }
    let mix = |c: &[u32], v: &[u32]| -> Vec<f64> {
        c.iter()
            .zip(v)
            .map(|(&c, &v)| kappa * f64::from(c) + (1.0 - kappa) * f64::from(v))
            .collect()
    };
    Ok(WeightedLocks {
        kappa,
        up_w: mix(&conf.up, &var.up),
        down_w: mix(&conf.down, &var.down),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SparseMatrix;

    fn table(rows: &[Vec<f64>]) -> LockTable {
        let n = rows[0].len();
        let sparse: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        let a = SparseMatrix::from_rows(n, &sparse);
        compute_locks(n, (0..a.nrows()).map(|i| a.row(i)))
    }

    #[test]
    fn counts_signs_per_column() {
        let t = table(&[vec![1.0, -2.0], vec![3.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(t.down, vec![2, 0]);
        assert_eq!(t.up, vec![0, 2]);
        let t = table(&[vec![-2.0, -2.0]]);
        assert_eq!((t.down, t.up), (vec![0, 0], vec![1, 1]));
        let t = compute_locks(3, std::iter::empty());
        assert_eq!(t, LockTable::new(3));
    }

    #[test]
    fn weighted_examples() {
        let var = LockTable {
            down: vec![1],
            up: vec![2],
        };
        let conf = LockTable {
            down: vec![0],
            up: vec![4],
        };
        let w = weighted_locks(&var, &conf, 0.75).unwrap();
        assert_eq!(w.up_w, vec![3.5]);
        let w0 = weighted_locks(&var, &conf, 0.0).unwrap();
        assert_eq!((w0.up_w, w0.down_w), (vec![2.0], vec![1.0]));
        let w1 = weighted_locks(&var, &conf, 1.0).unwrap();
        assert_eq!((w1.up_w, w1.down_w), (vec![4.0], vec![0.0]));
        assert_eq!(
            weighted_locks(&var, &conf, 1.5).unwrap_err(),
            LockError::Kappa(1.5)
        );
    }

    #[test]
    fn remove_row_restores_counts() {
        let mut t = LockTable::new(2);
        t.apply_row(&[0, 1], &[1.0, -1.0], 1);
        t.apply_row(&[0, 1], &[1.0, -1.0], -1);
        assert_eq!(t, LockTable::new(2));
    }
}
