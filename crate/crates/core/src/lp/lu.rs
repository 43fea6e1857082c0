//! Dense LU factorization of the simplex basis with product-form (eta) updates.

/// Pivot magnitude below which a basis is treated as singular during factorization.
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
struct Eta {
    row: usize,
    /// Column of `E` at position `row`: `1/alpha_r` on `row`, `-alpha_i/alpha_r` elsewhere.
    col: Vec<(usize, f64)>,
    diag: f64,
}

/// `B = P' L U` with unit lower-triangular `L`, followed by a list of eta updates.
#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    dim: usize,
    lu: Vec<f64>,
    /// `perm[k]` is the original row placed at position `k`.
    perm: Vec<usize>,
    etas: Vec<Eta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular {
    /// First basis position whose column was found dependent.
    pub position: usize,
}

impl BasisFactor {
    /// Factorizes the `dim x dim` matrix whose column `k` is produced by `fill(k, &mut col)`.
    pub fn factorize<F>(dim: usize, mut fill: F) -> Result<Self, Singular>
    where
        F: FnMut(usize, &mut [f64]),
    {
        let mut a = vec![0.0; dim * dim];
        let mut col = vec![0.0; dim];
        for k in 0..dim {
            col.iter_mut().for_each(|v| *v = 0.0);
            fill(k, &mut col);
            for i in 0..dim {
                a[i * dim + k] = col[i];
            }
        }
        let mut perm: Vec<usize> = (0..dim).collect();
        for k in 0..dim {
            let (mut best, mut best_abs) = (k, a[k * dim + k].abs());
            for i in k + 1..dim {
                let v = a[i * dim + k].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if best_abs < SINGULAR_TOL {
                return Err(Singular { position: k });
            }
            if best != k {
                for c in 0..dim {
                    a.swap(k * dim + c, best * dim + c);
                }
                perm.swap(k, best);
            }
            let piv = a[k * dim + k];
            for i in k + 1..dim {
                let f = a[i * dim + k] / piv;
                if f == 0.0 {
                    continue;
                }
                a[i * dim + k] = f;
                for c in k + 1..dim {
                    a[i * dim + c] -= f * a[k * dim + c];
                }
            }
        }
        Ok(BasisFactor {
            dim,
            lu: a,
            perm,
            etas: Vec::new(),
        })
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = v` in place.
    pub fn ftran(&self, v: &mut [f64]) {
        let n = self.dim;
        let mut w: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * w[k];
            }
            w[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in i + 1..n {
                s -= self.lu[i * n + k] * w[k];
            }
            w[i] = s / self.lu[i * n + i];
        }
        v.copy_from_slice(&w);
        for eta in &self.etas {
            let vr = v[eta.row];
            if vr == 0.0 {
                continue;
            }
            for &(i, e) in &eta.col {
                v[i] += e * vr;
            }
            v[eta.row] = eta.diag * vr;
        }
    }

    /// Solves `B' y = c` in place.
    pub fn btran(&self, c: &mut [f64]) {
        let n = self.dim;
        for eta in self.etas.iter().rev() {
            let mut s = eta.diag * c[eta.row];
            for &(i, e) in &eta.col {
                s += e * c[i];
            }
            c[eta.row] = s;
        }
        // U' z = c
        let mut z = c.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.lu[k * n + i] * z[k];
            }
            z[i] = s / self.lu[i * n + i];
        }
        // L' w = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.lu[k * n + i] * z[k];
            }
            z[i] = s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            c[p] = z[k];
        }
    }

    /// Records the replacement of basis position `row` by a column whose FTRAN image is `alpha`.
    pub fn update(&mut self, row: usize, alpha: &[f64]) {
        let ar = alpha[row];
        let col = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != row && a != 0.0)
            .map(|(i, &a)| (i, -a / ar))
            .collect();
        self.etas.push(Eta {
            row,
            col,
            diag: 1.0 / ar,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    fn factor(a: &[Vec<f64>]) -> BasisFactor {
        BasisFactor::factorize(a.len(), |k, col| {
            for (i, r) in a.iter().enumerate() {
                col[i] = r[k];
            }
        })
        .unwrap()
    }

    #[test]
    fn ftran_btran_solve() {
        let a = vec![
            vec![0.0, 2.0, 1.0],
            vec![1.0, -1.0, 0.0],
            vec![3.0, 0.0, 4.0],
        ];
        let f = factor(&a);
        let x = vec![1.0, -2.0, 0.5];
        let mut v = mat_vec(&a, &x);
        f.ftran(&mut v);
        for (p, q) in v.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
        let at: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|k| a[k][i]).collect()).collect();
        let mut c = mat_vec(&at, &x);
        f.btran(&mut c);
        for (p, q) in c.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let a = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ];
        let mut f = factor(&a);
        let newcol = vec![1.0, 0.0, 2.0];
        let mut alpha = newcol.clone();
        f.ftran(&mut alpha);
        f.update(1, &alpha);
        let mut b = a.clone();
        for i in 0..3 {
            b[i][1] = newcol[i];
        }
        let g = factor(&b);
        let rhs = vec![0.3, -1.0, 2.0];
        let (mut p, mut q) = (rhs.clone(), rhs.clone());
        f.ftran(&mut p);
        g.ftran(&mut q);
        for k in 0..3 {
            assert!((p[k] - q[k]).abs() < 1e-12);
        }
        let (mut p, mut q) = (rhs.clone(), rhs.clone());
        f.btran(&mut p);
        g.btran(&mut q);
        for k in 0..3 {
            assert!((p[k] - q[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let r = BasisFactor::factorize(2, |k, col| {
            col[0] = a[0][k];
            col[1] = a[1][k];
        });
        assert_eq!(r.unwrap_err(), Singular { position: 1 });
    }
}
