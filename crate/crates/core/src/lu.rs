//! Dense LU factorization with partial pivoting, row-major storage.

use crate::error::{Error, Result};

/// Pivots with magnitude below this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Relative pivot size (against the largest matrix entry) that triggers a conditioning warning.
pub const WARN_PIVOT_RATIO: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Lu {
    dim: usize,
    /// Unit-lower `L` below the diagonal and `U` on and above it.
    factors: Vec<f64>,
    /// `perm[k]` is the original row placed at position `k`.
    perm: Vec<usize>,
    pub min_pivot: f64,
    /// Largest absolute entry of the input matrix.
    pub scale: f64,
}

impl Lu {
    /// Factors `matrix` (row-major, `dim × dim`) in place.
    pub fn factor(mut matrix: Vec<f64>, dim: usize) -> Result<Lu> {
        if matrix.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "matrix has {} entries, expected {dim}x{dim}",
                matrix.len()
            )));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut perm: Vec<usize> = (0..dim).collect();
        let mut min_pivot = f64::INFINITY;

        for k in 0..dim {
            let (mut p, mut best) = (k, 0.0);
            for i in k..dim {
                let v = matrix[i * dim + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < SINGULAR_PIVOT {
                return Err(Error::SingularSystem {
                    column: k,
                    pivot: best,
                    threshold: SINGULAR_PIVOT,
                });
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                let (top, bottom) = matrix.split_at_mut(p * dim);
                top[k * dim..(k + 1) * dim].swap_with_slice(&mut bottom[..dim]);
                perm.swap(k, p);
            }

            let (upper, lower) = matrix.split_at_mut((k + 1) * dim);
            let pivot_row = &upper[k * dim..];
            let pivot = pivot_row[k];
            // collocation rows are sparse; skip the pivot row's trailing zeros
            let end = pivot_row[..dim].iter().rposition(|&u| u != 0.0).unwrap_or(k) + 1;
            for row in lower.chunks_exact_mut(dim) {
                let m = row[k];
                if m == 0.0 {
                    continue;
                }
                let m = m / pivot;
                row[k] = m;
                for (r, &u) in row[k + 1..end].iter_mut().zip(&pivot_row[k + 1..end]) {
                    *r -= m * u;
                }
            }
        }
        Ok(Lu {
            dim,
            factors: matrix,
            perm,
            min_pivot,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ill_conditioned(&self) -> bool {
        self.min_pivot < WARN_PIVOT_RATIO * self.scale
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        if rhs.len() != n {
            return Err(Error::InvalidInput(format!(
                "right-hand side has length {}, expected {n}",
                rhs.len()
            )));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = &self.factors[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.factors[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / row[i];
        }
        Ok(y)
    }
}
