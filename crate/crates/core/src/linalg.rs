//! Tridiagonal systems, the only linear algebra the 1D solvers need.

use crate::error::{Result, SolverError};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Adds `value` at `(row, col)`; `col` must be within one of `row`.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        if col == row {
            self.diag[row] += value;
        } else if col + 1 == row {
            self.lower[row] += value;
        } else if col == row + 1 {
            self.upper[row] += value;
        } else {
            panic!("entry ({row}, {col}) outside the tridiagonal band");
        }
    }

    pub fn add_to_diagonal(&mut self, value: f64) {
        self.diag.iter_mut().for_each(|d| *d += value);
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut t = Self::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 0..n.saturating_sub(1) {
            // (i, i+1) <-> (i+1, i)
            t.lower[i + 1] = self.upper[i];
            t.upper[i] = self.lower[i + 1];
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm. No pivoting; the assembled operators are diagonally dominant.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        check_pivot(0, pivot)?;
        c[0] = self.upper[0] / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            check_pivot(i, pivot)?;
            c[i] = if i + 1 < n {
                self.upper[i] / pivot
            } else {
                0.0
            };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / pivot;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }
}

fn check_pivot(row: usize, pivot: f64) -> Result<()> {
    if pivot.abs() < 1e-300 || !pivot.is_finite() {
        Err(SolverError::SingularSystem { row, pivot })
    } else {
        Ok(())
    }
}
