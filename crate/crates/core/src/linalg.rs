//! Tridiagonal solve with one extra entry in the first and last rows.
//!
//! Extrapolating ghost rules couple a boundary node to its second neighbour,
//! which puts a single entry just outside the band. Those are folded back in
//! using the adjacent row before a plain Thomas sweep.

use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub(crate) struct Banded {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// Entry at (0, 2).
    pub first_corner: f64,
    /// Entry at (n−1, n−3).
    pub last_corner: f64,
}

impl Banded {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: alloc::vec![0.0; n],
            diag: alloc::vec![0.0; n],
            upper: alloc::vec![0.0; n],
            first_corner: 0.0,
            last_corner: 0.0,
        }
    }

    /// `y = A x`.
    #[cfg(test)]
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = alloc::vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y[0] += self.first_corner * x[2];
        y[n - 1] += self.last_corner * x[n - 3];
        y
    }

    /// Solves `A x = rhs` in place; returns `None` on a zero pivot.
    pub fn solve(mut self, rhs: &mut [f64]) -> Option<()> {
        let n = self.diag.len();
        if n < 3 {
            return None;
        }
        if self.first_corner != 0.0 {
            let m = self.first_corner / self.upper[1];
            self.diag[0] -= m * self.lower[1];
            self.upper[0] -= m * self.diag[1];
            rhs[0] -= m * rhs[1];
        }
        if self.last_corner != 0.0 {
            let m = self.last_corner / self.lower[n - 2];
            self.lower[n - 1] -= m * self.diag[n - 2];
            self.diag[n - 1] -= m * self.upper[n - 2];
            rhs[n - 1] -= m * rhs[n - 2];
        }
        let mut c = alloc::vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        c[0] = self.upper[0] / pivot;
        rhs[0] /= pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            c[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
        Some(())
    }
}
