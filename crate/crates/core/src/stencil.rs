//! Ghost values and the three-point second difference.
//!
//! Every end condition is expressed as an affine ghost rule
//! `v_ghost = Σ w_k v[idx_k] + offset`, so the same data drives residuals and
//! Jacobians.

use crate::geometry::{EndCondition, Grid};
use crate::linalg::Banded;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Left,
    Right,
}

/// How the potential is continued past a cusp end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialFarRule {
    /// `u_x = 0`.
    Neumann,
    /// The boundary value is held at its initial value.
    Dirichlet,
    /// Same quadratic extrapolation as the log-metric.
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ghost {
    pub idx: [usize; 3],
    pub w: [f64; 3],
    pub offset: f64,
}

impl Ghost {
    fn new(idx: [usize; 3], w: [f64; 3], offset: f64) -> Self {
        Self { idx, w, offset }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        self.w[0] * v[self.idx[0]] + self.w[1] * v[self.idx[1]] + self.w[2] * v[self.idx[2]]
            + self.offset
    }

    /// Same weights, no offset: the rule for time derivatives and differences.
    pub fn linear_part(&self) -> Ghost {
        Ghost { offset: 0.0, ..*self }
    }
}

/// Indices `[boundary, first inner, second inner]` and the ghost abscissa.
fn layout(grid: &Grid, side: Side) -> ([usize; 3], [f64; 3], f64) {
    let n = grid.n();
    let h = grid.h();
    match side {
        Side::Left => ([0, 1, 2], [grid.x(0), grid.x(1), grid.x(2)], grid.x(0) - h),
        Side::Right => (
            [n, n - 1, n - 2],
            [grid.x(n), grid.x(n - 1), grid.x(n - 2)],
            grid.x(n) + h,
        ),
    }
}

fn quadratic(idx: [usize; 3], offset: f64) -> Ghost {
    Ghost::new(idx, [3.0, -3.0, 1.0], offset)
}

fn neumann(idx: [usize; 3]) -> Ghost {
    Ghost::new(idx, [0.0, 1.0, 0.0], 0.0)
}

/// Regularity at a cap for `ψ` with `ψ'' = 2ψ'` outward: the one-sided
/// discretisation gives `ψ_g = (2ψ_b − (1 − h)ψ_1)/(1 + h)`.
fn cap_weights(h: f64) -> [f64; 3] {
    [2.0 / (1.0 + h), -(1.0 - h) / (1.0 + h), 0.0]
}

/// Ghost rule for `φ = log f`.
pub(crate) fn log_metric_ghost(grid: &Grid, end: &EndCondition, side: Side) -> Ghost {
    let (idx, xs, xg) = layout(grid, side);
    let h = grid.h();
    match end {
        EndCondition::SmoothCap => {
            // ψ = φ ∓ 2x is regular at the pole; the sign flips with the side.
            let s = match side {
                Side::Left => -2.0,
                Side::Right => 2.0,
            };
            let w = cap_weights(h);
            let offset = w[0] * s * xs[0] + w[1] * s * xs[1] - s * xg;
            Ghost::new(idx, w, offset)
        }
        EndCondition::CuspMatch { .. } => {
            // q = φ + 2 log|x| is extrapolated quadratically.
            let q = |x: f64| 2.0 * math::ln(math::abs(x));
            let offset = 3.0 * q(xs[0]) - 3.0 * q(xs[1]) + q(xs[2]) - q(xg);
            quadratic(idx, offset)
        }
        EndCondition::Truncated => quadratic(idx, 0.0),
        EndCondition::FlatEnd => neumann(idx),
    }
}

/// Ghost rule for the potential; `Dirichlet` returns the Neumann rule and
/// callers pin the boundary node separately.
pub(crate) fn potential_ghost(
    grid: &Grid,
    end: &EndCondition,
    side: Side,
    far: PotentialFarRule,
) -> Ghost {
    let (idx, _, _) = layout(grid, side);
    match end {
        EndCondition::SmoothCap => Ghost::new(idx, cap_weights(grid.h()), 0.0),
        EndCondition::FlatEnd | EndCondition::Truncated => neumann(idx),
        EndCondition::CuspMatch { .. } => match far {
            PotentialFarRule::Neumann | PotentialFarRule::Dirichlet => neumann(idx),
            PotentialFarRule::Extrapolate => quadratic(idx, 0.0),
        },
    }
}

/// Second difference on a uniform grid with ghost rules at both ends.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub len: usize,
    pub inv_h2: f64,
    pub left: Ghost,
    pub right: Ghost,
}

impl Stencil {
    pub fn new(grid: &Grid, left: Ghost, right: Ghost) -> Self {
        let h = grid.h();
        Self {
            len: grid.len(),
            inv_h2: 1.0 / (h * h),
            left,
            right,
        }
    }

    pub fn log_metric(grid: &Grid, ends: &[EndCondition; 2]) -> Self {
        Self::new(
            grid,
            log_metric_ghost(grid, &ends[0], Side::Left),
            log_metric_ghost(grid, &ends[1], Side::Right),
        )
    }

    pub fn linear_part(&self) -> Self {
        Self {
            left: self.left.linear_part(),
            right: self.right.linear_part(),
            ..self.clone()
        }
    }

    /// `out_i = (v_{i−1} − 2v_i + v_{i+1})/h²`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len - 1;
        let gl = self.left.value(v);
        let gr = self.right.value(v);
        out[0] = (gl - 2.0 * v[0] + v[1]) * self.inv_h2;
        for i in 1..n {
            out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * self.inv_h2;
        }
        out[n] = (v[n - 1] - 2.0 * v[n] + gr) * self.inv_h2;
    }

    pub fn apply_vec(&self, v: &[f64]) -> alloc::vec::Vec<f64> {
        let mut out = alloc::vec![0.0; self.len];
        self.apply(v, &mut out);
        out
    }

    /// Adds `scale[i] · ∂(D²v)_i/∂v_j` into `m`.
    pub fn add_jacobian(&self, scale: &[f64], m: &mut Banded) {
        let n = self.len - 1;
        for i in 1..n {
            let s = scale[i] * self.inv_h2;
            m.lower[i] += s;
            m.diag[i] -= 2.0 * s;
            m.upper[i] += s;
        }
        let s0 = scale[0] * self.inv_h2;
        m.diag[0] -= 2.0 * s0;
        m.upper[0] += s0;
        for (k, &j) in self.left.idx.iter().enumerate() {
            let w = self.left.w[k] * s0;
            match j {
                0 => m.diag[0] += w,
                1 => m.upper[0] += w,
                _ => m.first_corner += w,
            }
        }
        let sn = scale[n] * self.inv_h2;
        m.diag[n] -= 2.0 * sn;
        m.lower[n] += sn;
        for (k, &j) in self.right.idx.iter().enumerate() {
            let w = self.right.w[k] * sn;
            if j == n {
                m.diag[n] += w;
            } else if j + 1 == n {
                m.lower[n] += w;
            } else {
                m.last_corner += w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndCondition, Grid};
    use alloc::vec::Vec;

    fn grid() -> Grid {
        Grid::new(-3.0, 5.0, 32).unwrap()
    }

    #[test]
    fn cap_ghost_is_exact_for_regular_profiles() {
        // Near a pole ψ = log f − 2x behaves like a + b·e^{2x}.
        let g = grid();
        let ghost = log_metric_ghost(&g, &EndCondition::SmoothCap, Side::Left);
        let phi = |x: f64| 2.0 * x + 0.3 + 1.7 * math::exp(2.0 * x);
        let v: Vec<f64> = g.xs().map(phi).collect();
        let want = phi(g.x(0) - g.h());
        assert!((ghost.value(&v) - want).abs() < 1e-4);
    }

    #[test]
    fn cusp_ghost_is_exact_for_poincare() {
        let g = Grid::new(1.0, 9.0, 32).unwrap();
        let ghost = log_metric_ghost(&g, &EndCondition::CuspMatch { c: 1.0 }, Side::Right);
        let phi = |x: f64| math::ln(2.5 / (x * x));
        let v: Vec<f64> = g.xs().map(phi).collect();
        assert!((ghost.value(&v) - phi(9.0 + g.h())).abs() < 1e-13);
        let left = log_metric_ghost(&g, &EndCondition::CuspMatch { c: 1.0 }, Side::Left);
        assert!((left.value(&v) - phi(1.0 - g.h())).abs() < 1e-13);
    }

    #[test]
    fn jacobian_matches_operator() {
        let g = grid();
        let ends = [EndCondition::SmoothCap, EndCondition::CuspMatch { c: 1.0 }];
        let st = Stencil::log_metric(&g, &ends).linear_part();
        let v: Vec<f64> = g.xs().map(|x| math::cosh(0.3 * x)).collect();
        let scale: Vec<f64> = g.xs().map(|x| 1.0 + 0.1 * x * x).collect();
        let mut m = Banded::zeros(g.len());
        st.add_jacobian(&scale, &mut m);
        let got = m.apply(&v);
        let d2 = st.apply_vec(&v);
        for i in 0..g.len() {
            assert!((got[i] - scale[i] * d2[i]).abs() < 1e-9 * (1.0 + d2[i].abs()));
        }
    }
}
