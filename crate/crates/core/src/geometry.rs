//! Rotationally symmetric conformal metrics on punctured spheres.
//!
//! A metric is `f(x)·(i/2)dw∧dw̄` on the cylinder `w = x + iθ`, `θ ∈ [0, 2π)`,
//! with `x = log(1/|z|)`. The area form integrates to `2π∫f dx` and the
//! Ricci-form coefficient is `−½(log f)''`.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::stencil::{Side, Stencil};

/// Factor turning `i∂∂̄φ` into a coefficient of `(i/2)dw∧dw̄` in `x`.
pub const RICCI_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid end conditions: {0}")]
    InvalidEnds(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("cusp coordinate must stay away from zero, grid reaches x = {x}")]
    DomainContainsZero { x: f64 },
    #[error("metric coefficient {value} at x = {x} (index {index}) is not positive")]
    NonPositiveMetric { index: usize, x: f64, value: f64 },
    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{side} end is not cusp-integrable")]
    DivergentTail { side: &'static str },
    #[error("initial metric is not positive near x = {x}")]
    PositivityFailure { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    /// `ℝ² = S² − pt`: a smooth cap and one cusp.
    OnePuncture,
    /// `ℂ* = S² − {0, ∞}`.
    TwoPuncture,
}

impl Topology {
    pub fn as_str(&self) -> &'static str {
        match self {
            Topology::OnePuncture => "one_puncture",
            Topology::TwoPuncture => "two_puncture",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    /// Hyperbolic cusp `f ≈ c/x²` beyond the grid.
    CuspMatch { c: f64 },
    /// The end closes up smoothly at a pole.
    SmoothCap,
    /// Reflecting end of a flat cylinder segment.
    FlatEnd,
    /// The grid is a window; nothing is assumed past the end.
    Truncated,
}

impl fmt::Display for EndCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndCondition::CuspMatch { c } => write!(f, "cusp_match({c})"),
            EndCondition::SmoothCap => f.write_str("smooth_cap"),
            EndCondition::FlatEnd => f.write_str("flat_end"),
            EndCondition::Truncated => f.write_str("truncated"),
        }
    }
}

/// Uniform nodes `x_i = x_min + i·h`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub const MIN_INTERVALS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, GeometryError> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(GeometryError::InvalidGrid("bounds must be finite"));
        }
        if !(x_max > x_min) {
            return Err(GeometryError::InvalidGrid("x_max must exceed x_min"));
        }
        if n < Self::MIN_INTERVALS {
            return Err(GeometryError::InvalidGrid("need at least 16 intervals"));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.h()
        }
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.x(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    topology: Topology,
    grid: Grid,
    ends: [EndCondition; 2],
}

impl SurfaceModel {
    pub fn new(
        topology: Topology,
        grid: Grid,
        left: EndCondition,
        right: EndCondition,
    ) -> Result<Self, GeometryError> {
        use EndCondition::*;
        for end in [left, right] {
            if let CuspMatch { c } = end {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(GeometryError::InvalidParameter("cusp constant must be positive"));
                }
            }
        }
        let ok = match topology {
            Topology::OnePuncture => matches!(
                (left, right),
                (SmoothCap | Truncated, CuspMatch { .. } | Truncated)
                    | (CuspMatch { .. } | Truncated, SmoothCap | Truncated)
            ),
            Topology::TwoPuncture => matches!(
                (left, right),
                (CuspMatch { .. } | Truncated, CuspMatch { .. } | Truncated) | (FlatEnd, FlatEnd)
            ),
        };
        if !ok {
            return Err(GeometryError::InvalidEnds(match topology {
                Topology::OnePuncture => "one puncture needs a smooth cap and a cusp",
                Topology::TwoPuncture => "two punctures need two cusps or two flat ends",
            }));
        }
        let h = grid.h();
        if let CuspMatch { .. } = left {
            let probe = [grid.x(0) - h, grid.x(2)];
            if probe.iter().any(|x| *x >= 0.0) {
                return Err(GeometryError::DomainContainsZero { x: grid.x(2) });
            }
        }
        if let CuspMatch { .. } = right {
            let x = grid.x(grid.n() - 2);
            if x <= 0.0 {
                return Err(GeometryError::DomainContainsZero { x });
            }
        }
        Ok(Self {
            topology,
            grid,
            ends: [left, right],
        })
    }

    /// Cap on the left, cusp with constant `c` on the right.
    pub fn one_puncture(x_min: f64, x_max: f64, n: usize, c: f64) -> Result<Self, GeometryError> {
        Self::new(
            Topology::OnePuncture,
            Grid::new(x_min, x_max, n)?,
            EndCondition::SmoothCap,
            EndCondition::CuspMatch { c },
        )
    }

    pub fn two_puncture(
        x_min: f64,
        x_max: f64,
        n: usize,
        c_left: f64,
        c_right: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(
            Topology::TwoPuncture,
            Grid::new(x_min, x_max, n)?,
            EndCondition::CuspMatch { c: c_left },
            EndCondition::CuspMatch { c: c_right },
        )
    }

    /// A cylinder segment with reflecting ends.
    pub fn flat_cylinder(x_min: f64, x_max: f64, n: usize) -> Result<Self, GeometryError> {
        Self::new(
            Topology::TwoPuncture,
            Grid::new(x_min, x_max, n)?,
            EndCondition::FlatEnd,
            EndCondition::FlatEnd,
        )
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ends(&self) -> &[EndCondition; 2] {
        &self.ends
    }

    /// True when the grid plus end models describe the whole surface.
    pub fn is_complete(&self) -> bool {
        !self.ends.contains(&EndCondition::Truncated)
    }

    pub(crate) fn log_metric_stencil(&self) -> Stencil {
        Stencil::log_metric(&self.grid, &self.ends)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric {
    model: SurfaceModel,
    f: Vec<f64>,
    exact_ricci: Option<Vec<f64>>,
}

fn check_positive(grid: &Grid, f: &[f64]) -> Result<(), GeometryError> {
    match f.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        Some(index) => Err(GeometryError::NonPositiveMetric {
            index,
            x: grid.x(index),
            value: f[index],
        }),
        None => Ok(()),
    }
}

impl ConformalMetric {
    pub fn new(model: SurfaceModel, f: Vec<f64>) -> Result<Self, GeometryError> {
        let expected = model.grid().len();
        if f.len() != expected {
            return Err(GeometryError::LengthMismatch {
                expected,
                found: f.len(),
            });
        }
        check_positive(model.grid(), &f)?;
        Ok(Self {
            model,
            f,
            exact_ricci: None,
        })
    }

    /// Attaches closed-form Ricci coefficients to use in place of differences.
    pub fn with_exact_ricci(mut self, ric: Vec<f64>) -> Result<Self, GeometryError> {
        if ric.len() != self.f.len() {
            return Err(GeometryError::LengthMismatch {
                expected: self.f.len(),
                found: ric.len(),
            });
        }
        self.exact_ricci = Some(ric);
        Ok(self)
    }

    fn from_fn(model: &SurfaceModel, profile: impl Fn(f64) -> f64) -> Result<Self, GeometryError> {
        let f = model.grid().xs().map(profile).collect();
        Self::new(model.clone(), f)
    }

    pub fn model(&self) -> &SurfaceModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        self.model.grid()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn exact_ricci(&self) -> Option<&[f64]> {
        self.exact_ricci.as_deref()
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self, GeometryError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(GeometryError::InvalidParameter("scale must be positive"));
        }
        Ok(Self {
            model: self.model.clone(),
            f: self.f.iter().map(|v| v * lambda).collect(),
            exact_ricci: self.exact_ricci.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub k: Vec<f64>,
    pub ric: Vec<f64>,
    pub sup_abs_k: f64,
}

/// Discrete Ricci coefficient `−½ D²(log f)` with the model's ghost rules.
pub(crate) fn ricci_samples(model: &SurfaceModel, f: &[f64]) -> Result<Vec<f64>, GeometryError> {
    check_positive(model.grid(), f)?;
    let phi: Vec<f64> = f.iter().map(|v| math::ln(*v)).collect();
    let mut ric = model.log_metric_stencil().apply_vec(&phi);
    for r in &mut ric {
        *r *= -RICCI_SCALE;
    }
    Ok(ric)
}

pub(crate) fn curvature_of(model: &SurfaceModel, f: &[f64]) -> Result<CurvatureProfile, GeometryError> {
    let ric = ricci_samples(model, f)?;
    let k: Vec<f64> = ric.iter().zip(f).map(|(r, v)| r / v).collect();
    let sup_abs_k = math::sup_abs(&k);
    Ok(CurvatureProfile { k, ric, sup_abs_k })
}

/// Gauss curvature `K = −(log f)''/(2f)` by centred differences.
pub fn gauss_curvature(g: &ConformalMetric) -> Result<CurvatureProfile, GeometryError> {
    curvature_of(g.model(), g.f())
}

fn cusp_tail(f_end: f64, f_inner: f64, h: f64, side: &'static str) -> Result<f64, GeometryError> {
    // Shifted cusp c/(x − b)² has 1/√f linear in x; integrate it exactly.
    let beta = (1.0 / math::sqrt(f_end) - 1.0 / math::sqrt(f_inner)) / h;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GeometryError::DivergentTail { side });
    }
    Ok(math::sqrt(f_end) / beta)
}

pub(crate) fn volume_of(model: &SurfaceModel, f: &[f64]) -> Result<f64, GeometryError> {
    check_positive(model.grid(), f)?;
    let grid = model.grid();
    let h = grid.h();
    let n = grid.n();
    let interior: f64 = f.iter().sum::<f64>() - 0.5 * (f[0] + f[n]);
    let mut integral = h * interior;
    for (side, end) in [(Side::Left, model.ends()[0]), (Side::Right, model.ends()[1])] {
        let (b, inner, label) = match side {
            Side::Left => (0, 1, "left"),
            Side::Right => (n, n - 1, "right"),
        };
        integral += match end {
            // f ≈ f_b·e^{±2(x − x_b)} past the pole side.
            EndCondition::SmoothCap => 0.5 * f[b],
            EndCondition::CuspMatch { .. } => cusp_tail(f[b], f[inner], h, label)?,
            EndCondition::FlatEnd | EndCondition::Truncated => 0.0,
        };
    }
    Ok(2.0 * core::f64::consts::PI * integral)
}

/// Total area: trapezoid over the grid plus the analytic end pieces.
pub fn volume(g: &ConformalMetric) -> Result<f64, GeometryError> {
    volume_of(g.model(), g.f())
}

/// Length of the radial segment `∫√f dx` across the grid.
pub fn radial_length(g: &ConformalMetric) -> f64 {
    let h = g.grid().h();
    let s: Vec<f64> = g.f().iter().map(|v| math::sqrt(*v)).collect();
    h * (s.iter().sum::<f64>() - 0.5 * (s[0] + s[s.len() - 1]))
}

/// Cusp constant from a least-squares fit of `1/√f` against `x` over the
/// outer `fraction` of the grid on `right` (or left) side.
pub fn cusp_constant_fit(grid: &Grid, f: &[f64], right: bool, fraction: f64) -> Option<f64> {
    let n = grid.n();
    let m = ((fraction * n as f64) as usize).clamp(3, n);
    let range = if right { n - m..=n } else { 0..=m };
    let xs: Vec<f64> = range.clone().map(|i| grid.x(i)).collect();
    let ys: Vec<f64> = range.map(|i| 1.0 / math::sqrt(f[i])).collect();
    let (slope, _) = crate::fit::linear_fit(&xs, &ys)?;
    let slope = if right { slope } else { -slope };
    (slope > 0.0).then(|| 1.0 / (slope * slope))
}

/// The Poincaré cusp `f = c/x²`, with `ric = −1/x²`.
pub fn poincare_cusp(c: f64, model: &SurfaceModel) -> Result<ConformalMetric, GeometryError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(GeometryError::InvalidParameter("cusp constant must be positive"));
    }
    let grid = model.grid();
    if grid.x_min() <= 0.0 {
        return Err(GeometryError::DomainContainsZero { x: grid.x_min() });
    }
    let ric = grid.xs().map(|x| -1.0 / (x * x)).collect();
    ConformalMetric::from_fn(model, |x| c / (x * x))?.with_exact_ricci(ric)
}

/// Round sphere of the given area, `f = (area/4π)·sech²x`.
pub fn round_sphere(model: &SurfaceModel, area: f64) -> Result<ConformalMetric, GeometryError> {
    if !(area > 0.0 && area.is_finite()) {
        return Err(GeometryError::InvalidParameter("area must be positive"));
    }
    let scale = area / (4.0 * core::f64::consts::PI);
    let sech2 = |x: f64| {
        let c = math::cosh(x);
        1.0 / (c * c)
    };
    let ric = model.grid().xs().map(sech2).collect();
    ConformalMetric::from_fn(model, |x| scale * sech2(x))?.with_exact_ricci(ric)
}

pub fn flat(model: &SurfaceModel, level: f64) -> Result<ConformalMetric, GeometryError> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(GeometryError::InvalidParameter("level must be positive"));
    }
    let ric = alloc::vec![0.0; model.grid().len()];
    ConformalMetric::from_fn(model, |_| level)?.with_exact_ricci(ric)
}

/// `f = level·exp(Σ a_k cos(kπ(x − x_min)/L))`; each mode is reflection
/// symmetric at both ends.
pub fn flat_perturbed(
    model: &SurfaceModel,
    level: f64,
    modes: &[(u32, f64)],
) -> Result<ConformalMetric, GeometryError> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(GeometryError::InvalidParameter("level must be positive"));
    }
    let grid = *model.grid();
    let span = grid.x_max() - grid.x_min();
    let pi = core::f64::consts::PI;
    let log_f = |x: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut d2 = 0.0;
        for &(k, a) in modes {
            let w = k as f64 * pi / span;
            let c = libm::cos(w * (x - grid.x_min()));
            v += a * c;
            d2 -= a * w * w * c;
        }
        (v, d2)
    };
    let ric = grid.xs().map(|x| -RICCI_SCALE * log_f(x).1).collect();
    ConformalMetric::from_fn(model, |x| level * math::exp(log_f(x).0))?.with_exact_ricci(ric)
}

fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + math::exp(-y))
    } else {
        let e = math::exp(y);
        e / (1.0 + e)
    }
}

fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + math::ln_1p(math::exp(-y))
    } else {
        math::ln_1p(math::exp(y))
    }
}

/// The cigar soliton `f = λ·e^{2(x−x*)}/(1 + e^{2(x−x*)})`, tip at `x → −∞`.
pub fn cigar(model: &SurfaceModel, lambda: f64, center: f64) -> Result<ConformalMetric, GeometryError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(GeometryError::InvalidParameter("scale must be positive"));
    }
    let ric = model
        .grid()
        .xs()
        .map(|x| {
            let s = logistic(2.0 * (x - center));
            2.0 * s * (1.0 - s)
        })
        .collect();
    ConformalMetric::from_fn(model, |x| lambda * logistic(2.0 * (x - center)))?.with_exact_ricci(ric)
}

/// Parameters of the smooth base metric and the Hermitian-metric constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    /// Base metric `amplitude·sech²x`, of area `4π·amplitude`.
    pub amplitude: f64,
    /// Constant `a` in `|σ|² = a·|z|²/(1 + |z|²)`; chosen automatically when absent.
    pub hermitian_scale: Option<f64>,
}

impl Bump {
    pub fn with_area(area: f64) -> Self {
        Self {
            amplitude: area / (4.0 * core::f64::consts::PI),
            hermitian_scale: None,
        }
    }
}

/// Value and first two derivatives of `−P'` with `P = L'/L`,
/// `L = log(1 + e^{2x}) − log a`.
fn log_log_term(x: f64, neg_log_a: f64) -> [f64; 3] {
    let s = logistic(2.0 * x);
    let l0 = softplus(2.0 * x) + neg_log_a;
    let l1 = 2.0 * s;
    let l2 = 4.0 * s * (1.0 - s);
    let l3 = 8.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    let l4 = 16.0 * s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s);
    let p = l1 / l0;
    let q = l2 / l0;
    let r = l3 / l0;
    let t = l4 / l0;
    let p1 = q - p * p;
    let q1 = r - q * p;
    let r1 = t - r * p;
    let p2 = q1 - 2.0 * p * p1;
    let q2 = r1 - q1 * p - q * p1;
    let p3 = q2 - 2.0 * p1 * p1 - 2.0 * p * p2;
    [-p1, -p2, -p3]
}

fn cg_profile(
    x: f64,
    amplitude: f64,
    neg_log_a: f64,
    cusps: [Option<f64>; 2],
) -> [f64; 3] {
    let sech = 1.0 / math::cosh(x);
    let b0 = amplitude * sech * sech;
    let th = math::tanh(x);
    let mut out = [b0, -2.0 * th * b0, b0 * (4.0 - 6.0 * sech * sech)];
    if let Some(c) = cusps[1] {
        let t = log_log_term(x, neg_log_a);
        for k in 0..3 {
            out[k] += c * t[k];
        }
    }
    if let Some(c) = cusps[0] {
        let t = log_log_term(-x, neg_log_a);
        out[0] += c * t[0];
        out[1] -= c * t[1];
        out[2] += c * t[2];
    }
    out
}

/// Smooth base plus the `−c·i∂∂̄ log log²|σ|⁻²` correction at each cusp end.
///
/// Near a cusp the result is `c/(x − ½log a)² + O(e^{−2|x|})`; near a cap it
/// is `4e^{2x}(amplitude − c/(−log a)) + …`, so a smaller Hermitian constant
/// `a` restores positivity there.
pub fn carlson_griffiths_initial(
    model: &SurfaceModel,
    c: f64,
    bump: Bump,
) -> Result<ConformalMetric, GeometryError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(GeometryError::InvalidParameter("cusp constant must be positive"));
    }
    if !(bump.amplitude > 0.0 && bump.amplitude.is_finite()) {
        return Err(GeometryError::InvalidParameter("bump amplitude must be positive"));
    }
    let ends = model.ends();
    let is_cusp = |e: &EndCondition| matches!(e, EndCondition::CuspMatch { .. });
    let has_cap = ends.contains(&EndCondition::SmoothCap);
    let cusps = [is_cusp(&ends[0]).then_some(c), is_cusp(&ends[1]).then_some(c)];
    if model.topology() == Topology::OnePuncture && cusps[0].is_some() {
        return Err(GeometryError::InvalidEnds("place the cusp on the right end"));
    }
    let grid = *model.grid();
    let build = |neg_log_a: f64| -> Result<ConformalMetric, GeometryError> {
        if has_cap && bump.amplitude * neg_log_a <= c {
            return Err(GeometryError::PositivityFailure {
                x: if ends[0] == EndCondition::SmoothCap { grid.x_min() } else { grid.x_max() },
            });
        }
        let mut f = Vec::with_capacity(grid.len());
        let mut ric = Vec::with_capacity(grid.len());
        for x in grid.xs() {
            let [v, d1, d2] = cg_profile(x, bump.amplitude, neg_log_a, cusps);
            if !(v > 0.0 && v.is_finite()) {
                return Err(GeometryError::PositivityFailure { x });
            }
            ric.push(-RICCI_SCALE * (d2 / v - (d1 / v) * (d1 / v)));
            f.push(v);
        }
        ConformalMetric::new(model.clone(), f)?.with_exact_ricci(ric)
    };
    match bump.hermitian_scale {
        Some(a) => {
            if !(a > 0.0 && a < 1.0) {
                return Err(GeometryError::InvalidParameter("hermitian scale must lie in (0, 1)"));
            }
            build(-math::ln(a))
        }
        None => {
            let mut last = GeometryError::PositivityFailure { x: grid.x_min() };
            for k in 3..=40 {
                match build(k as f64) {
                    Ok(g) => return Ok(g),
                    Err(e @ GeometryError::PositivityFailure { .. }) => last = e,
                    Err(e) => return Err(e),
                }
            }
            Err(last)
        }
    }
}
