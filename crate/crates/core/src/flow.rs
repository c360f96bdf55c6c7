//! Normalized potential flow `u_t = log((f_t + ½u'')/f₀) − u` and its
//! unnormalized reparametrization.
//!
//! Two integrators share one state type:
//!
//! * [`Scheme::ExplicitRk4`] advances `u` directly under a parabolic CFL limit.
//! * [`Scheme::ImplicitMetric`] advances `φ = log f̃` by backward Euler with
//!   Richardson step control and carries `u` along through
//!   `u_t + u = φ − log f₀`. It stays accurate where `f̃` collapses by many
//!   orders of magnitude, which the potential form cannot resolve.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use crate::diagnostics::{self, ClassifyParams, EmpiricalTime, Prediction, RunVerdict};
use crate::geometry::{
    self, ConformalMetric, EndCondition, GeometryError, SurfaceModel, RICCI_SCALE,
};
use crate::linalg::Banded;
use crate::math;
use crate::stencil::{potential_ghost, Side, Stencil};

pub use crate::stencil::PotentialFarRule;

/// Ricci-form coefficient `−½(log f)''` of a metric, by centred differences.
pub fn ricci_coefficient(g: &ConformalMetric) -> Result<Vec<f64>, GeometryError> {
    geometry::ricci_samples(g.model(), g.f())
}

/// `f_t = −r₀ + e^{−t}(f₀ + r₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFamily {
    f0: Vec<f64>,
    r0: Vec<f64>,
}

impl ReferenceFamily {
    pub fn new(f0: Vec<f64>, r0: Vec<f64>) -> Result<Self, GeometryError> {
        if f0.len() != r0.len() {
            return Err(GeometryError::LengthMismatch {
                expected: f0.len(),
                found: r0.len(),
            });
        }
        Ok(Self { f0, r0 })
    }

    /// Uses the closed-form Ricci coefficient when asked and available.
    pub fn from_metric(g: &ConformalMetric, prefer_exact: bool) -> Result<Self, GeometryError> {
        let r0 = match (prefer_exact, g.exact_ricci()) {
            (true, Some(r)) => r.to_vec(),
            _ => ricci_coefficient(g)?,
        };
        Self::new(g.f().to_vec(), r0)
    }

    pub fn f0(&self) -> &[f64] {
        &self.f0
    }

    pub fn r0(&self) -> &[f64] {
        &self.r0
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.f0.len()];
        self.at_into(t, &mut out);
        out
    }

    /// Written as `e^{−t}f₀ + (e^{−t} − 1)r₀` so `t = 0` returns `f₀` exactly.
    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        let decay = math::exp(-t);
        let shift = math::exp_m1(-t);
        for ((o, f), r) in out.iter_mut().zip(&self.f0).zip(&self.r0) {
            *o = decay * f + shift * r;
        }
    }

    /// `∂f_t/∂t = −e^{−t}(f₀ + r₀)`.
    pub fn rate_into(&self, t: f64, out: &mut [f64]) {
        let decay = math::exp(-t);
        for ((o, f), r) in out.iter_mut().zip(&self.f0).zip(&self.r0) {
            *o = -decay * (f + r);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ExplicitRk4,
    ImplicitMetric,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExplicitRk4 => "explicit_rk4",
            Scheme::ImplicitMetric => "implicit_metric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowMode {
    /// `∂ω/∂t = −Ric − ω`; reported in `t`.
    Normalized,
    /// `∂ω/∂s = −Ric`; reported in `s = e^t − 1`.
    Unnormalized,
    /// Unnormalized flow on a flat-ended cylinder.
    FlatLongtime,
}

impl FlowMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowMode::Normalized => "normalized",
            FlowMode::Unnormalized => "unnormalized",
            FlowMode::FlatLongtime => "flat_longtime",
        }
    }

    pub fn is_unnormalized(&self) -> bool {
        !matches!(self, FlowMode::Normalized)
    }
}

impl fmt::Display for FlowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Local error target per step; monitors allow ten times this.
    pub solver: f64,
    /// Residual target for the Newton iteration of the implicit scheme.
    pub newton: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: 1e-6,
            newton: 1e-11,
        }
    }
}

/// Slack left in each monitored inequality; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    pub uupper: f64,
    pub uprime: f64,
    pub voldec: f64,
    pub voleqn: f64,
}

impl Margins {
    fn infinite() -> Self {
        Self {
            uupper: f64::INFINITY,
            uprime: f64::INFINITY,
            voldec: f64::INFINITY,
            voleqn: f64::INFINITY,
        }
    }

    fn min_with(&self, other: &Margins) -> Margins {
        Margins {
            uupper: self.uupper.min(other.uupper),
            uprime: self.uprime.min(other.uprime),
            voldec: self.voldec.min(other.voldec),
            voleqn: self.voleqn.min(other.voleqn),
        }
    }

    /// First violated inequality, if any.
    pub fn violation(&self) -> Option<(&'static str, f64)> {
        [
            ("uupper", self.uupper),
            ("uprime", self.uprime),
            ("voldec", self.voldec),
            ("voleqn", self.voleqn),
        ]
        .into_iter()
        .find(|(_, m)| !(*m >= 0.0))
    }
}

/// Constants of the maximum-principle bounds and their running margins.
///
/// With `w = u_tt + u_t` and `C = sup w(0)`:
/// `w ≤ Ce^{−t}`, `u_t ≤ Cte^{−t}`, `u ≤ C(1 − (1 + t)e^{−t})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConstants {
    pub c_voldec: f64,
    pub slack: f64,
    pub voleqn_limit: f64,
    pub latest: Margins,
    pub worst: Margins,
}

impl MonitorConstants {
    /// Bound on `u` at time `t`; never above `max(C, 0)`.
    pub fn u_bound(&self, t: f64) -> f64 {
        self.c_voldec * (1.0 - (1.0 + t) * math::exp(-t))
    }

    pub fn u_t_bound(&self, t: f64) -> f64 {
        self.c_voldec * t * math::exp(-t)
    }

    pub fn w_bound(&self, t: f64) -> f64 {
        self.c_voldec * math::exp(-t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// Normalized time.
    pub t: f64,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub ftilde: Vec<f64>,
    pub monitors: MonitorConstants,
}

impl FlowState {
    /// Unnormalized time `s = e^t − 1`.
    pub fn s(&self) -> f64 {
        math::exp_m1(self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum StepRejected {
    #[error("Kähler condition lost at x = {x}")]
    KahlerLost { index: usize, x: f64 },
    #[error("step {dt} exceeds the stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("Newton iteration did not converge (residual {residual})")]
    NewtonFailed { residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    ReachedEnd,
    ResolutionLimit,
    KahlerLost,
    StepLimit,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ReachedEnd => "reached_end",
            StopReason::ResolutionLimit => "resolution_limit",
            StopReason::KahlerLost => "kahler_lost",
            StopReason::StepLimit => "step_limit",
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, StopReason::ResolutionLimit | StopReason::KahlerLost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: FlowMode,
    pub scheme: Scheme,
    /// End time in the mode's own clock (`t` or `s`).
    pub t_end: f64,
    pub cfl: f64,
    pub tolerances: Tolerances,
    /// Spacing of recorded samples in the mode's clock; `t_end/1000` if absent.
    pub record_interval: Option<f64>,
    /// Continuation of `u` past cusp ends; scheme default if absent.
    pub far_rule: Option<PotentialFarRule>,
    /// Use closed-form `r₀` when the initial metric carries one (explicit scheme).
    pub prefer_exact_ricci: bool,
    pub enforce_monitors: bool,
    pub max_steps: usize,
    pub initial_dt: Option<f64>,
    /// Stop once `sup|K| > resolution_factor / h²`.
    pub resolution_factor: f64,
    /// Outer fraction of the grid used to fit cusp constants.
    pub cusp_fit_fraction: f64,
    pub keep_snapshots: bool,
    pub classify: ClassifyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: FlowMode::Normalized,
            scheme: Scheme::ExplicitRk4,
            t_end: 1.0,
            cfl: 0.2,
            tolerances: Tolerances::default(),
            record_interval: None,
            far_rule: None,
            prefer_exact_ricci: true,
            enforce_monitors: true,
            max_steps: 50_000_000,
            initial_dt: None,
            resolution_factor: 0.1,
            cusp_fit_fraction: 0.25,
            keep_snapshots: true,
            classify: ClassifyParams::default(),
        }
    }
}

/// One recorded sample; times and metrics are in the mode's own units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub t: f64,
    pub t_normalized: f64,
    pub volume: f64,
    pub sup_abs_k: f64,
    /// Fitted constant of the right cusp, `NaN` without one.
    pub cusp_c_fit: f64,
    pub cusp_c_fit_left: f64,
    pub margin_uupper: f64,
    pub margin_uprime: f64,
    pub margin_voldec: f64,
    pub margin_voleqn: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub sup_abs_u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub model: SurfaceModel,
    pub mode: FlowMode,
    pub scheme: Scheme,
    pub series: Vec<SeriesRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stop: StopReason,
    pub final_state: FlowState,
    pub prediction: Option<Prediction>,
    /// Predicted unnormalized singular time, `+∞` if none.
    pub t_sing_predicted: f64,
    pub t_sing_empirical: Option<EmpiricalTime>,
    pub type_indicator: Vec<(f64, f64)>,
    pub verdict: RunVerdict,
    pub indicator_growth: Option<f64>,
    pub classify: ClassifyParams,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest relative defect of `f̃ = f_t + ½u''` seen at recorded samples.
    pub max_potential_residual: f64,
    pub resolution_limit: f64,
}

impl RunReport {
    /// Report carrying only a recorded series, for post-processing data that
    /// did not come from [`run`]. Diagnostics are filled in.
    pub fn from_series(
        model: SurfaceModel,
        mode: FlowMode,
        series: Vec<SeriesRecord>,
        t_sing_predicted: f64,
        stop: StopReason,
    ) -> Self {
        let n = model.grid().len();
        let margins = Margins::infinite();
        let final_state = FlowState {
            t: series.last().map_or(0.0, |r| r.t_normalized),
            u: alloc::vec![0.0; n],
            u_t: alloc::vec![0.0; n],
            ftilde: alloc::vec![1.0; n],
            monitors: MonitorConstants {
                c_voldec: 0.0,
                slack: 0.0,
                voleqn_limit: 0.0,
                latest: margins,
                worst: margins,
            },
        };
        let resolution_limit = 0.1 / (model.grid().h() * model.grid().h());
        let mut report = RunReport {
            model,
            mode,
            scheme: Scheme::ExplicitRk4,
            series,
            snapshots: Vec::new(),
            stop,
            final_state,
            prediction: None,
            t_sing_predicted,
            t_sing_empirical: None,
            type_indicator: Vec::new(),
            verdict: RunVerdict::Unresolved,
            indicator_growth: None,
            classify: ClassifyParams::default(),
            accepted_steps: 0,
            rejected_steps: 0,
            max_potential_residual: 0.0,
            resolution_limit,
        };
        diagnostics::annotate(&mut report);
        report
    }

    /// Monitor constants and worst margins over the run.
    pub fn monitors(&self) -> &MonitorConstants {
        &self.final_state.monitors
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("monitor {monitor} violated at t = {t} (margin {margin:e})")]
    MonitorViolation {
        monitor: &'static str,
        t: f64,
        margin: f64,
        report: Box<RunReport>,
    },
    #[error("step failed at t = {t}: {reason}")]
    StepFailed {
        reason: StepRejected,
        t: f64,
        report: Box<RunReport>,
    },
}

impl FlowError {
    /// Partial report up to the last accepted step, when one exists.
    pub fn report(&self) -> Option<&RunReport> {
        match self {
            FlowError::MonitorViolation { report, .. } | FlowError::StepFailed { report, .. } => {
                Some(report)
            }
            _ => None,
        }
    }
}

/// Integrator bound to one initial metric.
#[derive(Debug, Clone)]
pub struct PotentialFlow {
    model: SurfaceModel,
    reference: ReferenceFamily,
    log_f0: Vec<f64>,
    scheme: Scheme,
    u_stencil: Stencil,
    phi_stencil: Stencil,
    pinned: [bool; 2],
    tolerances: Tolerances,
    cfl: f64,
}

struct Work {
    ftilde: Vec<f64>,
    d2: Vec<f64>,
}

impl PotentialFlow {
    pub fn new(
        initial: &ConformalMetric,
        scheme: Scheme,
        far_rule: Option<PotentialFarRule>,
        prefer_exact_ricci: bool,
        tolerances: Tolerances,
        cfl: f64,
    ) -> Result<Self, FlowError> {
        if !(cfl > 0.0 && cfl.is_finite()) {
            return Err(FlowError::InvalidConfig("cfl must be positive"));
        }
        if !(tolerances.solver > 0.0 && tolerances.newton > 0.0) {
            return Err(FlowError::InvalidConfig("tolerances must be positive"));
        }
        let model = initial.model().clone();
        let grid = *model.grid();
        let far = match (scheme, far_rule) {
            (_, Some(rule)) => rule,
            (Scheme::ExplicitRk4, None) => PotentialFarRule::Neumann,
            (Scheme::ImplicitMetric, None) => PotentialFarRule::Extrapolate,
        };
        if scheme == Scheme::ImplicitMetric && far == PotentialFarRule::Neumann {
            return Err(FlowError::InvalidConfig(
                "implicit metric scheme continues u like log f; use extrapolate or dirichlet",
            ));
        }
        let exact = prefer_exact_ricci && scheme == Scheme::ExplicitRk4;
        let reference = ReferenceFamily::from_metric(initial, exact)?;
        let phi_stencil = model.log_metric_stencil();
        let u_stencil = match scheme {
            Scheme::ImplicitMetric => phi_stencil.linear_part(),
            Scheme::ExplicitRk4 => Stencil::new(
                &grid,
                potential_ghost(&grid, &model.ends()[0], Side::Left, far),
                potential_ghost(&grid, &model.ends()[1], Side::Right, far),
            ),
        };
        let pin = |end: &EndCondition| match end {
            EndCondition::Truncated => true,
            EndCondition::CuspMatch { .. } => far == PotentialFarRule::Dirichlet,
            _ => false,
        };
        let pinned = [pin(&model.ends()[0]), pin(&model.ends()[1])];
        let log_f0 = initial.f().iter().map(|v| math::ln(*v)).collect();
        Ok(Self {
            model,
            reference,
            log_f0,
            scheme,
            u_stencil,
            phi_stencil,
            pinned,
            tolerances,
            cfl,
        })
    }

    pub fn model(&self) -> &SurfaceModel {
        &self.model
    }

    pub fn reference(&self) -> &ReferenceFamily {
        &self.reference
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn len(&self) -> usize {
        self.log_f0.len()
    }

    fn pin(&self, v: &mut [f64], value: f64) {
        let n = v.len() - 1;
        if self.pinned[0] {
            v[0] = value;
        }
        if self.pinned[1] {
            v[n] = value;
        }
    }

    fn is_pinned(&self, i: usize) -> bool {
        (i == 0 && self.pinned[0]) || (i + 1 == self.len() && self.pinned[1])
    }

    /// Largest explicit step allowed for the current metric.
    pub fn cfl_limit(&self, ftilde: &[f64]) -> f64 {
        let h = self.model.grid().h();
        self.cfl * h * h * math::min_of(ftilde)
    }

    /// `u ↦ (log(f̃/f₀) − u, f̃)` at time `t`.
    fn potential_rhs(
        &self,
        t: f64,
        u: &[f64],
        rate: &mut [f64],
        work: &mut Work,
    ) -> Result<(), StepRejected> {
        self.reference.at_into(t, &mut work.ftilde);
        self.u_stencil.apply(u, &mut work.d2);
        for i in 0..u.len() {
            let ft = work.ftilde[i] + RICCI_SCALE * work.d2[i];
            if !(ft > 0.0 && ft.is_finite()) {
                return Err(StepRejected::KahlerLost {
                    index: i,
                    x: self.model.grid().x(i),
                });
            }
            work.ftilde[i] = ft;
            rate[i] = math::ln(ft) - self.log_f0[i] - u[i];
        }
        self.pin(rate, 0.0);
        Ok(())
    }

    /// `w = u_tt + u_t` at a state.
    fn growth_rate(&self, t: f64, u_t: &[f64], ftilde: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut w = alloc::vec![0.0; n];
        match self.scheme {
            Scheme::ExplicitRk4 => {
                let mut d2 = alloc::vec![0.0; n];
                self.u_stencil.linear_part().apply(u_t, &mut d2);
                self.reference.rate_into(t, &mut w);
                for i in 0..n {
                    w[i] = (w[i] + RICCI_SCALE * d2[i]) / ftilde[i];
                }
            }
            Scheme::ImplicitMetric => {
                let phi: Vec<f64> = ftilde.iter().map(|v| math::ln(*v)).collect();
                self.phi_stencil.apply(&phi, &mut w);
                for i in 0..n {
                    w[i] = RICCI_SCALE * w[i] / ftilde[i] - 1.0;
                }
            }
        }
        self.pin(&mut w, 0.0);
        w
    }

    fn margins(&self, state_t: f64, u: &[f64], u_t: &[f64], ftilde: &[f64], c: &MonitorConstants) -> Margins {
        let w = self.growth_rate(state_t, u_t, ftilde);
        let mut identity: f64 = 0.0;
        for i in 0..u.len() {
            let r = math::ln(ftilde[i]) - self.log_f0[i] - u_t[i] - u[i];
            identity = identity.max(math::abs(r));
        }
        Margins {
            uupper: c.u_bound(state_t) + c.slack - math::max_of(u),
            uprime: c.u_t_bound(state_t) + c.slack - math::max_of(u_t),
            voldec: c.w_bound(state_t) + c.slack - math::max_of(&w),
            voleqn: c.voleqn_limit - identity,
        }
    }

    fn finish_state(&self, t: f64, u: Vec<f64>, u_t: Vec<f64>, ftilde: Vec<f64>, prev: &MonitorConstants) -> FlowState {
        let latest = self.margins(t, &u, &u_t, &ftilde, prev);
        let monitors = MonitorConstants {
            latest,
            worst: prev.worst.min_with(&latest),
            ..*prev
        };
        FlowState {
            t,
            u,
            u_t,
            ftilde,
            monitors,
        }
    }

    /// `u = 0`, `u_t = 0`, `f̃ = f₀`, with `C = sup w(0) = sup(−(f₀ + r₀)/f₀)`.
    pub fn initial_state(&self) -> FlowState {
        let n = self.len();
        let ftilde = self.reference.f0().to_vec();
        let zeros = alloc::vec![0.0; n];
        let w0 = self.growth_rate(0.0, &zeros, &ftilde);
        let slack = 10.0 * self.tolerances.solver;
        let c = MonitorConstants {
            c_voldec: math::max_of(&w0),
            slack,
            voleqn_limit: slack,
            latest: Margins::infinite(),
            worst: Margins::infinite(),
        };
        self.finish_state(0.0, zeros.clone(), zeros, ftilde, &c)
    }

    /// One classical RK4 step of the potential equation in normalized time.
    pub fn step_normalized(&self, state: &FlowState, dt: f64) -> Result<FlowState, StepRejected> {
        let limit = self.cfl_limit(&state.ftilde);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-9) {
            return Err(StepRejected::Cfl { dt, limit });
        }
        let n = self.len();
        let mut work = Work {
            ftilde: alloc::vec![0.0; n],
            d2: alloc::vec![0.0; n],
        };
        let t = state.t;
        let u = &state.u;
        let mut k1 = alloc::vec![0.0; n];
        let mut k2 = alloc::vec![0.0; n];
        let mut k3 = alloc::vec![0.0; n];
        let mut k4 = alloc::vec![0.0; n];
        let mut stage = alloc::vec![0.0; n];
        self.potential_rhs(t, u, &mut k1, &mut work)?;
        for i in 0..n {
            stage[i] = u[i] + 0.5 * dt * k1[i];
        }
        self.potential_rhs(t + 0.5 * dt, &stage, &mut k2, &mut work)?;
        for i in 0..n {
            stage[i] = u[i] + 0.5 * dt * k2[i];
        }
        self.potential_rhs(t + 0.5 * dt, &stage, &mut k3, &mut work)?;
        for i in 0..n {
            stage[i] = u[i] + dt * k3[i];
        }
        self.potential_rhs(t + dt, &stage, &mut k4, &mut work)?;
        let mut u_new = alloc::vec![0.0; n];
        for i in 0..n {
            u_new[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut u_t = alloc::vec![0.0; n];
        self.potential_rhs(t + dt, &u_new, &mut u_t, &mut work)?;
        Ok(self.finish_state(t + dt, u_new, u_t, work.ftilde, &state.monitors))
    }

    /// Advances unnormalized time by `ds` through `t = log(1 + s)`.
    pub fn step_unnormalized(&self, state: &FlowState, ds: f64) -> Result<FlowState, StepRejected> {
        self.step_normalized(state, normalized_increment(state.t, ds))
    }

    /// Backward Euler for `φ_t = e^{−φ}·½D²φ − 1`, then `u` by its ODE.
    fn backward_euler(
        &self,
        phi_n: &[f64],
        u_n: &[f64],
        dt: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), StepRejected> {
        let n = self.len();
        let mut phi = phi_n.to_vec();
        let mut g = alloc::vec![0.0; n];
        let mut residual = alloc::vec![0.0; n];
        let inv_h2 = 1.0 / (self.model.grid().h() * self.model.grid().h());
        // Rows are weighted by their diffusion strength so the norm is in
        // units of φ and does not stall at roundoff where f is small.
        let eval = |phi: &[f64], g: &mut [f64], res: &mut [f64]| -> f64 {
            self.phi_stencil.apply(phi, g);
            let mut norm: f64 = 0.0;
            for i in 0..n {
                let e = math::exp(-phi[i]);
                res[i] = if self.is_pinned(i) {
                    phi[i] - phi_n[i]
                } else {
                    phi[i] - phi_n[i] - dt * (e * RICCI_SCALE * g[i] - 1.0)
                };
                let weight = 1.0 + dt * e * inv_h2;
                norm = norm.max(math::abs(res[i]) / weight);
            }
            norm
        };
        let mut norm = eval(&phi, &mut g, &mut residual);
        let mut converged = norm <= self.tolerances.newton;
        let mut iter = 0;
        while !converged && iter < 40 {
            iter += 1;
            if !norm.is_finite() {
                break;
            }
            let mut jac = Banded::zeros(n);
            let mut scale = alloc::vec![0.0; n];
            for i in 0..n {
                let e = math::exp(-phi[i]);
                jac.diag[i] = 1.0 + dt * e * RICCI_SCALE * g[i];
                scale[i] = -dt * e * RICCI_SCALE;
            }
            self.phi_stencil.add_jacobian(&scale, &mut jac);
            for (side, i) in [(0usize, 0usize), (1, n - 1)] {
                if self.pinned[side] {
                    jac.diag[i] = 1.0;
                    jac.lower[i] = 0.0;
                    jac.upper[i] = 0.0;
                    if side == 0 {
                        jac.first_corner = 0.0;
                    } else {
                        jac.last_corner = 0.0;
                    }
                }
            }
            let mut delta: Vec<f64> = residual.iter().map(|r| -r).collect();
            if jac.solve(&mut delta).is_none() {
                break;
            }
            // The residual can sit at roundoff above the tolerance once the
            // update itself is negligible.
            let step = delta.iter().fold(0.0f64, |m, d| m.max(math::abs(*d)));
            if step <= self.tolerances.newton {
                for i in 0..n {
                    phi[i] += delta[i];
                }
                converged = true;
                break;
            }
            // Damped update: halve until the residual stops growing.
            let mut lambda = 1.0;
            let mut trial = alloc::vec![0.0; n];
            let mut accepted = false;
            for _ in 0..12 {
                for i in 0..n {
                    trial[i] = phi[i] + lambda * delta[i];
                }
                let trial_norm = eval(&trial, &mut g, &mut residual);
                if trial_norm.is_finite() && (trial_norm < norm || trial_norm <= self.tolerances.newton) {
                    phi.copy_from_slice(&trial);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
            converged = norm <= self.tolerances.newton;
        }
        if !converged {
            return Err(StepRejected::NewtonFailed { residual: norm });
        }
        let mut u = alloc::vec![0.0; n];
        for i in 0..n {
            u[i] = if self.is_pinned(i) {
                u_n[i]
            } else {
                (u_n[i] + dt * (phi[i] - self.log_f0[i])) / (1.0 + dt)
            };
        }
        Ok((phi, u))
    }

    /// Richardson-extrapolated implicit step; returns the new state and the
    /// local error estimate `sup|fine − coarse|`.
    pub fn step_implicit(&self, state: &FlowState, dt: f64) -> Result<(FlowState, f64), StepRejected> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StepRejected::Cfl { dt, limit: f64::INFINITY });
        }
        let phi_n: Vec<f64> = state.ftilde.iter().map(|v| math::ln(*v)).collect();
        let (phi_c, u_c) = self.backward_euler(&phi_n, &state.u, dt)?;
        let (phi_h, u_h) = self.backward_euler(&phi_n, &state.u, 0.5 * dt)?;
        let (phi_f, u_f) = self.backward_euler(&phi_h, &u_h, 0.5 * dt)?;
        let n = self.len();
        let mut err: f64 = 0.0;
        let mut phi = alloc::vec![0.0; n];
        let mut u = alloc::vec![0.0; n];
        for i in 0..n {
            err = err
                .max(math::abs(phi_f[i] - phi_c[i]))
                .max(math::abs(u_f[i] - u_c[i]));
            phi[i] = 2.0 * phi_f[i] - phi_c[i];
            u[i] = 2.0 * u_f[i] - u_c[i];
        }
        let ftilde: Vec<f64> = phi.iter().map(|p| math::exp(*p)).collect();
        if let Some(i) = ftilde.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(StepRejected::KahlerLost {
                index: i,
                x: self.model.grid().x(i),
            });
        }
        let u_t: Vec<f64> = (0..n)
            .map(|i| if self.is_pinned(i) { 0.0 } else { phi[i] - self.log_f0[i] - u[i] })
            .collect();
        Ok((self.finish_state(state.t + dt, u, u_t, ftilde, &state.monitors), err))
    }

    /// Relative defect of `f̃ = f_t + ½u''`.
    pub fn potential_residual(&self, state: &FlowState) -> f64 {
        let ft = self.reference.at(state.t);
        let d2 = self.u_stencil.apply_vec(&state.u);
        let mut worst: f64 = 0.0;
        for i in 0..ft.len() {
            if self.is_pinned(i) {
                continue;
            }
            let e = (state.ftilde[i] - ft[i] - RICCI_SCALE * d2[i]) / state.ftilde[i];
            worst = worst.max(math::abs(e));
        }
        worst
    }
}

/// Normalized increment `dt` matching an unnormalized `ds` from time `t`.
pub fn normalized_increment(t: f64, ds: f64) -> f64 {
    // 1 + s = e^t, so dt = log(1 + ds·e^{−t}).
    math::ln_1p(ds * math::exp(-t))
}

struct Recorder<'a> {
    flow: &'a PotentialFlow,
    config: &'a RunConfig,
    series: Vec<SeriesRecord>,
    snapshots: Vec<Snapshot>,
    max_potential_residual: f64,
}

struct Observation {
    sup_abs_k: f64,
}

impl Recorder<'_> {
    fn scale(&self, t: f64) -> f64 {
        if self.config.mode.is_unnormalized() {
            math::exp(t)
        } else {
            1.0
        }
    }

    fn clock(&self, t: f64) -> f64 {
        if self.config.mode.is_unnormalized() {
            math::exp_m1(t)
        } else {
            t
        }
    }

    fn observe(&self, state: &FlowState) -> Result<Observation, GeometryError> {
        let scale = self.scale(state.t);
        let f: Vec<f64> = state.ftilde.iter().map(|v| v * scale).collect();
        let k = geometry::curvature_of(self.flow.model(), &f)?;
        Ok(Observation {
            sup_abs_k: k.sup_abs_k,
        })
    }

    fn record(&mut self, state: &FlowState) -> Result<(), GeometryError> {
        let model = self.flow.model();
        let scale = self.scale(state.t);
        let f: Vec<f64> = state.ftilde.iter().map(|v| v * scale).collect();
        let k = geometry::curvature_of(model, &f)?;
        let volume = geometry::volume_of(model, &f).unwrap_or(f64::NAN);
        let right_cusp = matches!(model.ends()[1], EndCondition::CuspMatch { .. });
        let left_cusp = matches!(model.ends()[0], EndCondition::CuspMatch { .. });
        let fit = |on: bool, right: bool| {
            if on {
                geometry::cusp_constant_fit(model.grid(), &f, right, self.config.cusp_fit_fraction)
                    .unwrap_or(f64::NAN)
            } else {
                f64::NAN
            }
        };
        let cusp_c_fit = fit(right_cusp, true);
        let cusp_c_fit_left = fit(left_cusp, false);
        let f0 = self.flow.reference.f0();
        let ratios = f.iter().zip(f0).map(|(a, b)| a / b);
        let (min_ratio, max_ratio) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        });
        let m = state.monitors.latest;
        self.series.push(SeriesRecord {
            t: self.clock(state.t),
            t_normalized: state.t,
            volume,
            sup_abs_k: k.sup_abs_k,
            cusp_c_fit,
            cusp_c_fit_left,
            margin_uupper: m.uupper,
            margin_uprime: m.uprime,
            margin_voldec: m.voldec,
            margin_voleqn: m.voleqn,
            sup_abs_u: math::sup_abs(&state.u),
            min_ratio,
            max_ratio,
        });
        if self.config.keep_snapshots {
            self.snapshots.push(Snapshot {
                t: self.clock(state.t),
                f,
            });
        }
        self.max_potential_residual = self
            .max_potential_residual
            .max(self.flow.potential_residual(state));
        Ok(())
    }
}

fn validate(config: &RunConfig, initial: &ConformalMetric) -> Result<(), FlowError> {
    if !(config.t_end > 0.0 && config.t_end.is_finite()) {
        return Err(FlowError::InvalidConfig("t_end must be positive and finite"));
    }
    if let Some(r) = config.record_interval {
        if !(r > 0.0 && r.is_finite()) {
            return Err(FlowError::InvalidConfig("record_interval must be positive"));
        }
    }
    if !(config.resolution_factor > 0.0) {
        return Err(FlowError::InvalidConfig("resolution_factor must be positive"));
    }
    if !(config.cusp_fit_fraction > 0.0 && config.cusp_fit_fraction <= 1.0) {
        return Err(FlowError::InvalidConfig("cusp_fit_fraction must lie in (0, 1]"));
    }
    if config.mode == FlowMode::FlatLongtime
        && initial.model().ends() != &[EndCondition::FlatEnd, EndCondition::FlatEnd]
    {
        return Err(FlowError::InvalidConfig("flat_longtime needs a cylinder with flat ends"));
    }
    Ok(())
}

/// Integrates to `t_end` or to a singularity stop and attaches diagnostics.
pub fn run(initial: &ConformalMetric, config: &RunConfig) -> Result<RunReport, FlowError> {
    validate(config, initial)?;
    let flow = PotentialFlow::new(
        initial,
        config.scheme,
        config.far_rule,
        config.prefer_exact_ricci,
        config.tolerances,
        config.cfl,
    )?;
    let unnormalized = config.mode.is_unnormalized();
    let t_end = if unnormalized {
        math::ln_1p(config.t_end)
    } else {
        config.t_end
    };
    let h = initial.grid().h();
    let resolution_limit = config.resolution_factor / (h * h);
    let record_interval = config.record_interval.unwrap_or(config.t_end / 1000.0);

    let prediction = geometry::volume(initial)
        .ok()
        .and_then(|v| diagnostics::predict_for_surface(initial.model(), v));
    let t_sing_predicted = prediction.as_ref().map_or(f64::INFINITY, |p| p.t_pred);

    let mut rec = Recorder {
        flow: &flow,
        config,
        series: Vec::new(),
        snapshots: Vec::new(),
        max_potential_residual: 0.0,
    };
    let mut state = flow.initial_state();
    rec.record(&state)?;
    let mut next_record = record_interval;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut dt_implicit = config.initial_dt.unwrap_or(1e-4).min(t_end);
    let dt_floor = 1e-14;

    let finish = |rec: Recorder<'_>,
                  state: FlowState,
                  stop: StopReason,
                  accepted: usize,
                  rejected: usize|
     -> RunReport {
        let mut report = RunReport {
            model: initial.model().clone(),
            mode: config.mode,
            scheme: config.scheme,
            series: rec.series,
            snapshots: rec.snapshots,
            stop,
            final_state: state,
            prediction: prediction.clone(),
            t_sing_predicted,
            t_sing_empirical: None,
            type_indicator: Vec::new(),
            verdict: RunVerdict::Unresolved,
            indicator_growth: None,
            classify: config.classify,
            accepted_steps: accepted,
            rejected_steps: rejected,
            max_potential_residual: rec.max_potential_residual,
            resolution_limit,
        };
        diagnostics::annotate(&mut report);
        report
    };

    let stop = loop {
        if state.t >= t_end * (1.0 - 1e-14) {
            break StopReason::ReachedEnd;
        }
        if accepted >= config.max_steps {
            break StopReason::StepLimit;
        }
        let remaining = t_end - state.t;
        let attempt = match config.scheme {
            Scheme::ExplicitRk4 => {
                let mut dt = flow.cfl_limit(&state.ftilde).min(remaining);
                loop {
                    match flow.step_normalized(&state, dt) {
                        Ok(s) => break Ok(s),
                        Err(StepRejected::KahlerLost { .. }) if dt * 0.5 > dt_floor => {
                            rejected += 1;
                            dt *= 0.5;
                        }
                        Err(e) => break Err(e),
                    }
                }
            }
            Scheme::ImplicitMetric => loop {
                let dt = dt_implicit.min(remaining);
                match flow.step_implicit(&state, dt) {
                    Ok((s, err)) => {
                        let tol = config.tolerances.solver;
                        let factor = if err > 0.0 {
                            (0.9 * math::sqrt(tol / err)).clamp(0.2, 2.0)
                        } else {
                            2.0
                        };
                        if err <= tol {
                            if dt < remaining {
                                dt_implicit = dt * factor;
                            }
                            break Ok(s);
                        }
                        rejected += 1;
                        dt_implicit = dt * factor;
                    }
                    Err(e) => {
                        rejected += 1;
                        dt_implicit = dt * 0.25;
                        if dt_implicit < dt_floor {
                            break Err(e);
                        }
                    }
                }
                if dt_implicit < dt_floor {
                    break Err(StepRejected::NewtonFailed { residual: f64::NAN });
                }
            },
        };
        let next = match attempt {
            Ok(s) => s,
            Err(StepRejected::KahlerLost { .. }) => break StopReason::KahlerLost,
            Err(reason) => {
                let t = rec.clock(state.t);
                let report = finish(rec, state, StopReason::KahlerLost, accepted, rejected);
                return Err(FlowError::StepFailed {
                    reason,
                    t,
                    report: Box::new(report),
                });
            }
        };
        accepted += 1;
        state = next;
        if config.enforce_monitors {
            if let Some((monitor, margin)) = state.monitors.latest.violation() {
                let t = rec.clock(state.t);
                rec.record(&state)?;
                let report = finish(rec, state, StopReason::ReachedEnd, accepted, rejected);
                return Err(FlowError::MonitorViolation {
                    monitor,
                    t,
                    margin,
                    report: Box::new(report),
                });
            }
        }
        let obs = rec.observe(&state)?;
        if obs.sup_abs_k > resolution_limit {
            rec.record(&state)?;
            break StopReason::ResolutionLimit;
        }
        if rec.clock(state.t) >= next_record * (1.0 - 1e-12) || state.t >= t_end * (1.0 - 1e-14) {
            rec.record(&state)?;
            while next_record <= rec.clock(state.t) * (1.0 + 1e-12) {
                next_record += record_interval;
            }
        }
    };
    let last_t = rec.series.last().map(|r| r.t_normalized);
    if last_t != Some(state.t) {
        rec.record(&state)?;
    }
    Ok(finish(rec, state, stop, accepted, rejected))
}

/// Unnormalized run on a flat-ended cylinder.
pub fn run_longtime_flat(initial: &ConformalMetric, config: &RunConfig) -> Result<RunReport, FlowError> {
    let config = RunConfig {
        mode: FlowMode::FlatLongtime,
        ..config.clone()
    };
    run(initial, &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        carlson_griffiths_initial, flat, flat_perturbed, poincare_cusp, round_sphere, Bump, Grid,
        Topology,
    };

    fn truncated_cusp(n: usize) -> SurfaceModel {
        SurfaceModel::new(
            Topology::OnePuncture,
            Grid::new(1.0, 40.0, n).unwrap(),
            EndCondition::Truncated,
            EndCondition::CuspMatch { c: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn ricci_coefficient_examples() {
        let g = poincare_cusp(1.0, &truncated_cusp(1024)).unwrap();
        let r = ricci_coefficient(&g).unwrap();
        for (ri, fi) in r.iter().zip(g.f()).skip(1) {
            assert!((ri + fi).abs() < 2e-3 * fi);
        }
        let flat_model = SurfaceModel::flat_cylinder(-2.0, 2.0, 32).unwrap();
        let r = ricci_coefficient(&flat(&flat_model, 2.0).unwrap()).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
        let cap = SurfaceModel::new(
            Topology::OnePuncture,
            Grid::new(-6.0, 6.0, 1024).unwrap(),
            EndCondition::SmoothCap,
            EndCondition::Truncated,
        )
        .unwrap();
        let g = round_sphere(&cap, 4.0 * core::f64::consts::PI).unwrap();
        let r = ricci_coefficient(&g).unwrap();
        for (ri, fi) in r.iter().zip(g.f()).take(1020) {
            assert!((ri - fi).abs() < 1e-3 * fi);
        }
    }

    #[test]
    fn reference_family_endpoints() {
        let model = SurfaceModel::one_puncture(-3.0, 20.0, 128, 1.0).unwrap();
        let g = carlson_griffiths_initial(&model, 1.0, Bump::with_area(10.0)).unwrap();
        let fam = ReferenceFamily::from_metric(&g, true).unwrap();
        assert_eq!(fam.at(0.0), g.f());
        let late = fam.at(20.0);
        let sup = fam
            .f0()
            .iter()
            .zip(fam.r0())
            .fold(0.0f64, |m, (f, r)| m.max((f + r).abs()));
        for (i, v) in late.iter().enumerate() {
            let err = (v + fam.r0()[i]).abs();
            assert!(err <= math::exp(-20.0) * sup + 1e-15);
        }
    }

    #[test]
    fn initial_state_has_zero_velocity() {
        let model = SurfaceModel::one_puncture(-3.0, 20.0, 128, 1.0).unwrap();
        let g = carlson_griffiths_initial(&model, 1.0, Bump::with_area(10.0)).unwrap();
        for scheme in [Scheme::ExplicitRk4, Scheme::ImplicitMetric] {
            let flow = PotentialFlow::new(&g, scheme, None, true, Tolerances::default(), 0.2).unwrap();
            let s = flow.initial_state();
            assert!(s.u_t.iter().all(|v| *v == 0.0));
            assert_eq!(s.ftilde, g.f());
            // C = sup(−1 − K₀) with K₀ from the reference Ricci coefficient.
            let c = flow
                .reference()
                .f0()
                .iter()
                .zip(flow.reference().r0())
                .fold(f64::NEG_INFINITY, |m, (f, r)| m.max(-(f + r) / f));
            assert!((s.monitors.c_voldec - c).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_cylinder_single_step() {
        let model = SurfaceModel::flat_cylinder(-5.0, 5.0, 64).unwrap();
        let g = flat(&model, 2.0).unwrap();
        let flow = PotentialFlow::new(&g, Scheme::ExplicitRk4, None, true, Tolerances::default(), 0.2).unwrap();
        let s0 = flow.initial_state();
        let dt = 0.5 * flow.cfl_limit(&s0.ftilde);
        let s1 = flow.step_normalized(&s0, dt).unwrap();
        // u solves u_t + u = −t exactly: u = 1 − t − e^{−t} = O(dt²).
        let exact = 1.0 - dt - math::exp(-dt);
        for (u, ft) in s1.u.iter().zip(&s1.ftilde) {
            assert!((u - exact).abs() < 1e-12);
            assert!((ft - 2.0 * math::exp(-dt)).abs() < 1e-14);
        }
        assert!(matches!(
            flow.step_normalized(&s0, 10.0 * dt),
            Err(StepRejected::Cfl { .. })
        ));
    }

    #[test]
    fn flat_cylinder_is_static_unnormalized() {
        let model = SurfaceModel::flat_cylinder(-5.0, 5.0, 64).unwrap();
        let g = flat(&model, 1.0).unwrap();
        for scheme in [Scheme::ExplicitRk4, Scheme::ImplicitMetric] {
            let cfg = RunConfig {
                mode: FlowMode::FlatLongtime,
                scheme,
                t_end: 5.0,
                ..RunConfig::default()
            };
            let report = run_longtime_flat(&g, &cfg).unwrap();
            assert_eq!(report.stop, StopReason::ReachedEnd);
            let last = report.snapshots.last().unwrap();
            for v in &last.f {
                assert!((v - 1.0).abs() < 1e-9, "{scheme:?}: {v}");
            }
            assert_eq!(report.verdict, RunVerdict::NoSingularity);
        }
    }

    #[test]
    fn poincare_unnormalized_expands_linearly() {
        let model = SurfaceModel::new(
            Topology::OnePuncture,
            Grid::new(1.0, 40.0, 128).unwrap(),
            EndCondition::Truncated,
            EndCondition::CuspMatch { c: 1.0 },
        )
        .unwrap();
        let g = poincare_cusp(1.0, &model).unwrap();
        let cfg = RunConfig {
            mode: FlowMode::Unnormalized,
            t_end: 1.0,
            ..RunConfig::default()
        };
        let report = run(&g, &cfg).unwrap();
        for snap in &report.snapshots {
            for (x, f) in model.grid().xs().zip(&snap.f) {
                assert!((f * x * x - (1.0 + snap.t)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn step_unnormalized_matches_reparametrization() {
        let model = SurfaceModel::flat_cylinder(-5.0, 5.0, 64).unwrap();
        let g = flat_perturbed(&model, 1.0, &[(2, 0.2)]).unwrap();
        let flow = PotentialFlow::new(&g, Scheme::ExplicitRk4, None, true, Tolerances::default(), 0.2).unwrap();
        let s0 = flow.initial_state();
        let ds = 0.5 * flow.cfl_limit(&s0.ftilde);
        let a = flow.step_unnormalized(&s0, ds).unwrap();
        assert!((a.s() - ds).abs() < 1e-15);
        let b = flow.step_normalized(&s0, normalized_increment(0.0, ds)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn implicit_and_explicit_agree_on_flat_perturbation() {
        let model = SurfaceModel::flat_cylinder(-5.0, 5.0, 64).unwrap();
        let g = flat_perturbed(&model, 1.0, &[(2, 0.2)]).unwrap();
        let base = RunConfig {
            mode: FlowMode::Normalized,
            t_end: 0.5,
            prefer_exact_ricci: false,
            record_interval: Some(0.1),
            tolerances: Tolerances {
                solver: 1e-7,
                newton: 1e-12,
            },
            ..RunConfig::default()
        };
        let a = run(&g, &base).unwrap();
        let b = run(
            &g,
            &RunConfig {
                scheme: Scheme::ImplicitMetric,
                ..base.clone()
            },
        )
        .unwrap();
        let fa = &a.final_state.ftilde;
        let fb = &b.final_state.ftilde;
        for (x, y) in fa.iter().zip(fb) {
            assert!((x - y).abs() < 1e-6 * x, "{x} vs {y}");
        }
    }
}
