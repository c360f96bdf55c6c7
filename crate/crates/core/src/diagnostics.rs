//! Post-processing of run telemetry: predicted and empirical singular times,
//! the type indicator `(T − t)·sup|K|`, and comparison with the cigar profile.

use alloc::vec::Vec;

use crate::cohomology::{self, builtin, Classification, CohomologyClass, CohomologyError, ManifoldDescription, Rational, SingularityVerdict};
use crate::fit::linear_fit;
use crate::flow::{FlowMode, RunReport, SeriesRecord};
use crate::geometry::{self, EndCondition, GeometryError, SurfaceModel, Topology};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("fewer than {needed} samples inside the last resolved decade (found {found})")]
    InsufficientResolution { needed: usize, found: usize },
    #[error("volume is not decreasing; no blow-up time to extrapolate")]
    NonDecreasingVolume,
    #[error("curvature profile undefined: {0}")]
    ProfileUndefined(&'static str),
    #[error("report has no samples")]
    EmptySeries,
}

/// Thresholds turning finite telemetry into a verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyParams {
    /// Indicator growth `G` that counts as unbounded.
    pub growth_factor: f64,
    /// Band `[1/B, B]` that counts as bounded.
    pub band: f64,
    /// Minimum samples inside the last decade of `T − t`.
    pub min_samples: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            growth_factor: 5.0,
            band: 3.0,
            min_samples: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunVerdict {
    TypeILike,
    TypeIILike,
    NoSingularity,
    Unresolved,
}

impl RunVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunVerdict::TypeILike => "TypeI-like",
            RunVerdict::TypeIILike => "TypeII-like",
            RunVerdict::NoSingularity => "NoSingularity",
            RunVerdict::Unresolved => "Unresolved",
        }
    }
}

impl core::fmt::Display for RunVerdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Unnormalized singular time, `+∞` if none.
    pub t_pred: f64,
    pub t_pred_normalized: f64,
    pub classification: Classification,
    pub verdict: SingularityVerdict,
}

/// Cohomological prediction for a manifold and initial class.
pub fn predict(m: &ManifoldDescription, omega0: &CohomologyClass) -> Result<Prediction, DiagnosticsError> {
    let verdict = cohomology::classify(m, omega0)?;
    Ok(Prediction {
        t_pred: verdict.t_sing_unnormalized.to_f64(),
        t_pred_normalized: verdict.t_sing_normalized,
        classification: verdict.classification,
        verdict,
    })
}

/// Prediction for a rotationally symmetric surface of the given area.
///
/// One cusp and a cap is the sphere minus a point with `∫ω₀ = volume`; two
/// flat or cusp ends is the cylinder `ℂ*`. Truncated windows have no
/// compactification and give `None`.
pub fn predict_for_surface(model: &SurfaceModel, volume: f64) -> Option<Prediction> {
    let ends = model.ends();
    let m = match (model.topology(), ends[0], ends[1]) {
        (Topology::OnePuncture, EndCondition::SmoothCap, EndCondition::CuspMatch { .. }) => builtin::s2_one_point(),
        (Topology::TwoPuncture, l, r) if !matches!(l, EndCondition::Truncated) && !matches!(r, EndCondition::Truncated) => {
            builtin::cstar()
        }
        _ => return None,
    };
    let area = Rational::from_float(volume)?;
    let omega0 = CohomologyClass::new(alloc::vec![area; m.basis_len()]);
    predict(&m, &omega0).ok()
}

/// `T` in the clock of the report's mode.
fn predicted_in_clock(report: &RunReport) -> f64 {
    match report.mode {
        FlowMode::Normalized => math::ln_1p(report.t_sing_predicted),
        _ => report.t_sing_predicted,
    }
}

/// `(t, (T − t)·sup|K|)` for samples strictly before the predicted time.
pub fn type_indicator(report: &RunReport) -> Vec<(f64, f64)> {
    let t_pred = predicted_in_clock(report);
    if !t_pred.is_finite() {
        return Vec::new();
    }
    report
        .series
        .iter()
        .filter(|r| r.t < t_pred && r.sup_abs_k.is_finite())
        .map(|r| (r.t, (t_pred - r.t) * r.sup_abs_k))
        .collect()
}

/// Indicator samples with `T − t` inside the last decade `(0, 10·(T − t_last)]`.
fn last_decade(indicator: &[(f64, f64)], t_pred: f64) -> &[(f64, f64)] {
    let Some(&(t_last, _)) = indicator.last() else {
        return indicator;
    };
    let reach = 10.0 * (t_pred - t_last);
    let start = indicator.iter().position(|(t, _)| t_pred - t <= reach).unwrap_or(indicator.len());
    &indicator[start..]
}

/// Ratio of the final indicator value to its minimum over the last decade.
pub fn indicator_growth(report: &RunReport) -> Option<f64> {
    let indicator = type_indicator(report);
    let window = last_decade(&indicator, predicted_in_clock(report));
    let last = window.last()?.1;
    let min = window.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    (min > 0.0).then(|| last / min)
}

/// Verdict from the indicator over the last resolved decade of `T − t`.
pub fn classify_run(report: &RunReport) -> Result<RunVerdict, DiagnosticsError> {
    if report.series.is_empty() {
        return Err(DiagnosticsError::EmptySeries);
    }
    let t_pred = predicted_in_clock(report);
    if !t_pred.is_finite() {
        return Ok(if report.stop.is_singular() {
            RunVerdict::Unresolved
        } else {
            RunVerdict::NoSingularity
        });
    }
    let params = report.classify;
    let indicator = type_indicator(report);
    let window = last_decade(&indicator, t_pred);
    if window.len() < params.min_samples {
        return Err(DiagnosticsError::InsufficientResolution {
            needed: params.min_samples,
            found: window.len(),
        });
    }
    let first = window[0].1;
    let last = window[window.len() - 1].1;
    let min = window.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    if min > 0.0 && last / min >= params.growth_factor {
        return Ok(RunVerdict::TypeIILike);
    }
    if !report.stop.is_singular() {
        return Ok(RunVerdict::Unresolved);
    }
    let banded = first > 0.0
        && window
            .iter()
            .all(|(_, v)| *v >= first / params.band && *v <= first * params.band);
    Ok(if banded {
        RunVerdict::TypeILike
    } else {
        RunVerdict::Unresolved
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalTime {
    /// Root of the linear fit of unnormalized volume against `s`.
    pub t_sing: f64,
    pub slope: f64,
    pub intercept: f64,
    pub samples: usize,
    /// Root of a linear fit of `1/sup|K|` over the last quarter of samples.
    pub curvature_estimate: Option<f64>,
}

/// Unnormalized `(s, Vol, sup|K|)` from a record in any mode.
fn unnormalized_sample(mode: FlowMode, r: &SeriesRecord) -> (f64, f64, f64) {
    match mode {
        FlowMode::Normalized => {
            let scale = math::exp(r.t);
            (math::exp_m1(r.t), scale * r.volume, r.sup_abs_k / scale)
        }
        _ => (r.t, r.volume, r.sup_abs_k),
    }
}

/// Extrapolated blow-up time in the unnormalized clock.
pub fn empirical_t_sing(report: &RunReport) -> Result<EmpiricalTime, DiagnosticsError> {
    let samples: Vec<(f64, f64, f64)> = report
        .series
        .iter()
        .map(|r| unnormalized_sample(report.mode, r))
        .filter(|(s, v, _)| s.is_finite() && v.is_finite())
        .collect();
    if samples.len() < 10 {
        return Err(DiagnosticsError::NonDecreasingVolume);
    }
    let s: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let v: Vec<f64> = samples.iter().map(|p| p.1).collect();
    let (slope, intercept) = linear_fit(&s, &v).ok_or(DiagnosticsError::NonDecreasingVolume)?;
    if !(slope < 0.0) {
        return Err(DiagnosticsError::NonDecreasingVolume);
    }
    let tail = &samples[samples.len() - samples.len() / 4..];
    let (ks, kinv): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .filter(|p| p.2 > 0.0 && p.2.is_finite())
        .map(|p| (p.0, 1.0 / p.2))
        .unzip();
    let curvature_estimate = if ks.len() >= 3 {
        linear_fit(&ks, &kinv).and_then(|(a, b)| (a < 0.0).then(|| -b / a))
    } else {
        None
    };
    Ok(EmpiricalTime {
        t_sing: -intercept / slope,
        slope,
        intercept,
        samples: samples.len(),
        curvature_estimate,
    })
}

/// Curvature of the cigar `(dx² + dy²)/(1 + x² + y²)` rescaled to unit
/// maximum, as a function of geodesic distance from the tip.
///
/// The unscaled cigar has `K = 2/(1 + ρ²)` and distance `asinh ρ` from the tip,
/// so `K = 2 sech² r`; doubling the metric gives `sech²(r/√2)`.
pub fn cigar_profile(r: f64) -> f64 {
    let c = math::cosh(r / core::f64::consts::SQRT_2);
    1.0 / (c * c)
}

/// Radius over which profiles are compared, in units of the peak curvature.
const PROFILE_RADIUS: f64 = 4.0;
const PROFILE_POINTS: usize = 200;

/// L² distance on `[0, min(4, r_max)]` between the rescaled curvature profile
/// of `f` and [`cigar_profile`].
pub fn profile_distance(model: &SurfaceModel, f: &[f64]) -> Result<f64, DiagnosticsError> {
    let mut k = geometry::curvature_of(model, f)?.k;
    // Truncated end nodes extrapolate log f and are only first order; drop them.
    let last = k.len() - 1;
    let lo = usize::from(model.ends()[0] == EndCondition::Truncated);
    let hi = last - usize::from(model.ends()[1] == EndCondition::Truncated);
    k.truncate(hi + 1);
    let k_max = math::max_of(&k[lo..]);
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(DiagnosticsError::ProfileUndefined("no positive curvature"));
    }
    // Leftmost node within 1e−3 of the peak, so a flat-topped profile starts at the cap.
    let peak = lo + k[lo..].iter().position(|v| *v >= k_max * (1.0 - 1e-3)).unwrap_or(0);
    let f = &f[..=hi];
    let h = model.grid().h();
    let root: Vec<f64> = f[peak..].iter().map(|v| math::sqrt(k_max * v)).collect();
    let mut r = Vec::with_capacity(root.len() + 1);
    let mut kk = Vec::with_capacity(root.len() + 1);
    let mut acc = 0.0;
    if peak == 0 && model.ends()[0] == EndCondition::SmoothCap {
        // Distance from the pole to the first node of a cap, f ∝ e^{2x}.
        r.push(0.0);
        kk.push(k[0] / k_max);
        acc = root[0];
    }
    for (j, w) in root.iter().enumerate() {
        if j > 0 {
            acc += 0.5 * h * (root[j - 1] + w);
        }
        r.push(acc);
        kk.push(k[peak + j] / k_max);
    }
    let r_max = *r.last().unwrap_or(&0.0);
    if r_max < 1.0 {
        return Err(DiagnosticsError::ProfileUndefined("profile shorter than one curvature radius"));
    }
    let radius = r_max.min(PROFILE_RADIUS);
    let step = radius / PROFILE_POINTS as f64;
    let mut cursor = 0;
    let mut sum = 0.0;
    for p in 0..=PROFILE_POINTS {
        let x = p as f64 * step;
        while cursor + 2 < r.len() && r[cursor + 1] < x {
            cursor += 1;
        }
        let (r0, r1) = (r[cursor], r[cursor + 1]);
        let lam = if r1 > r0 { ((x - r0) / (r1 - r0)).clamp(0.0, 1.0) } else { 0.0 };
        let kv = kk[cursor] + lam * (kk[cursor + 1] - kk[cursor]);
        let d = kv - cigar_profile(x);
        let w = if p == 0 || p == PROFILE_POINTS { 0.5 } else { 1.0 };
        sum += w * d * d;
    }
    Ok(math::sqrt(sum * step))
}

/// [`profile_distance`] for the snapshot nearest to time `t`.
pub fn cigar_profile_distance(report: &RunReport, t: f64) -> Result<f64, DiagnosticsError> {
    let snap = report
        .snapshots
        .iter()
        .min_by(|a, b| math::abs(a.t - t).total_cmp(&math::abs(b.t - t)))
        .ok_or(DiagnosticsError::ProfileUndefined("no snapshots"))?;
    profile_distance(&report.model, &snap.f)
}

/// Fills the derived fields of a finished report.
pub(crate) fn annotate(report: &mut RunReport) {
    report.type_indicator = type_indicator(report);
    report.indicator_growth = indicator_growth(report);
    report.verdict = classify_run(report).unwrap_or(RunVerdict::Unresolved);
    report.t_sing_empirical = if report.t_sing_predicted.is_finite() {
        empirical_t_sing(report).ok()
    } else {
        None
    };
}
