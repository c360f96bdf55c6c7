//! Kähler-Ricci flow on punctured Riemann surfaces.
//!
//! Two halves share this crate:
//!
//! * [`cohomology`] decides, in exact rational arithmetic, when the class
//!   `[ω₀] + 2πT[K + D]` leaves a polyhedral Kähler cone and whether the
//!   resulting singularity is forced to be type-II.
//! * [`geometry`], [`flow`] and [`diagnostics`] solve the scalar potential
//!   flow on rotationally symmetric surfaces written in the cylinder
//!   coordinate `x = log(1/|z|)` and compare the outcome with the prediction.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cohomology;
pub mod diagnostics;
pub mod flow;
pub mod geometry;

mod fit;
mod linalg;
mod math;
mod stencil;

pub use cohomology::{
    class_at_time, classify, normalized_time_of, singularity_time, unnormalized_class_at,
    Classification, CohomologyClass, CohomologyError, Divisor, KahlerCone, ManifoldDescription,
    PiRational, Rational, SingularityTime, SingularityVerdict,
};
pub use diagnostics::{
    classify_run, cigar_profile_distance, empirical_t_sing, predict, predict_for_surface,
    ClassifyParams, DiagnosticsError, EmpiricalTime, Prediction, RunVerdict,
};
pub use flow::{
    ricci_coefficient, run, run_longtime_flat, FlowError, FlowMode, FlowState, Margins,
    MonitorConstants, PotentialFarRule, PotentialFlow, ReferenceFamily, RunConfig, RunReport,
    Scheme, SeriesRecord, Snapshot, StepRejected, StopReason, Tolerances,
};
pub use geometry::{
    carlson_griffiths_initial, gauss_curvature, poincare_cusp, volume, ConformalMetric,
    CurvatureProfile, EndCondition, GeometryError, Grid, SurfaceModel, Topology,
};
