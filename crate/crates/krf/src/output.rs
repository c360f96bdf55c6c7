//! CSV and JSON artifacts.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! runs give byte-identical files. Non-finite values are written as `nan`,
//! `inf` or `-inf` in CSV and as `null` in JSON.

use std::fmt::Write as _;
use std::path::Path;

use krf_core::diagnostics::{self, Prediction};
use krf_core::{CohomologyClass, RunReport, SingularityTime};
use serde_json::{json, Value};

use crate::error::CliError;

pub const SERIES_FILE: &str = "series.csv";
pub const INDICATOR_FILE: &str = "indicator.csv";
pub const CIGAR_FILE: &str = "cigar.csv";
pub const VERDICT_FILE: &str = "verdict.json";
pub const SUMMARY_FILE: &str = "summary.txt";

fn num(v: f64) -> String {
    if v.is_nan() {
        String::from("nan")
    } else if v.is_infinite() {
        String::from(if v > 0.0 { "inf" } else { "-inf" })
    } else {
        format!("{v}")
    }
}

fn jnum(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn series_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "t,volume,sup_abs_K,cusp_c_fit,margin_uupper,margin_uprime,margin_voldec,min_ratio,max_ratio,t_normalized,cusp_c_fit_left,margin_voleqn,sup_abs_u\n",
    );
    for r in &report.series {
        let cells = [
            r.t,
            r.volume,
            r.sup_abs_k,
            r.cusp_c_fit,
            r.margin_uupper,
            r.margin_uprime,
            r.margin_voldec,
            r.min_ratio,
            r.max_ratio,
            r.t_normalized,
            r.cusp_c_fit_left,
            r.margin_voleqn,
            r.sup_abs_u,
        ];
        let line: Vec<String> = cells.iter().map(|v| num(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn indicator_csv(report: &RunReport) -> String {
    let mut out = String::from("t,indicator\n");
    for (t, v) in &report.type_indicator {
        let _ = writeln!(out, "{},{}", num(*t), num(*v));
    }
    out
}

/// Cigar distances for snapshots inside the last decade before `T`.
pub fn cigar_series(report: &RunReport) -> Vec<(f64, f64)> {
    let t_pred = match report.mode {
        krf_core::FlowMode::Normalized => report.t_sing_predicted.ln_1p(),
        _ => report.t_sing_predicted,
    };
    let Some(last) = report.snapshots.last() else {
        return Vec::new();
    };
    if !t_pred.is_finite() || last.t >= t_pred {
        return Vec::new();
    }
    let reach = 10.0 * (t_pred - last.t);
    report
        .snapshots
        .iter()
        .filter(|s| t_pred - s.t <= reach)
        .filter_map(|s| {
            diagnostics::profile_distance(&report.model, &s.f)
                .ok()
                .map(|d| (s.t, d))
        })
        .collect()
}

pub fn cigar_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("t,distance\n");
    for (t, d) in series {
        let _ = writeln!(out, "{},{}", num(*t), num(*d));
    }
    out
}

fn time_json(t: &SingularityTime) -> Value {
    match t {
        SingularityTime::Infinite => json!({"exact": "inf", "decimal": Value::Null}),
        SingularityTime::Finite(v) => json!({"exact": v.to_string(), "decimal": jnum(v.to_f64())}),
    }
}

fn class_json(c: &CohomologyClass) -> Value {
    let exact: Vec<String> = (0..c.len()).map(|i| c.component(i).to_string()).collect();
    let decimal: Vec<Value> = c.to_f64().into_iter().map(jnum).collect();
    json!({"exact": exact, "decimal": decimal})
}

/// Cohomological verdict with exact and decimal fields.
pub fn prediction_json(label: &str, omega0: &CohomologyClass, p: &Prediction) -> Value {
    let v = &p.verdict;
    json!({
        "manifold": label,
        "omega0": class_json(omega0),
        "t_pred": time_json(&v.t_sing_unnormalized),
        "t_pred_normalized": jnum(v.t_sing_normalized),
        "binding_functionals": v.binding_functionals,
        "residual_class": v.residual_class.as_ref().map_or(Value::Null, class_json),
        "classification": v.classification.as_str(),
    })
}

pub fn run_verdict_json(report: &RunReport, cigar_ref: Option<&str>) -> Value {
    let emp = report.t_sing_empirical;
    json!({
        "t_pred": jnum(report.t_sing_predicted),
        "t_empirical": emp.map_or(Value::Null, |e| jnum(e.t_sing)),
        "t_empirical_curvature": emp.and_then(|e| e.curvature_estimate).map_or(Value::Null, jnum),
        "volume_slope": emp.map_or(Value::Null, |e| jnum(e.slope)),
        "verdict": report.verdict.as_str(),
        "indicator_growth": report.indicator_growth.map_or(Value::Null, jnum),
        "indicator_series_ref": if report.type_indicator.is_empty() { Value::Null } else { json!(INDICATOR_FILE) },
        "cigar_series_ref": cigar_ref.map_or(Value::Null, |r| json!(r)),
        "prediction": report.prediction.as_ref().map_or(Value::Null, |p| json!(p.classification.as_str())),
        "mode": report.mode.as_str(),
        "scheme": report.scheme.as_str(),
        "stop": report.stop.as_str(),
        "accepted_steps": report.accepted_steps,
        "rejected_steps": report.rejected_steps,
        "max_potential_residual": jnum(report.max_potential_residual),
        "monitors": {
            "c_voldec": jnum(report.monitors().c_voldec),
            "slack": jnum(report.monitors().slack),
            "worst_uupper": jnum(report.monitors().worst.uupper),
            "worst_uprime": jnum(report.monitors().worst.uprime),
            "worst_voldec": jnum(report.monitors().worst.voldec),
            "worst_voleqn": jnum(report.monitors().worst.voleqn),
        },
    })
}

pub fn summary_text(label: &str, report: &RunReport) -> String {
    let mut s = String::new();
    let first = report.series.first();
    let last = report.series.last();
    let _ = writeln!(s, "experiment: {label}");
    let _ = writeln!(
        s,
        "model: {} on [{}, {}] with N = {}",
        report.model.topology().as_str(),
        report.model.grid().x_min(),
        report.model.grid().x_max(),
        report.model.grid().n()
    );
    let _ = writeln!(s, "mode: {}, scheme: {}", report.mode.as_str(), report.scheme.as_str());
    let _ = writeln!(
        s,
        "steps: {} accepted, {} rejected; stop: {}",
        report.accepted_steps,
        report.rejected_steps,
        report.stop.as_str()
    );
    if let (Some(a), Some(b)) = (first, last) {
        let _ = writeln!(s, "t: {} -> {}", num(a.t), num(b.t));
        let _ = writeln!(s, "volume: {} -> {}", num(a.volume), num(b.volume));
        let _ = writeln!(s, "sup|K|: {} -> {}", num(a.sup_abs_k), num(b.sup_abs_k));
    }
    let _ = writeln!(s, "predicted T (unnormalized): {}", num(report.t_sing_predicted));
    match report.t_sing_empirical {
        Some(e) => {
            let _ = writeln!(s, "empirical T: {} (volume slope {})", num(e.t_sing), num(e.slope));
        }
        None => {
            let _ = writeln!(s, "empirical T: n/a");
        }
    }
    if let Some(g) = report.indicator_growth {
        let _ = writeln!(s, "indicator growth over last decade: {}", num(g));
    }
    let m = report.monitors();
    let _ = writeln!(
        s,
        "worst monitor margins: uupper {} uprime {} voldec {} voleqn {}",
        num(m.worst.uupper),
        num(m.worst.uprime),
        num(m.worst.voldec),
        num(m.worst.voleqn)
    );
    let _ = writeln!(s, "verdict: {}", report.verdict.as_str());
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write(dir, name, &text)
}
