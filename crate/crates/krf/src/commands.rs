//! `predict`, `run`, `reproduce` and `sweep`.

use std::path::{Path, PathBuf};

use krf_core::{diagnostics, FlowError, RunReport};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::golden;
use crate::manifold::class_from;
use crate::output::{self, CIGAR_FILE, INDICATOR_FILE, SERIES_FILE, SUMMARY_FILE, VERDICT_FILE};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Cohomological verdict for the config's manifold and class.
pub fn predict_value(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let spec = cfg
        .manifold
        .as_ref()
        .ok_or_else(|| CliError::Config(String::from("predict needs a manifold block")))?;
    let omega0 = cfg
        .omega0
        .as_ref()
        .ok_or_else(|| CliError::Config(String::from("predict needs omega0")))?;
    let m = spec.build()?;
    let class = class_from(omega0)?;
    let p = diagnostics::predict(&m, &class)?;
    Ok(output::prediction_json(&spec.label(), &class, &p))
}

/// Writes `verdict.json` under the output directory.
pub fn cmd_predict(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let value = predict_value(cfg)?;
    let dir = cfg.resolved_output_dir();
    ensure_dir(&dir)?;
    output::write_json(&dir, VERDICT_FILE, &value)?;
    Ok(value)
}

pub struct RunOutcome {
    pub report: RunReport,
    pub verdict: Value,
    pub summary: String,
    pub output_dir: PathBuf,
}

fn write_run_artifacts(label: &str, report: &RunReport, dir: &Path) -> Result<(Value, String), CliError> {
    ensure_dir(dir)?;
    output::write(dir, SERIES_FILE, &output::series_csv(report))?;
    output::write(dir, INDICATOR_FILE, &output::indicator_csv(report))?;
    let cigar = output::cigar_series(report);
    let cigar_ref = if cigar.is_empty() {
        None
    } else {
        output::write(dir, CIGAR_FILE, &output::cigar_csv(&cigar))?;
        Some(CIGAR_FILE)
    };
    let verdict = output::run_verdict_json(report, cigar_ref);
    output::write_json(dir, VERDICT_FILE, &verdict)?;
    let summary = output::summary_text(label, report);
    output::write(dir, SUMMARY_FILE, &summary)?;
    Ok((verdict, summary))
}

/// Runs the flow and writes series, indicator, cigar, verdict and summary.
///
/// On a monitor violation or step failure the partial report is still
/// written before the error is returned.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let spec = cfg
        .run
        .as_ref()
        .ok_or_else(|| CliError::Config(String::from("run needs a run block")))?;
    let initial = spec.initial_metric(cfg.seed)?;
    let config = spec.run_config();
    let dir = cfg.resolved_output_dir();
    let label = cfg.label();
    match krf_core::run(&initial, &config) {
        Ok(report) => {
            let (verdict, summary) = write_run_artifacts(&label, &report, &dir)?;
            Ok(RunOutcome {
                report,
                verdict,
                summary,
                output_dir: dir,
            })
        }
        Err(err) => {
            if let Some(partial) = err.report() {
                write_run_artifacts(&label, partial, &dir)?;
            }
            Err(CliError::from(err))
        }
    }
}

/// Recomputes a canned example and compares it with its golden verdict.
pub fn cmd_reproduce(id: &str) -> Result<Value, CliError> {
    let case = golden::find(id).ok_or_else(|| {
        CliError::Config(format!("unknown example {id:?}; known: {}", golden::ids().join(", ")))
    })?;
    let cfg = ExperimentConfig {
        name: Some(case.id.to_string()),
        manifold: Some((case.manifold)()),
        omega0: Some(case.omega0()),
        run: None,
        output_dir: PathBuf::new(),
        seed: 0,
    };
    let actual = predict_value(&cfg)?;
    let expected = case.expected();
    if actual != expected {
        return Err(CliError::Mismatch {
            id: id.to_string(),
            diff: golden::diff(&expected, &actual),
        });
    }
    Ok(actual)
}

/// One `--param path=v1,v2,…` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub path: Vec<String>,
    pub values: Vec<Value>,
}

impl std::str::FromStr for SweepAxis {
    type Err = CliError;

    /// Values are a JSON array, or comma-separated items each read as JSON
    /// and otherwise as a string.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (path, list) = text
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("sweep parameter {text:?} is not path=list")))?;
        let path: Vec<String> = path.trim().split('.').map(str::to_string).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Config(format!("empty segment in sweep path {text:?}")));
        }
        let list = list.trim();
        let values = if list.starts_with('[') {
            match serde_json::from_str::<Value>(list) {
                Ok(Value::Array(items)) => items,
                _ => return Err(CliError::Config(format!("sweep list {list:?} is not a JSON array"))),
            }
        } else {
            list.split(',')
                .map(|item| {
                    let item = item.trim();
                    serde_json::from_str(item).unwrap_or_else(|_| Value::String(item.to_string()))
                })
                .collect()
        };
        if values.is_empty() {
            return Err(CliError::Config(format!("sweep parameter {text:?} has no values")));
        }
        Ok(SweepAxis { path, values })
    }
}

fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<(), CliError> {
    let mut node = root;
    for (depth, key) in path.iter().enumerate() {
        let last = depth + 1 == path.len();
        node = match node {
            Value::Array(items) => {
                let i: usize = key
                    .parse()
                    .map_err(|_| CliError::Config(format!("{key:?} is not an array index")))?;
                items
                    .get_mut(i)
                    .ok_or_else(|| CliError::Config(format!("index {i} out of range")))?
            }
            Value::Object(map) => map.entry(key.clone()).or_insert_with(|| {
                if last {
                    Value::Null
                } else {
                    Value::Object(Default::default())
                }
            }),
            _ => return Err(CliError::Config(format!("cannot descend into {key:?}"))),
        };
    }
    *node = value;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub assignment: Vec<(String, Value)>,
    pub output_dir: PathBuf,
    pub exit_code: i32,
    pub verdict: Option<Value>,
    pub error: Option<String>,
}

/// Cartesian product of the axes, in row-major order.
pub fn sweep_points(axes: &[SweepAxis]) -> Vec<Vec<usize>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..axis.values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    points
}

fn run_point(base: &Value, axes: &[SweepAxis], choice: &[usize], index: usize, root: &Path) -> SweepPoint {
    let mut doc = base.clone();
    let mut assignment = Vec::new();
    let dir = root.join(format!("sweep-{index:03}"));
    let result = (|| -> Result<Value, CliError> {
        for (axis, &i) in axes.iter().zip(choice) {
            set_path(&mut doc, &axis.path, axis.values[i].clone())?;
            assignment.push((axis.path.join("."), axis.values[i].clone()));
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(doc.clone()).map_err(|source| CliError::Parse {
            path: dir.clone(),
            source,
        })?;
        cfg.output_dir = dir.clone();
        if let Some(spec) = cfg.run.as_ref() {
            let initial = spec.initial_metric(cfg.seed)?;
            match krf_core::run(&initial, &spec.run_config()) {
                Ok(report) => Ok(write_run_artifacts(&cfg.label(), &report, &dir)?.0),
                Err(err) => {
                    if let Some(partial) = err.report() {
                        write_run_artifacts(&cfg.label(), partial, &dir)?;
                    }
                    Err(CliError::from(err))
                }
            }
        } else {
            let value = predict_value(&cfg)?;
            ensure_dir(&dir)?;
            output::write_json(&dir, VERDICT_FILE, &value)?;
            Ok(value)
        }
    })();
    match result {
        Ok(verdict) => SweepPoint {
            index,
            assignment,
            output_dir: dir,
            exit_code: 0,
            verdict: Some(verdict),
            error: None,
        },
        Err(e) => SweepPoint {
            index,
            assignment,
            output_dir: dir,
            exit_code: e.exit_code(),
            verdict: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every point of the sweep with up to `jobs` workers and writes
/// `sweep.json` listing each point's assignment and outcome.
pub fn cmd_sweep(base: &Value, axes: &[SweepAxis], jobs: usize) -> Result<Vec<SweepPoint>, CliError> {
    let probe: ExperimentConfig = serde_json::from_value(base.clone()).map_err(|source| CliError::Parse {
        path: PathBuf::from("<sweep base>"),
        source,
    })?;
    let root = probe.resolved_output_dir();
    ensure_dir(&root)?;
    let points = sweep_points(axes);
    let jobs = jobs.max(1).min(points.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<SweepPoint> = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let Some(choice) = points.get(i) else { break };
                        done.push(run_point(base, axes, choice, i, &root));
                    }
                    done
                })
            })
            .collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("sweep worker panicked"))
            .collect()
    });
    results.sort_by_key(|p| p.index);
    let listing: Vec<Value> = results
        .iter()
        .map(|p| {
            let assignment: serde_json::Map<String, Value> = p.assignment.iter().cloned().collect();
            json!({
                "index": p.index,
                "assignment": assignment,
                "output_dir": p.output_dir.display().to_string(),
                "exit_code": p.exit_code,
                "verdict": p.verdict.clone().unwrap_or(Value::Null),
                "error": p.error.clone(),
            })
        })
        .collect();
    output::write_json(&root, "sweep.json", &Value::Array(listing))?;
    Ok(results)
}

/// Monitor violations carry a partial report; surface where it happened.
pub fn describe_flow_error(err: &CliError) -> Option<String> {
    match err {
        CliError::Flow(FlowError::MonitorViolation { monitor, t, margin, .. }) => {
            Some(format!("monitor {monitor} failed at t = {t} with margin {margin:e}"))
        }
        _ => None,
    }
}
