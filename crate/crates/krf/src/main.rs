use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krf::commands::{self, describe_flow_error};
use krf::{CliError, ExperimentConfig, SweepAxis};

/// Kähler-Ricci flow experiments: cohomological predictions and surface runs.
///
/// Exit codes: 0 success, 1 golden mismatch, 2 invalid input, 3 monitor
/// violation, 4 integrator failure, 5 filesystem error. A sweep exits with
/// the largest code among its points.
#[derive(Parser)]
#[command(name = "krf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singular time and type verdict from a manifold and initial class.
    Predict { config: PathBuf },
    /// Integrate the flow described by the run block and write artifacts.
    Run { config: PathBuf },
    /// Recompute a canned example and compare with its golden verdict.
    Reproduce {
        /// One of 9.2, 9.3a, 9.3b, 9.3c, 9.4-klt, 9.4-keq, 9.4-kgt, or `all`.
        id: String,
    },
    /// Run a config over the cartesian product of parameter lists.
    Sweep {
        config: PathBuf,
        /// `path.to.field=v1,v2,...` or `path=[json, ...]`; repeatable.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

/// Returns the process exit code on success paths that may still report
/// failures, which is the case for sweeps.
fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Predict { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}", pretty(&commands::cmd_predict(&cfg)?));
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = commands::cmd_run(&cfg)?;
            print!("{}", outcome.summary);
            println!("artifacts: {}", outcome.output_dir.display());
        }
        Command::Reproduce { id } => {
            let ids: Vec<String> = if id == "all" {
                krf::golden::ids().into_iter().map(String::from).collect()
            } else {
                vec![id]
            };
            for id in ids {
                commands::cmd_reproduce(&id)?;
                println!("{id}: ok");
            }
        }
        Command::Sweep { config, params, jobs } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::Io {
                path: config.clone(),
                source: e,
            })?;
            let base: serde_json::Value = serde_json::from_str(&text).map_err(|source| CliError::Parse {
                path: config.clone(),
                source,
            })?;
            let axes = params
                .iter()
                .map(|p| p.parse::<SweepAxis>())
                .collect::<Result<Vec<_>, _>>()?;
            let points = commands::cmd_sweep(&base, &axes, jobs)?;
            let mut worst = 0;
            for p in &points {
                let verdict = p
                    .verdict
                    .as_ref()
                    .and_then(|v| v.get("verdict").or_else(|| v.get("classification")))
                    .and_then(|v| v.as_str())
                    .unwrap_or("-");
                println!(
                    "{:03} exit {} {} {}",
                    p.index,
                    p.exit_code,
                    verdict,
                    p.error.as_deref().unwrap_or("")
                );
                worst = worst.max(p.exit_code);
            }
            if worst != 0 {
                eprintln!("error: some sweep points failed; see sweep.json");
            }
            return Ok(u8::try_from(worst).unwrap_or(u8::MAX));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            if let Some(detail) = describe_flow_error(&err) {
                eprintln!("{detail}");
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
