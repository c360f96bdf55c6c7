use std::path::PathBuf;

use krf_core::{CohomologyError, DiagnosticsError, FlowError, GeometryError};

/// Every failure the CLI can report, with its process exit code.
///
/// | code | meaning |
/// |------|---------|
/// | 1 | reproduce mismatch against a golden verdict |
/// | 2 | unreadable or invalid input: JSON syntax, schema, cohomology data, geometry |
/// | 3 | a flow monitor was violated |
/// | 4 | the integrator failed (Newton or step control) |
/// | 5 | filesystem error |
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Flow(FlowError),
    #[error("golden mismatch for {id}:\n{diff}")]
    Mismatch { id: String, diff: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Geometry(g) => CliError::Geometry(g),
            other => CliError::Flow(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch { .. } => 1,
            CliError::Parse { .. }
            | CliError::Config(_)
            | CliError::Cohomology(_)
            | CliError::Geometry(_)
            | CliError::Diagnostics(_) => 2,
            CliError::Flow(FlowError::MonitorViolation { .. }) => 3,
            CliError::Flow(FlowError::InvalidConfig(_)) => 2,
            CliError::Flow(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
