use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Each variant maps onto one process exit code (see [`Error::exit_code`]),
/// which the CLI and the C ABI both expose.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more parameter invariants are violated.
    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// A document is missing a field or has the wrong shape.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// A formula argument falls outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The geometry cannot be realised (imaginary root, negative clearance...).
    #[error("infeasible design: {0}")]
    Infeasible(String),

    /// A bend angle beyond what the slots admit.
    #[error("bend angle {requested:.3} deg exceeds the pattern's maximum bend angle {max:.3} deg")]
    Saturation { requested: f64, max: f64 },

    /// Cut features collide.
    #[error("pattern layout error: {0}")]
    Layout(String),

    #[error("stiffness model unavailable: {0}")]
    MissingModel(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 schema, 3 infeasible, 4 I/O, 5 missing model,
    /// 6 kinematic domain, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Schema { .. } | Error::Parse { .. } => 2,
            Error::Infeasible(_) | Error::Layout(_) => 3,
            Error::Io { .. } => 4,
            Error::MissingModel(_) => 5,
            Error::Saturation { .. } | Error::Domain(_) => 6,
            Error::Calibration(_) | Error::Analysis(_) => 1,
        }
    }
}
