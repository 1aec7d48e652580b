use defectlab_core::{EigenError, FieldError, FormError, SolverError};
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: nonlinear solve failed: {message}")]
    NonConvergence { stage: String, message: String },
    #[error("{stage}: {message}")]
    Numeric { stage: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            RunError::Numeric { .. } | RunError::Io(_) => EXIT_NUMERIC,
        }
    }

    pub fn solver(stage: &str, e: SolverError) -> Self {
        match e {
            SolverError::Model(m) => RunError::Config(m.to_string()),
            SolverError::Mesh(m) => RunError::Config(m.to_string()),
            e @ (SolverError::NonConvergence { .. } | SolverError::SignViolation { .. }) => {
                RunError::NonConvergence {
                    stage: stage.into(),
                    message: e.to_string(),
                }
            }
            e => RunError::Numeric {
                stage: stage.into(),
                message: e.to_string(),
            },
        }
    }

    pub fn form(stage: &str, e: FormError) -> Self {
        match e {
            FormError::Solver(s) => Self::solver(stage, s),
            FormError::Eigen(EigenError::TooMany { .. }) | FormError::TooFewStarts(_) => {
                RunError::Config(e.to_string())
            }
            e => RunError::Numeric {
                stage: stage.into(),
                message: e.to_string(),
            },
        }
    }

    pub fn field(stage: &str, e: FieldError) -> Self {
        match e {
            FieldError::Form(f) => Self::form(stage, f),
            e @ (FieldError::BadAngularGrid(_)
            | FieldError::BadRadialGrid(_)
            | FieldError::Aliasing { .. }) => RunError::Config(e.to_string()),
            e => RunError::Numeric {
                stage: stage.into(),
                message: e.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
