use crate::linalg::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QrmError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("assumption Spec violated: {0}")]
    Spec(String),
    #[error("assumption Coup violated: {0}")]
    Coup(String),
    #[error("unsupported model for this operation: {0}")]
    Unsupported(String),
    #[error("residual {residual:.3e} exceeds tolerance {tol:.1e} in {context}")]
    Residual { context: String, residual: f64, tol: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Invariant,
    Assumption,
    Numeric,
}

impl QrmError {
    pub fn class(&self) -> ErrorClass {
        match self {
            QrmError::Config(_) => ErrorClass::Config,
            QrmError::InvalidModel(_) => ErrorClass::Invariant,
            QrmError::Spec(_) | QrmError::Coup(_) | QrmError::Unsupported(_) => ErrorClass::Assumption,
            QrmError::Residual { .. } => ErrorClass::Numeric,
            QrmError::Linalg(LinalgError::Lapack(_)) => ErrorClass::Numeric,
            QrmError::Linalg(_) => ErrorClass::Invariant,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 1,
            ErrorClass::Invariant => 2,
            ErrorClass::Assumption => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub fn residual(context: impl Into<String>, residual: f64, tol: f64) -> Self {
        QrmError::Residual { context: context.into(), residual, tol }
    }
}

pub type Result<T> = std::result::Result<T, QrmError>;
