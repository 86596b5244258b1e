use thiserror::Error;

/// Crate-wide error type. Variants are grouped by failure class so callers
/// (notably the CLI) can map them onto coarse exit codes.
#[derive(Debug, Error)]
pub enum FadeError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("basis conditioning failure: smallest eigenvalue ratio {ratio:.3e} below {tol:.3e}; near-collinear columns: {columns:?}")]
    IllConditioned {
        ratio: f64,
        tol: f64,
        columns: Vec<String>,
    },

    #[error("rank-deficient design matrix in {context}")]
    RankDeficient { context: String },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("risk constraint infeasible: requested squared-risk budget {requested:.6e} is below the minimum achievable risk {minimum:.6e}")]
    Infeasible { requested: f64, minimum: f64 },

    #[error("fairness cell `{cell}` is empty in this sample")]
    EmptyCell { cell: String },

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
}

impl FadeError {
    /// Process exit code the CLI contract assigns to this failure class:
    /// 2 config/data, 3 infeasible constraint, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            FadeError::Infeasible { .. } => 3,
            FadeError::IllConditioned { .. }
            | FadeError::RankDeficient { .. }
            | FadeError::Numerical(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, FadeError>;
