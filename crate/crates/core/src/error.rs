use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix `{0}` contains non-finite entries")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("inconsistent linear system (residual {residual:.3e} > tolerance {tolerance:.3e})")]
    InconsistentSystem { residual: f64, tolerance: f64 },

    #[error("singular linear system (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("infeasible dimensions: rank(N) + n_a = {r_n} + {n_a} < n = {n}")]
    InfeasibleDimensions { n: usize, n_a: usize, r_n: usize },

    #[error("goal is inconsistent with the holonomic constraints (residual {residual:.3e})")]
    InconsistentGoal { residual: f64 },

    #[error("candidate direction basis too small: {available} columns for {required} velocity commands")]
    EmptyBasis { available: usize, required: usize },

    #[error("transform T is singular (smallest singular value of R_a {0:.3e})")]
    SingularTransform(f64),

    #[error("no force command satisfies the guard conditions (best margin {margin:.3e})")]
    InfeasibleLp { margin: f64 },

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("quaternion norm {0} is not 1")]
    NonUnitQuaternion(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleDimensions { .. }
            | Error::InconsistentGoal { .. }
            | Error::InconsistentSystem { .. }
            | Error::EmptyBasis { .. } => 2,
            Error::InfeasibleLp { .. } => 3,
            Error::Parse(_) | Error::InvalidConfig(_) | Error::DimensionMismatch(_) => 4,
            _ => 1,
        }
    }
}
