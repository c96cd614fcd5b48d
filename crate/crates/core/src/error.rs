use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("point is outside the cone beyond tolerance (distance {0:e})")]
    NotInCone(f64),

    #[error("multiplier is not in the normal cone (violation {0:e})")]
    NotInNormalCone(f64),

    #[error("not a KKT pair (residual {0:e})")]
    NotKkt(f64),

    #[error("problem has no known solution")]
    NoKnownSolution,

    #[error("inner solver failed after {iters} iterations (gradient norm {grad_norm:e})")]
    InnerFailure { iters: usize, grad_norm: f64 },

    #[error("planted generation failed: {0}")]
    Generation(String),

    #[error("closed form and oracle disagree: {0}")]
    OracleMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}
