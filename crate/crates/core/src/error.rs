use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("{what} of size {size} exceeds cap {cap}")]
    ResourceCap { what: &'static str, size: usize, cap: usize },

    #[error("tuple is not nilpotent of order {order} (word {word} has norm {norm:.3e})")]
    NotNilpotent { order: usize, word: String, norm: f64 },

    #[error("row norm bound violated: largest eigenvalue of sum X_j X_j^* is {max_eig:.6e}, bound r^2 = {bound:.6e}")]
    RowNormBound { max_eig: f64, bound: f64 },

    #[error("matrix is indefinite (smallest eigenvalue {min_eig:.3e})")]
    Indefinite { min_eig: f64 },

    #[error("point lies outside the domain (margin {margin:.3e})")]
    OutsideDomain { margin: f64 },

    #[error("resolvent is numerically singular (condition number {cond:.3e})")]
    Singular { cond: f64 },

    #[error("no admissible block scaling found")]
    NoAdmissibleScaling,

    #[error("degree cap violated: {what} has degree {degree}, cap {cap}")]
    DegreeCap { what: String, degree: usize, cap: usize },

    #[error("evaluator failed: {0}")]
    Evaluator(String),

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
