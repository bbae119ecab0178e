use thiserror::Error;

pub type Result<T> = std::result::Result<T, RangeError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RangeError {
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("tuple length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("malformed input in {field}: {reason}")]
    Malformed { field: String, reason: String },

    #[error("{field} is not Hermitian (defect {defect:e})")]
    NotHermitian { field: String, defect: f64 },

    #[error("matrix is not an isometry: |X*X - I| = {residual:e}")]
    NotIsometry { residual: f64 },

    #[error("eigensolver failed to converge for a {dim}x{dim} matrix")]
    SolverFailure { dim: usize },

    #[error("Choi matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotCompletelyPositive { min_eig: f64 },

    #[error("map is not unital: |Phi(I) - I| = {residual:e}")]
    NotUnital { residual: f64 },

    #[error("operator weights are not complete: |sum L*L - I| = {residual:e}")]
    NotComplete { residual: f64 },

    #[error("simplex vertices are affinely dependent (condition number {condition:e})")]
    DegenerateSimplex { condition: f64 },

    #[error("tuple leaves the simplex: POVM element {vertex} has eigenvalue {min_eig:e}")]
    NotInSimplex { vertex: usize, min_eig: f64 },

    #[error("truncation level {level} too small; at least {required} body blocks needed")]
    TruncationTooSmall { level: usize, required: usize },

    #[error("target {index} is not certified as a member ({status})")]
    NotCertified { index: usize, status: String },

    #[error("construction exceeded tolerance: {what} = {value:e} > {tol:e}")]
    ToleranceExceeded { what: String, value: f64, tol: f64 },
}

impl RangeError {
    pub fn dim(field: impl Into<String>, expected: usize, found: usize) -> Self {
        RangeError::DimensionMismatch {
            field: field.into(),
            expected,
            found,
        }
    }
}
