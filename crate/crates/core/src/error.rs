use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not hermitian (symmetry residual {residual:.3e})")]
    NonHermitian { residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("map domain is not a full matrix algebra (dim {dim}, ambient {ambient})")]
    DomainNotFull { dim: usize, ambient: usize },

    #[error("extension search failed (feasibility residual {residual:.3e})")]
    ExtensionSearchFailed { residual: f64 },

    #[error("image of the unit is zero")]
    ZeroUnitImage,

    #[error("unitalization defect is not positive (min eigenvalue {min_eig:.3e})")]
    DefectNotPositive { min_eig: f64 },

    #[error("element is not positive (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("element is not in the system (projection residual {residual:.3e})")]
    NotInSystem { residual: f64 },

    #[error("search failed within budget of {budget} iterations (residual {residual:.3e})")]
    BudgetExhausted { budget: usize, residual: f64 },

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
