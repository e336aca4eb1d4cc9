//! Dense hermitian linear algebra and the semidefinite feasibility engine.

pub mod eigen;
pub mod feasibility;
pub mod matrix;
pub mod nnls;

pub use eigen::{eig_herm, min_eig, project_psd, sqrt_psd, Eigen, HermMatrix};
pub use feasibility::{
    check_dual_certificate, hvec, solve_feasibility, unhvec, AffineConstraint, FeasibilityOutcome,
    FeasibilityProblem, FeasibilityStatus, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use matrix::{CMatrix, C64};
