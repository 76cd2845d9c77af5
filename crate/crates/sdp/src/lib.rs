//! A small, dependency-light semidefinite-program solver for problems whose
//! decision blocks are complex Hermitian (or real symmetric) PSD matrices,
//! nonnegative or free scalars, constrained by linear matrix inequalities and
//! scalar linear constraints.
//!
//! The solver is a primal-dual interior-point method on the homogeneous
//! self-dual embedding with Nesterov-Todd scaling and Mehrotra
//! predictor-corrector steps, so infeasible and unbounded instances come back
//! with certificates instead of diverging.

pub mod dump;
pub mod error;
pub mod hermitian;
pub mod problem;
mod solver;

pub use error::SdpError;
pub use hermitian::{embed_hermitian, hermitian_eigen, null_space_basis, HermitianEigen, HermitianMatrix};
pub use problem::{
    ConicProblem, ConicSolution, Congruence, Field, LinearExpr, LmiExpr, Sense, SolveStatus, SolverSettings, VarId,
};

pub type C64 = nalgebra::Complex<f64>;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
