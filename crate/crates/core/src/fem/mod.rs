//! P1 assembly, sparse linear algebra and the Newton solver for `J u = b`.

pub mod assembly;
pub mod field;
pub mod linear;
pub mod newton;
pub mod sparse;

pub use assembly::{
    assemble_jacobian, assemble_residual, bulk_load, energy, lp_norm, w1p_norm, w1p_seminorm, LoadFunctional,
    Terms,
};
pub use field::FemField;
pub use linear::{solve_linear_spd, LinearSolver};
pub use newton::{solve_duality, solve_duality_with, DualitySolution, SolverOptions};
pub use sparse::CsrMatrix;
