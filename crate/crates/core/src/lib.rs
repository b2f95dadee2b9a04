//! p-Laplacian Neumann problems on thin domains with an oscillating top
//! boundary and forcing concentrated in a narrow strip under it.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`, which every driver uses.

pub mod concentration;
pub mod error;
pub mod fem;
pub mod functions;
pub mod geometry;
pub mod homogenize;
pub mod limit1d;
pub mod quadrature;
pub mod scalar;
pub mod unfolding;

pub use error::{Error, Result};
pub use functions::{Exponent, ReactionFn, SourceFn};
pub use scalar::Real;

pub type Profile = geometry::PeriodicProfile<f64>;
pub type DomainSpec = geometry::ThinDomainSpec<f64>;
pub type Mesh = geometry::TriMesh<f64>;
pub type Field = fem::FemField<f64>;
pub type Load = fem::LoadFunctional<f64>;
pub type CellSolution = homogenize::CellSolution<f64>;
pub type Model = homogenize::HomogenizedModel<f64>;
pub type Solution1D = limit1d::LimitSolution<f64>;
pub type Grid = unfolding::UnfoldGrid<f64>;
