//! Periodic profiles, the thin domain with its strip, and layered meshes.

pub mod builders;
pub mod domain;
pub mod mesh;
pub mod profile;

pub use builders::{build_cell_mesh, build_rectangle_mesh, build_thin_mesh};
pub use domain::{ForcingSpec, PeriodicSplit, ThinDomainSpec};
pub use mesh::{ColumnLayout, ElementGeometry, Located, TriMesh};
pub use profile::{profile_average, PeriodicProfile, ProfileConfig, ProfileFamily};
