//! Discontinuous Galerkin spectral element operators on LGL nodes.

pub mod advection;
pub mod basis;
pub mod euler;
pub mod mesh;

pub use advection::{Advection1d, Advection2d};
pub use basis::ReferenceElement;
pub use euler::{Euler1d, EulerBoundary, EulerWaveSpeed};
pub use mesh::{curved_mapping_2d, CurvedMesh2D, Domain2d, Mapping2d, Mesh1d};
