//! Meshes, function spaces and quadrature.

pub mod bspline;
pub mod lagrange;
pub mod mesh;
pub mod quadrature;
pub mod space;

pub use mesh::{build_knot_mesh, build_tri_mesh, KnotVector, Mesh, Side, StructuredTriMesh, TensorKnotMesh};
pub use quadrature::{QuadratureRule, ReferenceCell};
pub use space::{
    build_spline_taylor_hood, build_spline_taylor_hood_with, build_taylor_hood, BasisFamily, DofLayout, MixedSpace, QuadraturePurpose,
    ScalarSpace, SplineVelocity, Tabulation, Tabulator,
};
