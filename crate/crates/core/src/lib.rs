//! Threshold analysis of planar quantum waveguide junctions.
//!
//! A junction is a bounded polygonal node with semi-infinite strip outlets.
//! At the first threshold of the continuous spectrum of the Dirichlet
//! Laplacian the library answers two questions:
//!
//! - absence: truncated mixed eigenvalue problems certify, when one of their
//!   eigenvalues passes the threshold, that no bounded solution exists;
//! - detection: a fictitious scattering operator built from an artificial
//!   radiation condition yields a unitary threshold scattering matrix whose
//!   spectral structure counts stabilizing and trapped solutions.
//!
//! Both routes share the finite element discretization, the banded solvers
//! and the mesh refinement ladder used for extrapolation and error bars.

pub mod absence;
pub mod config;
pub mod cross_section;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod pipelines;
pub mod presets;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{BoundaryTag, JunctionGeometry, Outlet, TruncatedDomain, Vec2};
