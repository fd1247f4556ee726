//! Linear algebra kernels: sparse assembly storage, band reordering,
//! banded direct solvers and dense helpers for small complex matrices.

pub mod band;
pub mod dense;
pub mod rcm;
pub mod sparse;

pub use band::{BandCholesky, BandLu};
pub use rcm::reverse_cuthill_mckee;
pub use sparse::{Csr, Triplets};
