//! Topological invariants of gapped 2D ground states from multi-replica
//! permutation measures.

pub mod chern;
pub mod error;
pub mod gauss;
pub mod io;
pub mod kitaev;
pub mod laughlin;
pub mod lattice;
pub mod perm;
pub mod predict;

pub use error::{Error, Result};
