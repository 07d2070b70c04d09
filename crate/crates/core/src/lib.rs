//! Theta invariants of Euclidean lattices and of Hermitian line bundles on toric
//! varieties, with the Bergman, equilibrium and energy machinery around them.

pub mod bergman;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod lattice;
pub mod measure;
pub mod quadrature;
pub mod toric;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
