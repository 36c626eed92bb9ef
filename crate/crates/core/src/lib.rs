//! Covariant momentum maps, constraint algebra, gauge reduction and generally
//! covariant Gibbs states for a parametrized free scalar field on a periodic
//! 1+1 lattice.

pub mod canonical;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod grid;
pub mod multisym;

pub use error::{Error, Result};
