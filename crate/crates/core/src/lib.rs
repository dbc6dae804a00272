#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Two-point functions of the free Klein-Gordon field in thermal and
//! locally thermal states, with numerical checks of local equilibrium.

pub mod balanced;
pub mod cli;
pub mod correlators;
pub mod equilibrium;
pub mod error;
pub mod minkowski;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
