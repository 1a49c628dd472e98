//! Two-server protocols over additive shares.

pub(crate) mod compare;
pub mod linear;
pub mod nonlinear;
pub mod reference;

pub use linear::*;
pub use nonlinear::*;
