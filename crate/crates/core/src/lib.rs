//! Symmetric Dirichlet partitions, the finite-n Ewens sampling formulae and
//! species-number estimation.

pub mod dataio;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod gof;
pub mod numerics;
pub mod sampling;
pub mod simulate;
pub mod stopping;

pub use error::{Error, Result};
