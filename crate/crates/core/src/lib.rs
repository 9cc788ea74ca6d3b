//! Closed-time-path Green functions for ensembles of identical quantum
//! systems, the quantum central limit theorem they obey, and measurement
//! models built on top of them.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apparatus;
pub mod chamber;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod kernel;
pub mod measure;
pub mod propagators;
pub mod qclt;
pub mod quadrature;

pub use error::{Error, Result};
pub use grid::{Domain, FrequencyGrid, Grid, TimeGrid};
pub use kernel::{CtpKernel, Tolerances};
