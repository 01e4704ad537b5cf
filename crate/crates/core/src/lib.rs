//! Periodic Camassa-Holm solver in the variable `rho = sqrt(eta_x)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod integrator;
mod kernel;
pub mod lagrangian;
pub mod oracle;
pub mod output;
pub mod reconstruction;
pub mod scenarios;
mod spectral;
pub mod validate;

pub use error::{Error, Result};
