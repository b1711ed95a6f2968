//! Unit-Lindley autoregressive moving average (ULARMA) models for time
//! series on the open unit interval.
//!
//! The conditional law of `Y_t` is Unit-Lindley with mean `mu_t`, and
//! `g(mu_t)` follows an ARMA-type recursion with optional covariates.

pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod filter;
pub mod forecast;
pub mod inference;
pub mod links;
mod optim;
pub mod simulate;
pub mod stats;
pub mod unit_lindley;

pub use error::{Error, Result};
pub use estimation::{fit, FitOptions, FittedModel};
pub use filter::{filter_forward, ModelSpec, ParamVector, SeriesData};
pub use links::LinkChoice;
pub use unit_lindley::UnitLindleyParam;

/// Re-exported so callers can build design matrices with the same version.
pub use nalgebra;
