//! Stabilization of nonlinear systems with delayed input by approximate predictors.
//!
//! The crate builds successive-approximation predictor maps for globally
//! Lipschitz systems, runs dynamic distributed-delay feedback laws in closed
//! loop by the method of steps, and evaluates the closed-form small-gain
//! certificates together with maximum-allowable-delay solvers.

pub mod certificates;
pub mod closedloop;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod picard;
pub mod predictors;
pub mod scenarios;

pub use error::{Error, Result};
