//! Interval-valued Sobol' sensitivity indices for computational models with
//! parametric p-box inputs.
//!
//! The pipeline builds a single sparse polynomial chaos expansion on the
//! augmented space of epistemic hyper-parameters and standardized aleatory
//! variables, calibrated on a phantom-point experimental design so that the
//! expensive model runs exactly `N` times. Index bounds are then extracted
//! by global optimization over the hyper-parameter box, and a double-loop
//! Monte Carlo oracle is available for validation.

pub mod augmented;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod imprecise;
pub mod models;
pub mod optimizer;
pub mod oracle;
pub mod pce;
pub mod polynomials;
pub mod quad;
pub mod seeding;
pub mod sobol;

pub use error::{Error, Result};
