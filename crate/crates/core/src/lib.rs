//! Contrastive learning with the logistic loss.
//!
//! Classifying data against reference samples with the logistic loss
//! estimates the log-ratio `log p − log q` of the two densities. This crate
//! implements that engine and three of its statistical uses:
//!
//! * [`nce`]: parameter estimation for unnormalised (energy-based) models,
//!   including the iterative-reference scheme and its links to maximum
//!   likelihood.
//! * [`sbi`]: amortised likelihood-free posterior inference for simulators.
//! * [`boed`]: Bayesian experimental design by maximising a Jensen–Shannon
//!   lower bound, with a stochastic SIR epidemic simulator.
//!
//! [`tre`] adds telescoping ratio estimation across a chain of waymark
//! distributions for the case where data and reference are far apart.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boed;
pub mod distributions;
pub mod error;
pub mod nce;
pub mod optimize;
pub mod points;
pub mod quadrature;
pub mod ratio;
pub mod registry;
pub mod rng;
pub mod sbi;
pub mod tre;

pub use error::{Error, Result};
pub use points::Points;
