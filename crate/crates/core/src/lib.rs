//! Factor network autoregression (FNAR).
//!
//! The crate turns a time series of multilayer network weight tensors into a
//! handful of latent network-factor matrices (principal components along the
//! layer mode), estimates a VAR whose cross-node effects run through those
//! factors, and provides a residual bootstrap, Monte Carlo drivers and a
//! recursive forecasting harness with standard high-dimensional baselines.
//!
//! | module | contents |
//! |---|---|
//! | [`tensor3`] | order-3 tensors, matricization, mode products |
//! | [`netweights`] | weight tensors from bilateral flows, smoothing, layer similarity |
//! | [`netfactors`] | factor extraction and diagnostics |
//! | [`model`] | FNAR design, OLS / SUR estimation, rescaling, forecasting |
//! | [`bootstrap`] | residual bootstrap of the full two-stage estimator |
//! | [`montecarlo`] | synthetic data and convergence-rate experiments |
//! | [`forecastlab`] | pseudo-out-of-sample comparison against AR(1), PC-AR, LASSO VAR, BVAR |
//!
//! Data-parallel loops go through [`par::Exec`]; build without the default
//! `parallel` feature for a purely sequential library.

// `!(x > 0.0)` is used on purpose so NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod forecastlab;
pub mod model;
pub mod montecarlo;
pub mod netfactors;
pub mod netweights;
pub mod par;
pub mod tensor3;

pub use error::{Error, Result};
pub use par::Exec;
pub use tensor3::{Matrix, Tensor3};
