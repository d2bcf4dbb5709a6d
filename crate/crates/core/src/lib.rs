//! Estimating finite-population means from a large non-probability
//! ("big data") sample, alone or combined with a small probability sample.
//!
//! The crate covers
//! - the exact error decomposition of the naive big-data mean,
//! - exponential tilting calibration of the big sample to known covariate means,
//! - a second-phase sample drawn with the tilted weights, with
//!   Horvitz-Thompson estimation and variance,
//! - propensity-score, doubly robust and nearest-neighbor imputation
//!   estimators that use an independent probability sample,
//! - the Monte Carlo harness used to compare these estimators.

pub mod error;
pub mod integration;
pub mod inverse_sampling;
pub mod io;
pub(crate) mod linalg;
pub mod neighbors;
pub mod population;
pub mod propensity;
pub mod sim;
pub mod tilting;

pub use error::{Error, Result};
pub use population::{
    error_decomposition, BigDataSample, Correlation, Covariates, ErrorDecomposition, EstimateReport,
    FinitePopulation, Method, ProbabilitySample,
};
