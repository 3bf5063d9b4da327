// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point detection for multivariate time series.
//!
//! A stacked LSTM is trained to predict each time point from its history.
//! Time points whose one-step prediction error is large and sits on a local
//! maximum of the Gaussian-smoothed error curve are reported as change points.
//!
//! The crate is organised as:
//!
//! - [`numerics`]: dense matrices, seeded randomness, Gaussian kernels and
//!   same-length convolution, CSV time-course I/O.
//! - [`forecaster`]: the LSTM forecaster with truncated BPTT training.
//! - [`detector`]: prediction error, threshold, anomaly mask, smoothing and
//!   change-point extraction.
//! - [`evaluation`]: detection distance metrics, segment connectivity and the
//!   two-sample covariance test, parameter sweeps.
//! - [`synth`]: piecewise-stationary ground-truth generator.
//! - [`cli`]: the `statetrace` command-line front end.

#![forbid(unsafe_code)]

pub mod cli;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod forecaster;
pub mod numerics;
pub mod persist;
pub mod synth;

pub use error::{Error, Result};
