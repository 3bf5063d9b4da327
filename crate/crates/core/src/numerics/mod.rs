// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic numeric substrate shared by the other modules.

mod kernel;
mod matrix;
mod rng;
mod timecourses;

pub use kernel::{convolve_same, gaussian_kernel};
pub(crate) use matrix::dot;
pub use matrix::Matrix;
pub use rng::{derive_seed, RandomSource};
pub use timecourses::TimeCourses;

/// Population mean and standard deviation (divide by `N`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
