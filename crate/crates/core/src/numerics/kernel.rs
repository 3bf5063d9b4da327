// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{invalid, Result};

/// Normalized Gaussian kernel sampled at integer offsets.
///
/// Conventions:
/// - `radius = ceil(3 * std)`, minimum 1, so the length is always odd.
/// - weights are `exp(-x^2 / (2 std^2))` divided by their sum.
///
/// Very small `std` collapses to a delta once the off-center weights underflow.
pub fn gaussian_kernel(std_samples: f64) -> Result<Vec<f64>> {
    if !(std_samples.is_finite() && std_samples > 0.0) {
        return Err(invalid(format!(
            "kernel standard deviation must be positive and finite, got {std_samples}"
        )));
    }
    let radius = ((3.0 * std_samples).ceil() as usize).max(1);
    let var2 = 2.0 * std_samples * std_samples;
    let mut weights: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-(x * x) / var2).exp()
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Maps an out-of-range index onto the signal by half-sample symmetric
/// reflection (`x[-1] = x[0]`, `x[n] = x[n-1]`), repeating as needed.
fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Same-length convolution of `signal` with an odd-length centered `kernel`,
/// reflecting the signal at both ends.
pub fn convolve_same(signal: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    if kernel.len().is_multiple_of(2) {
        return Err(invalid(format!(
            "kernel length must be odd, got {}",
            kernel.len()
        )));
    }
    if signal.is_empty() {
        return Err(invalid("cannot convolve an empty signal"));
    }
    let n = signal.len();
    let radius = (kernel.len() / 2) as isize;
    let out = (0..n as isize)
        .map(|t| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let k = j as isize - radius;
                    w * signal[reflect_index(t + k, n)]
                })
                .sum()
        })
        .collect();
    Ok(out)
}
