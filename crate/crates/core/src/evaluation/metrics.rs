// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::RandomSource;

/// Nearest-neighbour distances between real and predicted change points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean over real change points of the distance to the nearest prediction.
    pub error_sen: f64,
    /// Mean over predictions of the distance to the nearest real change point.
    pub error_spec: f64,
    pub n_real: usize,
    pub n_pred: usize,
    pub sen_distances: Vec<f64>,
    pub spec_distances: Vec<f64>,
}

fn nearest_distances(from: &[usize], to: &[usize]) -> Vec<f64> {
    from.iter()
        .map(|&a| {
            to.iter()
                .map(|&b| a.abs_diff(b))
                .min()
                .expect("caller ensures `to` is nonempty") as f64
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sensitivity and specificity distances, in samples.
pub fn detection_errors(real_cps: &[usize], pred_cps: &[usize]) -> Result<EvalResult> {
    if real_cps.is_empty() {
        return Err(invalid("no real change points to evaluate against"));
    }
    if pred_cps.is_empty() {
        return Err(Error::NoDetections);
    }
    let sen_distances = nearest_distances(real_cps, pred_cps);
    let spec_distances = nearest_distances(pred_cps, real_cps);
    Ok(EvalResult {
        error_sen: mean(&sen_distances),
        error_spec: mean(&spec_distances),
        n_real: real_cps.len(),
        n_pred: pred_cps.len(),
        sen_distances,
        spec_distances,
    })
}

/// Change points after a lag shift.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaggedChangePoints {
    pub indices: Vec<usize>,
    /// `true` where the shifted index fell outside `1..=scan_len` and was clamped.
    pub clamped: Vec<bool>,
}

/// Shifts every 1-based index by `lag_samples`, clamping into `1..=scan_len`.
pub fn apply_lag(real_cps: &[usize], lag_samples: i64, scan_len: usize) -> LaggedChangePoints {
    let (indices, clamped) = real_cps
        .iter()
        .map(|&c| {
            let shifted = c as i64 + lag_samples;
            if shifted > scan_len as i64 {
                (scan_len, true)
            } else if shifted < 1 {
                (1, true)
            } else {
                (shifted as usize, false)
            }
        })
        .unzip();
    LaggedChangePoints { indices, clamped }
}

/// Converts a lag in seconds to samples, rounding to the nearest sample.
pub fn lag_seconds_to_samples(seconds: f64, tr_seconds: f64) -> Result<i64> {
    if !(tr_seconds.is_finite() && tr_seconds > 0.0 && seconds.is_finite()) {
        return Err(invalid("lag conversion needs a positive TR and finite lag"));
    }
    Ok((seconds / tr_seconds).round() as i64)
}

/// Mean `(error_sen, error_spec)` of a detector that places `n_pred` distinct
/// change points uniformly at random in `2..=scan_len`, over `seeds` draws.
pub fn random_baseline(
    real_cps: &[usize],
    n_pred: usize,
    scan_len: usize,
    seeds: u64,
    master_seed: u64,
) -> Result<(f64, f64)> {
    if n_pred == 0 || scan_len < 2 || seeds == 0 {
        return Err(invalid(
            "random baseline needs predictions, a scan and seeds",
        ));
    }
    let (mut sen, mut spec) = (0.0, 0.0);
    for s in 0..seeds {
        let mut rng = RandomSource::derived(master_seed, s);
        let picks: Vec<usize> = rng
            .sample_distinct(scan_len - 1, n_pred)
            .into_iter()
            .map(|i| i + 2)
            .collect();
        let r = detection_errors(real_cps, &picks)?;
        sen += r.error_sen;
        spec += r.error_spec;
    }
    Ok((sen / seeds as f64, spec / seeds as f64))
}
