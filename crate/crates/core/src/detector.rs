// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change points from one-step prediction errors.
//!
//! For a subject with profiles `U(1..T)` and predictions `Ũ(2..T)`:
//!
//! - `E(t) = ‖U(t) − Ũ(t)‖₂` for `t = 2..T`
//! - `T_v = mean(E) + λ·std(E)` (population std)
//! - `A(t) = 1` iff `E(t) > T_v`
//! - `sE = E ⊛ w`, `w` a Gaussian kernel with std `kernel_scale / σ` samples
//! - `t` is a change point iff `A(t) = 1` and `sE` has a local maximum at `t`
//!
//! All series are stored 0-based with entry `j` standing for time `t = j + 2`.
//! Change points are reported as 1-based time indices.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forecaster::{predict_profiles, ForecastModel};
use crate::numerics::{convolve_same, gaussian_kernel, mean_std, Matrix, TimeCourses};

/// Time index of series entry 0.
pub const FIRST_PREDICTED_T: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Threshold multiplier on the error standard deviation.
    pub lambda: f64,
    /// Smoothing control; larger means a narrower kernel.
    pub sigma: f64,
    /// Kernel std in samples is `kernel_scale / sigma`.
    pub kernel_scale: f64,
    /// Earliest 1-based time eligible as a change point.
    pub burn_in: usize,
    /// Require a strict fall after the peak too, so flat-topped peaks are
    /// never reported. When false the leftmost sample of a plateau wins.
    pub strict_peak: bool,
    /// Compare the smoothed rather than the raw error against the threshold.
    pub threshold_on_smoothed: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self::task()
    }
}

impl DetectionConfig {
    /// Task-paradigm setting: σ = 6, λ = 0.
    pub fn task() -> Self {
        Self {
            lambda: 0.0,
            sigma: 6.0,
            kernel_scale: 6.0,
            burn_in: 2,
            strict_peak: false,
            threshold_on_smoothed: false,
        }
    }

    /// Resting-state setting: σ = 3, λ = 1.
    pub fn rest() -> Self {
        Self {
            lambda: 1.0,
            sigma: 3.0,
            ..Self::task()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "task" => Some(Self::task()),
            "rest" => Some(Self::rest()),
            _ => None,
        }
    }

    pub fn kernel_std(&self) -> f64 {
        self.kernel_scale / self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.kernel_scale.is_finite() && self.kernel_scale > 0.0) {
            return Err(invalid(format!(
                "kernel_scale must be positive, got {}",
                self.kernel_scale
            )));
        }
        if !self.lambda.is_finite() {
            return Err(invalid("lambda must be finite"));
        }
        if self.burn_in < 2 {
            return Err(invalid(format!(
                "burn_in must be at least 2, got {}",
                self.burn_in
            )));
        }
        Ok(())
    }
}

/// All intermediate detection artifacts for one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangePointReport {
    pub subject_id: String,
    pub threshold: f64,
    /// `E(t)` for `t = 2..T`.
    pub errors: Vec<f64>,
    /// `sE(t)` for `t = 2..T`.
    pub smoothed: Vec<f64>,
    /// `A(t)` for `t = 2..T`, as 0/1.
    pub anomaly: Vec<u8>,
    /// 1-based, ascending.
    pub change_points: Vec<usize>,
}

impl ChangePointReport {
    /// Number of time points of the underlying scan.
    pub fn scan_len(&self) -> usize {
        self.errors.len() + 1
    }

    /// Checks the structural invariants of a report (lengths, ordering, and
    /// that every change point is flagged as an anomaly).
    pub fn validate(&self) -> Result<()> {
        let n = self.errors.len();
        if self.smoothed.len() != n || self.anomaly.len() != n {
            return Err(invalid("report series have different lengths"));
        }
        if !self.threshold.is_finite()
            || self
                .errors
                .iter()
                .chain(&self.smoothed)
                .any(|v| !v.is_finite())
        {
            return Err(invalid("report contains non-finite values"));
        }
        if self.anomaly.iter().any(|a| *a > 1) {
            return Err(invalid("anomaly flags must be 0 or 1"));
        }
        if !self.change_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("change points are not strictly increasing"));
        }
        for &t in &self.change_points {
            if t < FIRST_PREDICTED_T || t > n + 1 || self.anomaly[t - FIRST_PREDICTED_T] != 1 {
                return Err(invalid(format!(
                    "change point {t} is not a flagged anomaly"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))?;
        report
            .validate()
            .map_err(|e| Error::Parse(format!("report: {e}")))?;
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Row-wise Euclidean distance between `U(t)` and its prediction, `t = 2..T`.
pub fn prediction_error(u: &TimeCourses, predicted: &Matrix) -> Result<Vec<f64>> {
    let t = u.len();
    if predicted.shape() != (t - 1, u.channels()) {
        return Err(invalid(format!(
            "predictions are {}x{}, expected {}x{}",
            predicted.rows(),
            predicted.cols(),
            t - 1,
            u.channels()
        )));
    }
    Ok(predicted
        .row_iter()
        .enumerate()
        .map(|(j, p)| {
            u.row(j + 1)
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// `mean(E) + λ·std(E)` with the population standard deviation.
pub fn threshold(errors: &[f64], lambda: f64) -> Result<f64> {
    if errors.len() < 2 {
        return Err(invalid("threshold needs at least two error values"));
    }
    let (mean, std) = mean_std(errors);
    Ok(mean + lambda * std)
}

/// `A(t) = E(t) > T_v`.
pub fn anomaly_mask(errors: &[f64], threshold: f64) -> Vec<bool> {
    errors.iter().map(|&e| e > threshold).collect()
}

pub fn smooth_errors(errors: &[f64], cfg: &DetectionConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let kernel = gaussian_kernel(cfg.kernel_std())?;
    convolve_same(errors, &kernel)
}

/// Supra-threshold local maxima of the smoothed error, as 1-based times.
///
/// Entry `j` qualifies when `sE[j-1] < sE[j]` and `sE[j] >= sE[j+1]`
/// (`>` with `strict_peak`), the compared series exceeds `T_v` at `j`, and its
/// time is at least `burn_in`. The first and last entries never qualify.
pub fn detect_change_points(
    errors: &[f64],
    smoothed: &[f64],
    threshold: f64,
    cfg: &DetectionConfig,
) -> Result<Vec<usize>> {
    if errors.len() != smoothed.len() {
        return Err(invalid("errors and smoothed errors differ in length"));
    }
    let checked = if cfg.threshold_on_smoothed {
        smoothed
    } else {
        errors
    };
    let n = smoothed.len();
    let mut cps = Vec::new();
    for j in 1..n.saturating_sub(1) {
        let t = j + FIRST_PREDICTED_T;
        if t < cfg.burn_in || checked[j] <= threshold {
            continue;
        }
        let rises = smoothed[j - 1] < smoothed[j];
        let falls = if cfg.strict_peak {
            smoothed[j] > smoothed[j + 1]
        } else {
            smoothed[j] >= smoothed[j + 1]
        };
        if rises && falls {
            cps.push(t);
        }
    }
    Ok(cps)
}

/// Threshold, mask, smoothing and peak picking on a precomputed error series.
pub fn detect_from_errors(
    subject_id: &str,
    errors: Vec<f64>,
    cfg: &DetectionConfig,
) -> Result<ChangePointReport> {
    cfg.validate()?;
    let tv = threshold(&errors, cfg.lambda)?;
    let smoothed = smooth_errors(&errors, cfg)?;
    let checked = if cfg.threshold_on_smoothed {
        &smoothed
    } else {
        &errors
    };
    let anomaly = anomaly_mask(checked, tv)
        .into_iter()
        .map(u8::from)
        .collect();
    let change_points = detect_change_points(&errors, &smoothed, tv, cfg)?;
    Ok(ChangePointReport {
        subject_id: subject_id.to_string(),
        threshold: tv,
        errors,
        smoothed,
        anomaly,
        change_points,
    })
}

/// Prediction error of `model` on `u`, measured in the model's normalized
/// units when it carries normalization statistics.
pub fn model_errors(u: &TimeCourses, model: &ForecastModel) -> Result<Vec<f64>> {
    let normalized = model.normalize(u)?;
    let predicted = predict_profiles(model, &normalized)?;
    prediction_error(&normalized, &predicted)
}

/// Full pipeline for one subject.
pub fn run_detection(
    u: &TimeCourses,
    model: &ForecastModel,
    cfg: &DetectionConfig,
) -> Result<ChangePointReport> {
    cfg.validate()?;
    detect_from_errors(u.subject_id(), model_errors(u, model)?, cfg)
}
