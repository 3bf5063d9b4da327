// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON run configuration. Every section is optional; command-line flags are
//! applied on top and win.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DetectionConfig;
use crate::error::{invalid, Error, Result};
use crate::evaluation::CovTestOptions;
use crate::forecaster::{ModelShape, TrainConfig};
use crate::synth::BenchmarkTemplate;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; overrides the seeds of every section when set.
    pub seed: Option<u64>,
    pub synth: SynthSection,
    pub train: TrainSection,
    pub detection: DetectionSection,
    pub sweep: SweepSection,
    pub covtest: CovTestOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// `task` or `rest`; ignored when `template` is given.
    pub preset: String,
    pub channels: usize,
    pub block_len: usize,
    pub jitter: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Seed for the preset's state parameters.
    pub template_seed: u64,
    pub temporal_smoothing: Option<f64>,
    pub template: Option<BenchmarkTemplate>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            preset: "task".into(),
            channels: 10,
            block_len: 50,
            jitter: 10,
            n_train: 40,
            n_val: 5,
            n_test: 10,
            template_seed: 1,
            temporal_smoothing: None,
            template: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// `desk` or `paper-scale`; `hidden_dims` overrides it.
    pub model_preset: String,
    pub hidden_dims: Option<Vec<usize>>,
    pub optimizer: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            model_preset: "desk".into(),
            hidden_dims: None,
            optimizer: TrainConfig::default(),
        }
    }
}

impl TrainSection {
    pub fn shape(&self) -> Result<ModelShape> {
        match &self.hidden_dims {
            Some(dims) => ModelShape::new(dims.clone()),
            None => ModelShape::preset(&self.model_preset)
                .ok_or_else(|| invalid(format!("unknown model preset '{}'", self.model_preset))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    /// `task` or `rest`; the remaining fields override the preset.
    pub preset: String,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub kernel_scale: Option<f64>,
    pub burn_in: Option<usize>,
    pub strict_peak: Option<bool>,
    pub threshold_on_smoothed: Option<bool>,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            preset: "task".into(),
            lambda: None,
            sigma: None,
            kernel_scale: None,
            burn_in: None,
            strict_peak: None,
            threshold_on_smoothed: None,
        }
    }
}

impl DetectionSection {
    pub fn resolve(&self) -> Result<DetectionConfig> {
        let mut cfg = DetectionConfig::preset(&self.preset)
            .ok_or_else(|| invalid(format!("unknown detection preset '{}'", self.preset)))?;
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.kernel_scale {
            cfg.kernel_scale = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.strict_peak {
            cfg.strict_peak = v;
        }
        if let Some(v) = self.threshold_on_smoothed {
            cfg.threshold_on_smoothed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            sigmas: vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Propagates the master seed into every seeded section.
    pub fn apply_master_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.train.optimizer.seed = seed;
            self.covtest.seed = seed;
        }
    }
}
