// SPDX-License-Identifier: MIT OR Apache-2.0

//! Stacked-LSTM one-step-ahead forecaster.
//!
//! The model reads profiles `U(1..t-1)` and emits a prediction of `U(t)` from
//! a linear head on the last hidden layer. Gate blocks inside every weight
//! matrix and bias vector are stacked in the fixed order
//! `[input, forget, cell-candidate, output]`, each `H` rows tall.

mod lstm;
mod model_io;
mod train;

pub use lstm::{compute_gradients, lstm_forward, predict_profiles, sequence_loss, ForwardOutput};
pub use model_io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use train::{train, Adam, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{Matrix, RandomSource, TimeCourses};

/// Number of gate blocks per LSTM layer.
pub const GATES: usize = 4;

/// Parameters of one LSTM layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H × D` input weights.
    pub w_x: Matrix,
    /// `4H × H` recurrent weights.
    pub w_h: Matrix,
    /// `4H` biases.
    pub b: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_x: Matrix::zeros(GATES * hidden_dim, input_dim),
            w_h: Matrix::zeros(GATES * hidden_dim, hidden_dim),
            b: vec![0.0; GATES * hidden_dim],
        }
    }

    fn validate(&self) -> Result<()> {
        let g = GATES * self.hidden_dim;
        if self.hidden_dim == 0 || self.input_dim == 0 {
            return Err(invalid("layer dimensions must be positive"));
        }
        if self.w_x.shape() != (g, self.input_dim)
            || self.w_h.shape() != (g, self.hidden_dim)
            || self.b.len() != g
        {
            return Err(invalid(format!(
                "layer tensors do not match input_dim={} hidden_dim={}",
                self.input_dim, self.hidden_dim
            )));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite layer bias"));
        }
        Ok(())
    }
}

/// Per-channel affine normalization fitted on a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Channel means and population standard deviations over every row of
    /// every sequence. Constant channels get a unit scale.
    pub fn fit(dataset: &[TimeCourses]) -> Result<Self> {
        let k = dataset
            .first()
            .ok_or_else(|| invalid("cannot fit normalization on an empty dataset"))?
            .channels();
        let mut sum = vec![0.0; k];
        let mut n = 0usize;
        for seq in dataset {
            for row in seq.data().row_iter() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                n += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; k];
        for seq in dataset {
            for row in seq.data().row_iter() {
                for ((s, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, seq: &TimeCourses) -> Result<TimeCourses> {
        if seq.channels() != self.mean.len() {
            return Err(invalid(format!(
                "normalization has {} channels, sequence has {}",
                self.mean.len(),
                seq.channels()
            )));
        }
        let mut data = seq.data().clone();
        for r in 0..data.rows() {
            for ((v, m), s) in data.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        TimeCourses::new(seq.subject_id(), data)
    }

    /// Maps rows from normalized units back to the original scale.
    pub fn invert(&self, rows: &Matrix) -> Matrix {
        let mut out = rows.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }
}

/// Stacked LSTM plus linear output head.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastModel {
    pub format_version: u32,
    pub input_dim: usize,
    pub layers: Vec<LstmLayerParams>,
    /// `K × H_last` output weights.
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    /// Applied to inputs before the network sees them; `None` for raw models.
    pub normalization: Option<Normalization>,
}

impl ForecastModel {
    /// All-zero model for `input_dim` channels and the given hidden sizes.
    pub fn zeros(input_dim: usize, shape: &ModelShape) -> Result<Self> {
        shape.validate()?;
        if input_dim == 0 {
            return Err(invalid("input_dim must be positive"));
        }
        let mut layers = Vec::with_capacity(shape.hidden_dims.len());
        let mut d = input_dim;
        for &h in &shape.hidden_dims {
            layers.push(LstmLayerParams::zeros(d, h));
            d = h;
        }
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            input_dim,
            layers,
            w_out: Matrix::zeros(input_dim, d),
            b_out: vec![0.0; input_dim],
            normalization: None,
        })
    }

    /// Uniform `[-scale, scale]` initialization with the forget-gate bias at +1.
    pub fn initialized(
        input_dim: usize,
        shape: &ModelShape,
        scale: f64,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        let mut model = Self::zeros(input_dim, shape)?;
        model.for_each_param_mut(|p| {
            for v in p {
                *v = rng.uniform(-scale, scale);
            }
        });
        for layer in &mut model.layers {
            let h = layer.hidden_dim;
            layer.b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        }
        Ok(model)
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden_dim).collect()
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(|p| n += p.len());
        n
    }

    /// Visits parameter tensors in the documented order: per layer
    /// `w_x, w_h, b`, then `w_out, b_out`.
    pub fn for_each_param(&self, mut f: impl FnMut(&[f64])) {
        for l in &self.layers {
            f(l.w_x.values());
            f(l.w_h.values());
            f(&l.b);
        }
        f(self.w_out.values());
        f(&self.b_out);
    }

    pub(crate) fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.w_x.values_mut());
            f(l.w_h.values_mut());
            f(&mut l.b);
        }
        f(self.w_out.values_mut());
        f(&mut self.b_out);
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(invalid("model has no LSTM layers"));
        }
        let mut d = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.input_dim != d {
                return Err(invalid(format!(
                    "layer {i} input_dim {} does not match {d}",
                    l.input_dim
                )));
            }
            l.validate()?;
            d = l.hidden_dim;
        }
        if self.w_out.shape() != (self.input_dim, d) || self.b_out.len() != self.input_dim {
            return Err(invalid("output head does not match model dimensions"));
        }
        if self.b_out.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite output bias"));
        }
        if let Some(n) = &self.normalization {
            if n.mean.len() != self.input_dim
                || n.std.len() != self.input_dim
                || n.mean.iter().chain(&n.std).any(|v| !v.is_finite())
                || n.std.iter().any(|s| *s <= 0.0)
            {
                return Err(invalid("normalization statistics are inconsistent"));
            }
        }
        Ok(())
    }

    /// Applies the stored normalization, or returns the input unchanged.
    pub fn normalize(&self, seq: &TimeCourses) -> Result<TimeCourses> {
        match &self.normalization {
            Some(n) => n.apply(seq),
            None => Ok(seq.clone()),
        }
    }
}

/// Hidden sizes of the stacked LSTM, bottom to top.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub hidden_dims: Vec<usize>,
}

impl ModelShape {
    pub fn new(hidden_dims: Vec<usize>) -> Result<Self> {
        let s = Self { hidden_dims };
        s.validate()?;
        Ok(s)
    }

    /// 2 × 64, the default for desk-scale runs.
    pub fn desk() -> Self {
        Self {
            hidden_dims: vec![64, 64],
        }
    }

    /// 2 hidden layers × 256 nodes.
    pub fn paper_scale() -> Self {
        Self {
            hidden_dims: vec![256, 256],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper-scale" => Some(Self::paper_scale()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(invalid(
                "model needs at least one layer and positive hidden sizes",
            ));
        }
        Ok(())
    }
}

impl Default for ModelShape {
    fn default() -> Self {
        Self::desk()
    }
}

/// Optimizer and truncation settings for [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Time steps per truncated BPTT segment.
    pub bptt_window: usize,
    /// Sequences whose window gradients are summed per Adam step.
    pub batch_size: usize,
    pub seed: u64,
    pub grad_clip_norm: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            bptt_window: 32,
            batch_size: 4,
            seed: 0,
            grad_clip_norm: 5.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && self.epochs >= 1
            && self.bptt_window >= 2
            && self.batch_size >= 1
            && self.grad_clip_norm.is_finite()
            && self.grad_clip_norm > 0.0
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0
            && self.init_scale.is_finite()
            && self.init_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid training configuration: {self:?}")))
        }
    }
}

/// Gradients with the same layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LstmLayerParams>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &ForecastModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.input_dim, l.hidden_dim))
                .collect(),
            w_out: Matrix::zeros(model.w_out.rows(), model.w_out.cols()),
            b_out: vec![0.0; model.b_out.len()],
        }
    }

    /// Same visiting order as [`ForecastModel::for_each_param`].
    pub fn for_each(&self, mut f: impl FnMut(&[f64])) {
        for l in &self.layers {
            f(l.w_x.values());
            f(l.w_h.values());
            f(&l.b);
        }
        f(self.w_out.values());
        f(&self.b_out);
    }

    pub(crate) fn for_each_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.w_x.values_mut());
            f(l.w_h.values_mut());
            f(&mut l.b);
        }
        f(self.w_out.values_mut());
        f(&mut self.b_out);
    }

    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.for_each(|g| sq += g.iter().map(|v| v * v).sum::<f64>());
        sq.sqrt()
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.for_each_mut(|g| g.iter_mut().for_each(|v| *v *= s));
    }

    pub(crate) fn reset(&mut self) {
        self.for_each_mut(|g| g.iter_mut().for_each(|v| *v = 0.0));
    }
}

/// Hidden and cell state of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LayerState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

pub(crate) fn check_input(model: &ForecastModel, seq: &TimeCourses) -> Result<()> {
    if seq.channels() != model.input_dim {
        return Err(invalid(format!(
            "sequence has {} channels, model expects {}",
            seq.channels(),
            model.input_dim
        )));
    }
    Ok(())
}
