// SPDX-License-Identifier: MIT OR Apache-2.0

use log::{debug, info};

use crate::error::{invalid, Result};
use crate::numerics::{RandomSource, TimeCourses};

use super::lstm::window_of;
use super::{ForecastModel, Gradients, LayerState, ModelShape, Normalization, TrainConfig};

/// Adam with bias correction over the flattened parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn update(&mut self, model: &mut ForecastModel, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);

        let mut flat = Vec::with_capacity(self.m.len());
        grads.for_each(|g| flat.extend_from_slice(g));
        assert_eq!(flat.len(), self.m.len(), "gradient size mismatch");

        let mut offset = 0;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        model.for_each_param_mut(|params| {
            for (j, p) in params.iter_mut().enumerate() {
                let i = offset + j;
                let g = flat[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            offset += params.len();
        });
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
pub(crate) fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// A trained model and its per-epoch mean training loss.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ForecastModel,
    pub loss_curve: Vec<f64>,
}

/// Fits a forecaster on `dataset`.
///
/// Channels are z-scored with statistics pooled over the whole dataset; the
/// statistics are stored in the returned model. Each epoch visits sequences in
/// a seeded shuffled order, `batch_size` at a time. Within a batch the
/// sequences advance window by window; each window's gradients are summed
/// over the batch, normalized by the number of predicted steps, clipped and
/// applied with one Adam step. Hidden states carry across windows.
///
/// The loss curve entry for an epoch is the mean over sequences of the
/// per-sequence loss observed while training through that epoch.
pub fn train(
    dataset: &[TimeCourses],
    shape: &ModelShape,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(invalid("training dataset is empty"));
    }
    let k = dataset[0].channels();
    if let Some(bad) = dataset.iter().find(|s| s.channels() != k) {
        return Err(invalid(format!(
            "sequence {} has {} channels, expected {k}",
            bad.subject_id(),
            bad.channels()
        )));
    }

    let normalization = Normalization::fit(dataset)?;
    let data: Vec<TimeCourses> = dataset
        .iter()
        .map(|s| normalization.apply(s))
        .collect::<Result<_>>()?;

    let mut init_rng = RandomSource::derived(cfg.seed, 0);
    let mut model = ForecastModel::initialized(k, shape, cfg.init_scale, &mut init_rng)?;
    let mut adam = Adam::new(
        model.param_count(),
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let mut grads = Gradients::zeros_like(&model);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();

    info!(
        "training {} sequences, K={k}, hidden={:?}, {} parameters",
        data.len(),
        shape.hidden_dims,
        model.param_count()
    );

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = RandomSource::derived(cfg.seed, 1 + epoch as u64);
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(cfg.batch_size) {
            let mut states: Vec<Vec<LayerState>> = batch
                .iter()
                .map(|_| {
                    model
                        .layers
                        .iter()
                        .map(|l| LayerState::zeros(l.hidden_dim))
                        .collect()
                })
                .collect();
            let mut sse = vec![0.0; batch.len()];
            let longest = batch.iter().map(|&i| data[i].len() - 1).max().unwrap_or(0);
            let mut start = 0;
            while start < longest {
                grads.reset();
                let mut n_steps = 0usize;
                for (b, &i) in batch.iter().enumerate() {
                    let steps = data[i].len() - 1;
                    if start >= steps {
                        continue;
                    }
                    let end = (start + cfg.bptt_window).min(steps);
                    n_steps += end - start;
                    sse[b] += window_of(
                        &model,
                        &data[i],
                        start,
                        end,
                        &mut states[b],
                        Some(&mut grads),
                        1.0,
                    );
                }
                grads.scale(1.0 / n_steps as f64);
                clip_global_norm(&mut grads, cfg.grad_clip_norm);
                adam.update(&mut model, &grads);
                start += cfg.bptt_window;
            }
            for (b, &i) in batch.iter().enumerate() {
                epoch_loss += sse[b] / (data[i].len() - 1) as f64;
            }
        }
        let mean = epoch_loss / data.len() as f64;
        debug!("epoch {}: loss {mean:.6}", epoch + 1);
        loss_curve.push(mean);
    }
    if let Some(last) = loss_curve.last() {
        info!("final training loss {last:.6}");
    }

    model.normalization = Some(normalization);
    Ok(TrainOutcome { model, loss_curve })
}
