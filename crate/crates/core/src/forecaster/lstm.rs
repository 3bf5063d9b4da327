// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{invalid, Result};
use crate::numerics::{dot, Matrix, TimeCourses};

use super::{check_input, ForecastModel, Gradients, LayerState, LstmLayerParams, GATES};

/// Predictions for `t = 2..T` plus the per-layer states after the last input.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// `(T-1) × K`; row `t-2` predicts `U(t)` from `U(1..t-1)`.
    pub predictions: Matrix,
    /// States after consuming `U(1..T-1)`, bottom layer first.
    pub final_states: Vec<LayerState>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything the backward pass needs from one layer at one time step.
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// One LSTM step. Writes activated gates into `gates` and advances `state`.
fn cell_forward(layer: &LstmLayerParams, x: &[f64], state: &mut LayerState, gates: &mut [f64]) {
    let hd = layer.hidden_dim;
    for (r, z) in gates.iter_mut().enumerate() {
        *z = layer.b[r] + dot(layer.w_x.row(r), x) + dot(layer.w_h.row(r), &state.h);
    }
    let (ifo, rest) = gates.split_at_mut(2 * hd);
    let (g, o) = rest.split_at_mut(hd);
    ifo.iter_mut().for_each(|v| *v = sigmoid(*v));
    g.iter_mut().for_each(|v| *v = v.tanh());
    o.iter_mut().for_each(|v| *v = sigmoid(*v));
    for j in 0..hd {
        let c = gates[hd + j] * state.c[j] + gates[j] * gates[2 * hd + j];
        state.c[j] = c;
        state.h[j] = gates[3 * hd + j] * c.tanh();
    }
}

fn head_forward(model: &ForecastModel, h_top: &[f64], out: &mut [f64]) {
    for (k, y) in out.iter_mut().enumerate() {
        *y = model.b_out[k] + dot(model.w_out.row(k), h_top);
    }
}

/// Runs one truncated window. `inputs[s]` is fed at step `s` and the output is
/// compared against `targets[s]`. Returns the summed squared error.
///
/// With `grads`, backpropagates through the window only (states entering the
/// window are treated as constants) and adds `grad_scale * ∂SSE/∂θ` into it.
pub(crate) fn run_window(
    model: &ForecastModel,
    inputs: &[&[f64]],
    targets: &[&[f64]],
    states: &mut [LayerState],
    grads: Option<&mut Gradients>,
    grad_scale: f64,
    mut on_prediction: impl FnMut(&[f64]),
) -> f64 {
    let k = model.input_dim;
    let steps = inputs.len();
    let record = grads.is_some();
    let mut caches: Vec<Vec<StepCache>> = if record {
        model
            .layers
            .iter()
            .map(|_| Vec::with_capacity(steps))
            .collect()
    } else {
        Vec::new()
    };
    let mut tops: Vec<Vec<f64>> = Vec::new();
    let mut dys: Vec<Vec<f64>> = Vec::new();
    let mut gate_buf: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; GATES * l.hidden_dim])
        .collect();
    let mut y = vec![0.0; k];
    let mut sse = 0.0;

    for s in 0..steps {
        let mut x: Vec<f64> = inputs[s].to_vec();
        for (li, layer) in model.layers.iter().enumerate() {
            let (h_prev, c_prev) = if record {
                (states[li].h.clone(), states[li].c.clone())
            } else {
                (Vec::new(), Vec::new())
            };
            cell_forward(layer, &x, &mut states[li], &mut gate_buf[li]);
            if record {
                caches[li].push(StepCache {
                    x: x.clone(),
                    h_prev,
                    c_prev,
                    gates: gate_buf[li].clone(),
                    tanh_c: states[li].c.iter().map(|c| c.tanh()).collect(),
                });
            }
            x.clone_from(&states[li].h);
        }
        head_forward(model, &x, &mut y);
        on_prediction(&y);
        let mut dy = Vec::with_capacity(if record { k } else { 0 });
        for (yk, tk) in y.iter().zip(targets[s]) {
            let r = yk - tk;
            sse += r * r;
            if record {
                dy.push(2.0 * grad_scale * r);
            }
        }
        if record {
            tops.push(x);
            dys.push(dy);
        }
    }

    if let Some(grads) = grads {
        backward(model, &caches, &tops, &dys, grads);
    }
    sse
}

fn backward(
    model: &ForecastModel,
    caches: &[Vec<StepCache>],
    tops: &[Vec<f64>],
    dys: &[Vec<f64>],
    grads: &mut Gradients,
) {
    let steps = dys.len();
    let h_top = model.layers.last().map_or(0, |l| l.hidden_dim);

    // Output head; seeds dL/dh for the top layer at every step.
    let mut dh_above: Vec<Vec<f64>> = vec![vec![0.0; h_top]; steps];
    for s in 0..steps {
        for (kk, &d) in dys[s].iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grads.b_out[kk] += d;
            let gw = grads.w_out.row_mut(kk);
            for (g, h) in gw.iter_mut().zip(&tops[s]) {
                *g += d * h;
            }
            for (dh, w) in dh_above[s].iter_mut().zip(model.w_out.row(kk)) {
                *dh += d * w;
            }
        }
    }

    for li in (0..model.layers.len()).rev() {
        let layer = &model.layers[li];
        let lg = &mut grads.layers[li];
        let hd = layer.hidden_dim;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; GATES * hd];
        let mut dx_all: Vec<Vec<f64>> = if li > 0 {
            vec![vec![0.0; layer.input_dim]; steps]
        } else {
            Vec::new()
        };
        for s in (0..steps).rev() {
            let cache = &caches[li][s];
            let gates = &cache.gates;
            for j in 0..hd {
                let (i, f, g, o) = (
                    gates[j],
                    gates[hd + j],
                    gates[2 * hd + j],
                    gates[3 * hd + j],
                );
                let tc = cache.tanh_c[j];
                let dh = dh_above[s][j] + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[hd + j] = dc * cache.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dc * i * (1.0 - g * g);
                dz[3 * hd + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                lg.b[r] += d;
                for (gw, xv) in lg.w_x.row_mut(r).iter_mut().zip(&cache.x) {
                    *gw += d * xv;
                }
                for (gw, hv) in lg.w_h.row_mut(r).iter_mut().zip(&cache.h_prev) {
                    *gw += d * hv;
                }
                for (dh, w) in dh_next.iter_mut().zip(layer.w_h.row(r)) {
                    *dh += d * w;
                }
                if li > 0 {
                    for (dx, w) in dx_all[s].iter_mut().zip(layer.w_x.row(r)) {
                        *dx += d * w;
                    }
                }
            }
        }
        if li > 0 {
            dh_above = dx_all;
        }
    }
}

/// Teacher-forced one-step-ahead predictions for `t = 2..T`.
pub fn lstm_forward(model: &ForecastModel, sequence: &TimeCourses) -> Result<ForwardOutput> {
    check_input(model, sequence)?;
    let t = sequence.len();
    let k = model.input_dim;
    let mut states: Vec<LayerState> = model
        .layers
        .iter()
        .map(|l| LayerState::zeros(l.hidden_dim))
        .collect();
    let mut values = Vec::with_capacity((t - 1) * k);
    let inputs: Vec<&[f64]> = (0..t - 1).map(|i| sequence.row(i)).collect();
    let targets: Vec<&[f64]> = (1..t).map(|i| sequence.row(i)).collect();
    run_window(model, &inputs, &targets, &mut states, None, 0.0, |y| {
        values.extend_from_slice(y)
    });
    let predictions = Matrix::new(t - 1, k, values)?;
    Ok(ForwardOutput {
        predictions,
        final_states: states,
    })
}

/// Same as the `predictions` of [`lstm_forward`].
pub fn predict_profiles(model: &ForecastModel, sequence: &TimeCourses) -> Result<Matrix> {
    Ok(lstm_forward(model, sequence)?.predictions)
}

/// Mean over `t = 2..T` of the squared Euclidean distance between `U(t)` and
/// its prediction.
pub fn sequence_loss(predictions: &Matrix, sequence: &TimeCourses) -> Result<f64> {
    let t = sequence.len();
    if predictions.shape() != (t - 1, sequence.channels()) {
        return Err(invalid(format!(
            "predictions are {}x{}, expected {}x{}",
            predictions.rows(),
            predictions.cols(),
            t - 1,
            sequence.channels()
        )));
    }
    let sse: f64 = (1..t)
        .map(|i| {
            predictions
                .row(i - 1)
                .iter()
                .zip(sequence.row(i))
                .map(|(p, u)| (u - p) * (u - p))
                .sum::<f64>()
        })
        .sum();
    Ok(sse / (t - 1) as f64)
}

/// Gradient of [`sequence_loss`] by truncated BPTT: the sequence is cut into
/// consecutive windows of `bptt_window` steps, states flow forward across
/// windows but gradients stop at each window's start.
pub fn compute_gradients(
    model: &ForecastModel,
    sequence: &TimeCourses,
    bptt_window: usize,
) -> Result<Gradients> {
    check_input(model, sequence)?;
    if bptt_window == 0 {
        return Err(invalid("bptt_window must be positive"));
    }
    let mut grads = Gradients::zeros_like(model);
    let mut states: Vec<LayerState> = model
        .layers
        .iter()
        .map(|l| LayerState::zeros(l.hidden_dim))
        .collect();
    accumulate_sequence(model, sequence, bptt_window, &mut states, &mut grads);
    Ok(grads)
}

/// Adds the truncated-BPTT gradient of one whole sequence into `grads`.
/// Returns the sequence loss.
pub(crate) fn accumulate_sequence(
    model: &ForecastModel,
    sequence: &TimeCourses,
    bptt_window: usize,
    states: &mut [LayerState],
    grads: &mut Gradients,
) -> f64 {
    let steps = sequence.len() - 1;
    let scale = 1.0 / steps as f64;
    let mut sse = 0.0;
    let mut start = 0;
    while start < steps {
        let end = (start + bptt_window).min(steps);
        sse += window_of(
            model,
            sequence,
            start,
            end,
            states,
            Some(&mut *grads),
            scale,
        );
        start = end;
    }
    sse * scale
}

/// Runs prediction steps `start..end` of `sequence` (step `s` feeds row `s`
/// and targets row `s + 1`).
pub(crate) fn window_of(
    model: &ForecastModel,
    sequence: &TimeCourses,
    start: usize,
    end: usize,
    states: &mut [LayerState],
    grads: Option<&mut Gradients>,
    grad_scale: f64,
) -> f64 {
    let inputs: Vec<&[f64]> = (start..end).map(|i| sequence.row(i)).collect();
    let targets: Vec<&[f64]> = (start + 1..=end).map(|i| sequence.row(i)).collect();
    run_window(model, &inputs, &targets, states, grads, grad_scale, |_| {})
}
