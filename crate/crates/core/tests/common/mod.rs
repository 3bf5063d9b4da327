// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the routine it is used to check.

#![allow(dead_code)]

use statetrace::forecaster::{lstm_forward, sequence_loss, ForecastModel, LstmLayerParams, GATES};
use statetrace::numerics::{Matrix, RandomSource, TimeCourses};

pub fn random_matrix(rows: usize, cols: usize, rng: &mut RandomSource) -> Matrix {
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Matrix::new(rows, cols, v).unwrap()
}

pub fn random_series(id: &str, t: usize, k: usize, rng: &mut RandomSource) -> TimeCourses {
    TimeCourses::new(id, random_matrix(t, k, rng)).unwrap()
}

// ---------------------------------------------------------------------------
// Model parameters as one flat vector.

pub fn flatten(model: &ForecastModel) -> Vec<f64> {
    let mut out = Vec::new();
    model.for_each_param(|p| out.extend_from_slice(p));
    out
}

/// Copy of `model` with every parameter taken from `flat`, in the model's
/// documented traversal order.
pub fn with_params(model: &ForecastModel, flat: &[f64]) -> ForecastModel {
    let mut at = 0;
    let mut take = |n: usize| {
        let s = flat[at..at + n].to_vec();
        at += n;
        s
    };
    let mut out = model.clone();
    out.layers = model
        .layers
        .iter()
        .map(|l| {
            let g = GATES * l.hidden_dim;
            LstmLayerParams {
                input_dim: l.input_dim,
                hidden_dim: l.hidden_dim,
                w_x: Matrix::new(g, l.input_dim, take(g * l.input_dim)).unwrap(),
                w_h: Matrix::new(g, l.hidden_dim, take(g * l.hidden_dim)).unwrap(),
                b: take(g),
            }
        })
        .collect();
    let (k, h) = model.w_out.shape();
    out.w_out = Matrix::new(k, h, take(k * h)).unwrap();
    out.b_out = take(k);
    assert_eq!(at, flat.len());
    out
}

pub fn loss(model: &ForecastModel, seq: &TimeCourses) -> f64 {
    sequence_loss(&lstm_forward(model, seq).unwrap().predictions, seq).unwrap()
}

/// Central finite-difference gradient of the sequence loss.
pub fn finite_difference_gradient(model: &ForecastModel, seq: &TimeCourses, step: f64) -> Vec<f64> {
    let base = flatten(model);
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + step;
            let up = loss(&with_params(model, &p), seq);
            p[i] = base[i] - step;
            let down = loss(&with_params(model, &p), seq);
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|)`, with both sides floored at `floor` so that
/// parameters whose gradient vanishes do not divide by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

// ---------------------------------------------------------------------------
// Scalar LSTM written out step by step (one input, one hidden unit, one
// output). Gate order i, f, g, o.

pub struct ScalarLstm {
    pub w_x: [f64; 4],
    pub w_h: [f64; 4],
    pub b: [f64; 4],
    pub w_out: f64,
    pub b_out: f64,
}

impl ScalarLstm {
    pub fn predict(&self, u: &[f64]) -> Vec<f64> {
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (mut h, mut c) = (0.0f64, 0.0f64);
        let mut out = Vec::new();
        for &x in &u[..u.len() - 1] {
            let zi = self.w_x[0] * x + self.w_h[0] * h + self.b[0];
            let zf = self.w_x[1] * x + self.w_h[1] * h + self.b[1];
            let zg = self.w_x[2] * x + self.w_h[2] * h + self.b[2];
            let zo = self.w_x[3] * x + self.w_h[3] * h + self.b[3];
            let i = sig(zi);
            let f = sig(zf);
            let g = zg.tanh();
            let o = sig(zo);
            c = f * c + i * g;
            h = o * c.tanh();
            out.push(self.w_out * h + self.b_out);
        }
        out
    }

    pub fn to_model(&self) -> ForecastModel {
        let col = |v: [f64; 4]| Matrix::new(4, 1, v.to_vec()).unwrap();
        ForecastModel {
            format_version: 1,
            input_dim: 1,
            layers: vec![LstmLayerParams {
                input_dim: 1,
                hidden_dim: 1,
                w_x: col(self.w_x),
                w_h: col(self.w_h),
                b: self.b.to_vec(),
            }],
            w_out: Matrix::new(1, 1, vec![self.w_out]).unwrap(),
            b_out: vec![self.b_out],
            normalization: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracles for the detection and evaluation routines.

/// Gaussian weights `exp(−x²/2s²)` on `−⌈3s⌉..=⌈3s⌉` (radius at least 1),
/// normalized to sum 1.
pub fn oracle_kernel(std: f64) -> Vec<f64> {
    let radius = ((3.0 * std).ceil() as i64).max(1);
    let raw: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * std * std)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Direct convolution of `signal` with `kernel` after padding by literally
/// appending mirrored copies until the kernel fits (half-sample symmetric:
/// the edge sample is repeated).
pub fn oracle_convolve_reflect(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let r = kernel.len() / 2;
    let forward: Vec<f64> = signal.to_vec();
    let backward: Vec<f64> = signal.iter().rev().copied().collect();
    // Build [... back fwd back | fwd | back fwd ...] wide enough on both sides.
    let copies = r / n + 2;
    let mut left: Vec<f64> = Vec::new();
    for c in 0..copies {
        let piece = if c % 2 == 0 { &backward } else { &forward };
        let mut next = piece.clone();
        next.extend_from_slice(&left);
        left = next;
    }
    let mut right: Vec<f64> = Vec::new();
    for c in 0..copies {
        right.extend_from_slice(if c % 2 == 0 { &backward } else { &forward });
    }
    let offset = left.len();
    let mut padded = left;
    padded.extend_from_slice(&forward);
    padded.extend_from_slice(&right);
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * padded[offset + i + j - r])
                .sum()
        })
        .collect()
}

/// Per-row Euclidean distance, `t = 2..T`.
pub fn oracle_prediction_error(u: &Matrix, predicted: &Matrix) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 1..u.rows() {
        let mut s = 0.0;
        for c in 0..u.cols() {
            let d = u.get(t, c) - predicted.get(t - 1, c);
            s += d * d;
        }
        out.push(s.sqrt());
    }
    out
}

/// Mean over `from` of the distance to the nearest element of `to`.
pub fn oracle_nearest_mean(from: &[usize], to: &[usize]) -> f64 {
    let mut total = 0.0;
    for &a in from {
        let mut best = f64::INFINITY;
        for &b in to {
            best = best.min((a as f64 - b as f64).abs());
        }
        total += best;
    }
    total / from.len() as f64
}

/// Pearson correlation of columns `i` and `j` by the two-pass textbook formula.
pub fn oracle_pearson(rows: &Matrix, i: usize, j: usize) -> f64 {
    let n = rows.rows() as f64;
    let xi = rows.column(i);
    let xj = rows.column(j);
    let mi = xi.iter().sum::<f64>() / n;
    let mj = xj.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in xi.iter().zip(&xj) {
        sxy += (a - mi) * (b - mj);
        sxx += (a - mi) * (a - mi);
        syy += (b - mj) * (b - mj);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

// ---------------------------------------------------------------------------
// Fixtures.

/// `n` independent AR(1) sequences, `x_t = φ x_{t−1} + ε_t`, `ε ~ N(0, s²)`,
/// started from the stationary law.
pub fn ar1_dataset(n: usize, k: usize, t: usize, phi: f64, s: f64, seed: u64) -> Vec<TimeCourses> {
    let stationary = s / (1.0 - phi * phi).sqrt();
    (0..n)
        .map(|i| {
            let mut rng = RandomSource::derived(seed, i as u64);
            let mut x: Vec<f64> = (0..k).map(|_| stationary * rng.standard_normal()).collect();
            let mut v = Vec::with_capacity(t * k);
            for step in 0..t {
                if step > 0 {
                    for xc in x.iter_mut() {
                        *xc = phi * *xc + s * rng.standard_normal();
                    }
                }
                v.extend_from_slice(&x);
            }
            TimeCourses::new(format!("ar-{i:03}"), Matrix::new(t, k, v).unwrap()).unwrap()
        })
        .collect()
}
