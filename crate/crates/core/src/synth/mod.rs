// SPDX-License-Identifier: MIT OR Apache-2.0

//! Piecewise-stationary ground-truth generator.
//!
//! A [`Paradigm`] is an ordered list of blocks, each naming a [`StateSpec`]
//! and a duration. Every block draws its samples from its state: i.i.d.
//! Gaussian, or a VAR(1) process started from its stationary distribution.
//! The first sample of each block after the first is a change point.

mod disk;

pub use disk::{
    check_subject_id, load_split, parse_manifest, read_manifest, write_benchmark, Manifest,
    ManifestEntry, MANIFEST_FILE,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{
    convolve_same, derive_seed, gaussian_kernel, Matrix, RandomSource, TimeCourses,
};

/// Minimum block duration in samples.
pub const MIN_BLOCK_LEN: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateGenerator {
    Gaussian {
        covariance: Matrix,
    },
    Var1 {
        /// `K × K`, spectral radius below 1.
        coefficients: Matrix,
        innovation_covariance: Matrix,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub label: String,
    pub mean: Vec<f64>,
    pub generator: StateGenerator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub duration: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paradigm {
    pub blocks: Vec<Block>,
}

impl Paradigm {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let p = Self { blocks };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(invalid("paradigm has no blocks"));
        }
        if let Some(b) = self.blocks.iter().find(|b| b.duration < MIN_BLOCK_LEN) {
            return Err(invalid(format!(
                "block '{}' lasts {} samples; minimum is {MIN_BLOCK_LEN}",
                b.label, b.duration
            )));
        }
        Ok(())
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.duration).sum()
    }

    /// 1-based start times of blocks 2..n.
    pub fn change_points(&self) -> Vec<usize> {
        let mut t = 1;
        let mut cps = Vec::with_capacity(self.blocks.len().saturating_sub(1));
        for b in &self.blocks[..self.blocks.len() - 1] {
            t += b.duration;
            cps.push(t);
        }
        cps
    }
}

/// Stationary covariance `Σ = AΣAᵀ + Q` by the doubling iteration
/// `Σ ← Σ + AₖΣAₖᵀ`, `Aₖ₊₁ = Aₖ²`, which converges iff `ρ(A) < 1`.
pub fn stationary_covariance(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let k = a.rows();
    if a.shape() != (k, k) || q.shape() != (k, k) {
        return Err(invalid("VAR(1) matrices must be square and of equal size"));
    }
    let mut sigma = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let term = ak.matmul(&sigma)?.matmul(&ak.transpose())?;
        sigma = sigma.add(&term)?;
        ak = ak.matmul(&ak)?;
        let norm = ak.frobenius_norm();
        if !norm.is_finite() || norm > 1e150 {
            break;
        }
        if norm < 1e-16 {
            // Symmetrize away rounding drift.
            let st = sigma.transpose();
            return sigma.add(&st).map(|m| m.scale(0.5));
        }
    }
    Err(invalid(
        "VAR(1) coefficient matrix has spectral radius >= 1",
    ))
}

enum Compiled {
    Gaussian {
        chol: Matrix,
    },
    Var1 {
        a: Matrix,
        innovation_chol: Matrix,
        stationary_chol: Matrix,
    },
}

struct CompiledState {
    mean: Vec<f64>,
    kind: Compiled,
}

fn correlated_draw(chol: &Matrix, rng: &mut RandomSource) -> Vec<f64> {
    let z: Vec<f64> = (0..chol.cols()).map(|_| rng.standard_normal()).collect();
    chol.mul_vec(&z)
}

impl CompiledState {
    fn new(spec: &StateSpec) -> Result<Self> {
        let k = spec.mean.len();
        if k == 0 || spec.mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid(format!(
                "state '{}' has an invalid mean",
                spec.label
            )));
        }
        let kind = match &spec.generator {
            StateGenerator::Gaussian { covariance } => {
                if covariance.shape() != (k, k) {
                    return Err(invalid(format!("state '{}': covariance shape", spec.label)));
                }
                Compiled::Gaussian {
                    chol: covariance
                        .cholesky()
                        .map_err(|e| invalid(format!("state '{}': {e}", spec.label)))?,
                }
            }
            StateGenerator::Var1 {
                coefficients,
                innovation_covariance,
            } => {
                if coefficients.shape() != (k, k) || innovation_covariance.shape() != (k, k) {
                    return Err(invalid(format!("state '{}': VAR(1) shapes", spec.label)));
                }
                let innovation_chol = innovation_covariance
                    .cholesky()
                    .map_err(|e| invalid(format!("state '{}': {e}", spec.label)))?;
                let stationary = stationary_covariance(coefficients, innovation_covariance)
                    .map_err(|e| invalid(format!("state '{}': {e}", spec.label)))?;
                Compiled::Var1 {
                    a: coefficients.clone(),
                    innovation_chol,
                    stationary_chol: stationary
                        .cholesky()
                        .map_err(|e| invalid(format!("state '{}': {e}", spec.label)))?,
                }
            }
        };
        Ok(Self {
            mean: spec.mean.clone(),
            kind,
        })
    }

    fn fill(&self, rows: &mut Vec<f64>, n: usize, rng: &mut RandomSource) {
        match &self.kind {
            Compiled::Gaussian { chol } => {
                for _ in 0..n {
                    let d = correlated_draw(chol, rng);
                    rows.extend(d.iter().zip(&self.mean).map(|(x, m)| x + m));
                }
            }
            Compiled::Var1 {
                a,
                innovation_chol,
                stationary_chol,
            } => {
                let mut y = correlated_draw(stationary_chol, rng);
                for step in 0..n {
                    if step > 0 {
                        let e = correlated_draw(innovation_chol, rng);
                        y = a.mul_vec(&y).iter().zip(&e).map(|(p, e)| p + e).collect();
                    }
                    rows.extend(y.iter().zip(&self.mean).map(|(x, m)| x + m));
                }
            }
        }
    }
}

fn compile_states(
    paradigm: &Paradigm,
    states: &[StateSpec],
) -> Result<HashMap<String, CompiledState>> {
    paradigm.validate()?;
    let k = states
        .first()
        .ok_or_else(|| invalid("no states supplied"))?
        .mean
        .len();
    let mut compiled = HashMap::new();
    for s in states {
        if s.mean.len() != k {
            return Err(invalid(format!(
                "state '{}' has {} channels, expected {k}",
                s.label,
                s.mean.len()
            )));
        }
        compiled.insert(s.label.clone(), CompiledState::new(s)?);
    }
    for b in &paradigm.blocks {
        if !compiled.contains_key(&b.label) {
            return Err(invalid(format!("unknown state label '{}'", b.label)));
        }
    }
    Ok(compiled)
}

fn render(
    subject_id: &str,
    paradigm: &Paradigm,
    compiled: &HashMap<String, CompiledState>,
    k: usize,
    rng: &mut RandomSource,
    temporal_smoothing: Option<f64>,
) -> Result<(TimeCourses, Vec<usize>)> {
    let t = paradigm.total_len();
    let mut values = Vec::with_capacity(t * k);
    for b in &paradigm.blocks {
        compiled[&b.label].fill(&mut values, b.duration, rng);
    }
    let mut data = Matrix::new(t, k, values)?;
    if let Some(std) = temporal_smoothing {
        let kernel = gaussian_kernel(std)?;
        for c in 0..k {
            let smoothed = convolve_same(&data.column(c), &kernel)?;
            for (r, v) in smoothed.into_iter().enumerate() {
                data.set(r, c, v);
            }
        }
    }
    Ok((
        TimeCourses::new(subject_id, data)?,
        paradigm.change_points(),
    ))
}

/// Draws one subject following `paradigm`. Returns the series and its 1-based
/// ground-truth change points.
pub fn generate_subject(
    subject_id: &str,
    paradigm: &Paradigm,
    states: &[StateSpec],
    seed: u64,
    temporal_smoothing: Option<f64>,
) -> Result<(TimeCourses, Vec<usize>)> {
    let compiled = compile_states(paradigm, states)?;
    let mut rng = RandomSource::new(seed);
    render(
        subject_id,
        paradigm,
        &compiled,
        states[0].mean.len(),
        &mut rng,
        temporal_smoothing,
    )
}

/// States, block layout and optional smoothing shared by a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTemplate {
    pub paradigm: Paradigm,
    pub states: Vec<StateSpec>,
    pub temporal_smoothing: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subject {
    pub data: TimeCourses,
    pub change_points: Vec<usize>,
    pub split: Split,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark {
    pub train: Vec<Subject>,
    pub val: Vec<Subject>,
    pub test: Vec<Subject>,
}

impl Benchmark {
    pub fn split(&self, split: Split) -> &[Subject] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn subjects(&self) -> impl Iterator<Item = &Subject> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Generates train/validation/test subjects.
///
/// Subject `i` (counting across splits in train, val, test order) uses seed
/// `derive_seed(master_seed, i)`; its block durations are jittered uniformly
/// within `±jitter` from that seed before the data are drawn.
pub fn make_benchmark(
    n_train: usize,
    n_val: usize,
    n_test: usize,
    template: &BenchmarkTemplate,
    jitter: usize,
    master_seed: u64,
) -> Result<Benchmark> {
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(invalid("every split needs at least one subject"));
    }
    let compiled = compile_states(&template.paradigm, &template.states)?;
    let min_duration = template
        .paradigm
        .blocks
        .iter()
        .map(|b| b.duration)
        .min()
        .unwrap_or(0);
    if jitter >= min_duration || min_duration - jitter < MIN_BLOCK_LEN {
        return Err(invalid(format!(
            "jitter {jitter} is too large for the shortest block ({min_duration} samples)"
        )));
    }
    let k = template.states[0].mean.len();

    let mut index = 0u64;
    let mut make_split = |split: Split, n: usize| -> Result<Vec<Subject>> {
        (0..n)
            .map(|i| {
                let seed = derive_seed(master_seed, index);
                index += 1;
                let mut rng = RandomSource::new(seed);
                let blocks = template
                    .paradigm
                    .blocks
                    .iter()
                    .map(|b| {
                        let delta = if jitter == 0 {
                            0
                        } else {
                            rng.uniform_int(-(jitter as i64), jitter as i64)
                        };
                        Block {
                            label: b.label.clone(),
                            duration: (b.duration as i64 + delta) as usize,
                        }
                    })
                    .collect();
                let paradigm = Paradigm { blocks };
                let id = format!("{}-{:03}", split.as_str(), i);
                let (data, change_points) = render(
                    &id,
                    &paradigm,
                    &compiled,
                    k,
                    &mut rng,
                    template.temporal_smoothing,
                )?;
                Ok(Subject {
                    data,
                    change_points,
                    split,
                    seed,
                })
            })
            .collect()
    };
    let train = make_split(Split::Train, n_train)?;
    let val = make_split(Split::Val, n_val)?;
    let test = make_split(Split::Test, n_test)?;
    Ok(Benchmark { train, val, test })
}

/// Random SPD matrix `B Bᵀ + diag(d)` scaled by `scale²`, with `B` of rank 2
/// and entries of standard deviation `factor`.
fn random_covariance(k: usize, scale: f64, factor: f64, rng: &mut RandomSource) -> Matrix {
    let rank = 2.min(k);
    let b: Vec<f64> = (0..k * rank)
        .map(|_| factor * rng.standard_normal())
        .collect();
    let b = Matrix::new(k, rank, b).expect("finite draws");
    let mut cov = b.matmul(&b.transpose()).expect("shapes agree");
    for i in 0..k {
        let d = cov.get(i, i) + rng.uniform(0.3, 1.0);
        cov.set(i, i, d);
    }
    cov.scale(scale * scale)
}

const LEVEL_AMPLITUDE: f64 = 3.0;
const REST_AMPLITUDE: f64 = 7.0;
const REST_FACTOR: f64 = 0.4;

/// Draws a mean whose RMS distance to each of `others` is at least
/// `amplitude`, giving up after a bounded number of redraws (tiny K may make
/// the floor unreachable).
fn separated_mean(k: usize, amplitude: f64, others: &[&[f64]], rng: &mut RandomSource) -> Vec<f64> {
    let mut mean = random_mean(k, amplitude, rng);
    for _ in 0..1000 {
        if others.iter().all(|o| rms_distance(&mean, o) >= amplitude) {
            break;
        }
        mean = random_mean(k, amplitude, rng);
    }
    mean
}

fn rms_distance(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / a.len() as f64).sqrt()
}

fn random_mean(k: usize, amplitude: f64, rng: &mut RandomSource) -> Vec<f64> {
    (0..k)
        .map(|_| {
            let sign = if rng.uniform(0.0, 1.0) < 0.5 {
                -1.0
            } else {
                1.0
            };
            sign * amplitude * rng.uniform(0.5, 1.0)
        })
        .collect()
}

/// Block-design analog: six Gaussian event states with distinct means and
/// covariances, one block each of `block_len` samples.
pub fn task_template(k: usize, block_len: usize, seed: u64) -> Result<BenchmarkTemplate> {
    if k == 0 {
        return Err(invalid("need at least one channel"));
    }
    let labels = ["cue", "lf", "lh", "rf", "rh", "t"];
    let mut rng = RandomSource::new(seed);
    let mut states: Vec<StateSpec> = Vec::with_capacity(labels.len());
    for l in labels {
        // Consecutive events differ in level so that every boundary is
        // detectable.
        let previous: Vec<&[f64]> = states
            .last()
            .map(|s| s.mean.as_slice())
            .into_iter()
            .collect();
        let mean = separated_mean(k, LEVEL_AMPLITUDE, &previous, &mut rng);
        states.push(StateSpec {
            label: l.to_string(),
            mean,
            generator: StateGenerator::Gaussian {
                covariance: random_covariance(k, 0.5, 0.7, &mut rng),
            },
        });
    }
    let paradigm = Paradigm::new(
        labels
            .iter()
            .map(|l| Block {
                label: (*l).to_string(),
                duration: block_len,
            })
            .collect(),
    )?;
    Ok(BenchmarkTemplate {
        paradigm,
        states,
        temporal_smoothing: None,
    })
}

/// Regime-switching analog: four VAR(1) states with distinct dynamics,
/// noise covariance and level, visited in a fixed order of eight blocks.
pub fn rest_template(k: usize, block_len: usize, seed: u64) -> Result<BenchmarkTemplate> {
    if k == 0 {
        return Err(invalid("need at least one channel"));
    }
    let labels = ["s1", "s2", "s3", "s4"];
    let mut rng = RandomSource::new(seed);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(labels.len());
    for _ in labels {
        let others: Vec<&[f64]> = means.iter().map(|m| m.as_slice()).collect();
        let m = separated_mean(k, REST_AMPLITUDE, &others, &mut rng);
        means.push(m);
    }
    let states = labels
        .iter()
        .zip(means)
        .enumerate()
        .map(|(i, (l, mean))| {
            // Diagonal persistence plus a signed-permutation coupling. The
            // coupling's eigenvalues have modulus 1, so the spectral radius
            // is at most rho + 0.2 <= 0.95.
            let rho = 0.3 + 0.15 * i as f64;
            let mut a = Matrix::zeros(k, k);
            for r in 0..k {
                a.set(r, r, rho);
                let c = (r + 1 + i) % k;
                if c != r {
                    a.set(
                        r,
                        c,
                        0.2 * if rng.uniform(0.0, 1.0) < 0.5 {
                            -1.0
                        } else {
                            1.0
                        },
                    );
                }
            }
            StateSpec {
                label: (*l).to_string(),
                mean,
                generator: StateGenerator::Var1 {
                    coefficients: a,
                    innovation_covariance: random_covariance(k, 0.5, REST_FACTOR, &mut rng),
                },
            }
        })
        .collect();
    let order = ["s1", "s2", "s3", "s4", "s2", "s1", "s4", "s3"];
    let paradigm = Paradigm::new(
        order
            .iter()
            .map(|l| Block {
                label: (*l).to_string(),
                duration: block_len,
            })
            .collect(),
    )?;
    Ok(BenchmarkTemplate {
        paradigm,
        states,
        temporal_smoothing: None,
    })
}
