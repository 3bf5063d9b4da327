// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection accuracy metrics and statistical validation of segments.

mod connectivity;
mod covtest;
mod metrics;
mod sweep;

pub use connectivity::{
    pearson_matrix, segment_connectivity, segments, Segment, SegmentConnectivity, SkippedSegment,
    MIN_SEGMENT_LEN,
};
pub use covtest::{
    asymptotic_p_value, cov_two_sample_test, CovTestMethod, CovTestOptions, CovTestResult,
    MIN_PERMUTATIONS, MIN_SAMPLES,
};
pub use metrics::{
    apply_lag, detection_errors, lag_seconds_to_samples, random_baseline, EvalResult,
    LaggedChangePoints,
};
pub use sweep::{
    parameter_sweep, score_subjects, select_best, sweep_errors, write_sweep_csv, ScoredSubject,
    SweepRow,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::TimeCourses;

/// Covariance test between two neighbouring segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPairTest {
    pub subject_id: String,
    pub left: Segment,
    pub right: Segment,
    pub result: CovTestResult,
}

/// Tests every pair of neighbouring segments split by `cps`.
///
/// Segments shorter than the test's minimum sample count are dropped first,
/// and the remaining segments are paired in time order. Permutation seeds are
/// derived per pair from `options.seed`.
pub fn test_adjacent_segments(
    u: &TimeCourses,
    cps: &[usize],
    options: &CovTestOptions,
) -> Result<Vec<SegmentPairTest>> {
    let usable: Vec<Segment> = segments(u.len(), cps)?
        .into_iter()
        .filter(|s| s.len() >= MIN_SAMPLES)
        .collect();
    usable
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let opts = CovTestOptions {
                seed: crate::numerics::derive_seed(options.seed, i as u64),
                ..options.clone()
            };
            let result = cov_two_sample_test(&w[0].rows(u), &w[1].rows(u), &opts)?;
            Ok(SegmentPairTest {
                subject_id: u.subject_id().to_string(),
                left: w[0],
                right: w[1],
                result,
            })
        })
        .collect()
}
