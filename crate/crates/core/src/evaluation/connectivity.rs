// SPDX-License-Identifier: MIT OR Apache-2.0

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{Matrix, TimeCourses};

/// Minimum number of time points for a segment to get a correlation matrix.
pub const MIN_SEGMENT_LEN: usize = 3;

/// Half-open 1-based time interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Rows of `u` covered by this segment.
    pub fn rows(&self, u: &TimeCourses) -> Matrix {
        u.data().slice_rows(self.start - 1, self.end - 1)
    }
}

/// Splits `1..=scan_len` at the change points. A change point opens a new
/// segment: `[1, c₁), [c₁, c₂), …, [c_m, T]`.
pub fn segments(scan_len: usize, cps: &[usize]) -> Result<Vec<Segment>> {
    let mut prev = 1;
    let mut out = Vec::with_capacity(cps.len() + 1);
    for &c in cps {
        if c <= prev || c > scan_len {
            return Err(invalid(format!(
                "change points must be strictly increasing within 2..={scan_len}, got {c}"
            )));
        }
        out.push(Segment {
            start: prev,
            end: c,
        });
        prev = c;
    }
    out.push(Segment {
        start: prev,
        end: scan_len + 1,
    });
    Ok(out)
}

/// A segment left out of the connectivity analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSegment {
    pub segment: Segment,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentConnectivity {
    pub segments: Vec<Segment>,
    /// One `K × K` correlation matrix per entry of `segments`.
    pub matrices: Vec<Matrix>,
    pub skipped: Vec<SkippedSegment>,
}

/// Pearson correlation between the columns of `rows`.
///
/// Zero-variance channels get zero correlation with everything else; the
/// diagonal is always exactly 1.
pub fn pearson_matrix(rows: &Matrix) -> Matrix {
    let (n, k) = rows.shape();
    let means: Vec<f64> = (0..k)
        .map(|c| rows.row_iter().map(|r| r[c]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = Matrix::zeros(k, k);
    for r in rows.row_iter() {
        for i in 0..k {
            let di = r[i] - means[i];
            for j in i..k {
                let v = cov.get(i, j) + di * (r[j] - means[j]);
                cov.set(i, j, v);
            }
        }
    }
    let sd: Vec<f64> = (0..k).map(|i| cov.get(i, i).sqrt()).collect();
    let mut out = Matrix::identity(k);
    for i in 0..k {
        for j in i + 1..k {
            let denom = sd[i] * sd[j];
            let c = if denom > 0.0 {
                (cov.get(i, j) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out.set(i, j, c);
            out.set(j, i, c);
        }
    }
    out
}

/// Correlation matrices of the segments split by `cps`.
///
/// Segments shorter than [`MIN_SEGMENT_LEN`] are skipped and recorded.
pub fn segment_connectivity(u: &TimeCourses, cps: &[usize]) -> Result<SegmentConnectivity> {
    let mut kept = Vec::new();
    let mut matrices = Vec::new();
    let mut skipped = Vec::new();
    for seg in segments(u.len(), cps)? {
        if seg.len() < MIN_SEGMENT_LEN {
            warn!(
                "{}: skipping segment [{}, {}) of length {}",
                u.subject_id(),
                seg.start,
                seg.end,
                seg.len()
            );
            skipped.push(SkippedSegment {
                segment: seg,
                reason: format!("shorter than {MIN_SEGMENT_LEN} samples"),
            });
            continue;
        }
        matrices.push(pearson_matrix(&seg.rows(u)));
        kept.push(seg);
    }
    if kept.len() < 2 {
        return Err(Error::DegenerateSegmentation(format!(
            "{} usable segment(s); at least 2 are needed",
            kept.len()
        )));
    }
    Ok(SegmentConnectivity {
        segments: kept,
        matrices,
        skipped,
    })
}
