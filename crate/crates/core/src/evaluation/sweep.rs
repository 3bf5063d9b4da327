// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detector::{detect_from_errors, model_errors, DetectionConfig};
use crate::error::{invalid, Error, Result};
use crate::forecaster::ForecastModel;
use crate::numerics::TimeCourses;

use super::detection_errors;

/// Mean detection errors for one `(λ, σ)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub sigma: f64,
    /// NaN when no subject produced a detection.
    pub error_sen: f64,
    pub error_spec: f64,
    /// Subjects for which no change point was detected.
    pub n_failed: usize,
}

/// A subject's prediction errors and its real change points.
#[derive(Clone, Debug)]
pub struct ScoredSubject {
    pub subject_id: String,
    pub errors: Vec<f64>,
    pub real_cps: Vec<usize>,
}

/// Grid evaluation over precomputed error series. Rows are ordered with λ
/// outer and σ inner; every other field of `base` is held fixed.
pub fn sweep_errors(
    subjects: &[ScoredSubject],
    lambdas: &[f64],
    sigmas: &[f64],
    base: &DetectionConfig,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || sigmas.is_empty() {
        return Err(invalid("sweep grids must be nonempty"));
    }
    let mut rows = Vec::with_capacity(lambdas.len() * sigmas.len());
    for &lambda in lambdas {
        for &sigma in sigmas {
            let cfg = DetectionConfig {
                lambda,
                sigma,
                ..base.clone()
            };
            cfg.validate()?;
            let (mut sen, mut spec, mut ok, mut failed) = (0.0, 0.0, 0usize, 0usize);
            for s in subjects {
                let report = detect_from_errors(&s.subject_id, s.errors.clone(), &cfg)?;
                match detection_errors(&s.real_cps, &report.change_points) {
                    Ok(r) => {
                        sen += r.error_sen;
                        spec += r.error_spec;
                        ok += 1;
                    }
                    Err(Error::NoDetections) => failed += 1,
                    Err(e) => return Err(e),
                }
            }
            let denom = if ok == 0 { f64::NAN } else { ok as f64 };
            rows.push(SweepRow {
                lambda,
                sigma,
                error_sen: sen / denom,
                error_spec: spec / denom,
                n_failed: failed,
            });
        }
    }
    Ok(rows)
}

/// Prediction errors for every validation subject under `model`.
pub fn score_subjects(
    validation: &[(TimeCourses, Vec<usize>)],
    model: &ForecastModel,
) -> Result<Vec<ScoredSubject>> {
    validation
        .iter()
        .map(|(u, cps)| {
            Ok(ScoredSubject {
                subject_id: u.subject_id().to_string(),
                errors: model_errors(u, model)?,
                real_cps: cps.clone(),
            })
        })
        .collect()
}

/// Evaluates every `(λ, σ)` on the validation subjects. The forecaster runs
/// once per subject; only thresholding and smoothing are repeated per cell.
pub fn parameter_sweep(
    validation: &[(TimeCourses, Vec<usize>)],
    model: &ForecastModel,
    lambdas: &[f64],
    sigmas: &[f64],
    base: &DetectionConfig,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || sigmas.is_empty() {
        return Err(invalid("sweep grids must be nonempty"));
    }
    sweep_errors(&score_subjects(validation, model)?, lambdas, sigmas, base)
}

/// Row minimizing `error_sen + error_spec`, preferring rows with the fewest
/// failed subjects. Ties keep the earliest row.
pub fn select_best(rows: &[SweepRow]) -> Option<&SweepRow> {
    let min_failed = rows
        .iter()
        .filter(|r| r.error_sen.is_finite())
        .map(|r| r.n_failed)
        .min()?;
    rows.iter()
        .filter(|r| r.n_failed == min_failed && r.error_sen.is_finite())
        .fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if b.error_sen + b.error_spec <= r.error_sen + r.error_spec => Some(b),
            _ => Some(r),
        })
}

/// CSV with header `lambda,sigma,error_sen,error_spec,n_failed`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "lambda,sigma,error_sen,error_spec,n_failed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.lambda, r.sigma, r.error_sen, r.error_spec, r.n_failed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subjects() -> Vec<ScoredSubject> {
        let mut e = vec![0.1; 40];
        e[10] = 3.0;
        e[11] = 2.0;
        e[25] = 2.5;
        vec![
            ScoredSubject {
                subject_id: "a".into(),
                errors: e,
                real_cps: vec![12, 27],
            },
            ScoredSubject {
                subject_id: "flat".into(),
                errors: vec![1.0; 40],
                real_cps: vec![20],
            },
        ]
    }

    #[test]
    fn grid_shape_and_degenerate_grid() {
        let base = DetectionConfig::task();
        let rows = sweep_errors(&subjects(), &[0.0, 1.0, 2.0], &[1.0, 6.0], &base).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[1].lambda, rows[1].sigma), (0.0, 6.0));
        // A constant error series never has a peak.
        assert!(rows.iter().all(|r| r.n_failed == 1));

        let one = sweep_errors(&subjects()[..1], &[0.0], &[6.0], &base).unwrap();
        let report = detect_from_errors("a", subjects()[0].errors.clone(), &base).unwrap();
        let direct = detection_errors(&[12, 27], &report.change_points).unwrap();
        assert_eq!(one[0].error_sen, direct.error_sen);
        assert_eq!(one[0].error_spec, direct.error_spec);
        assert!(sweep_errors(&subjects(), &[], &[1.0], &base).is_err());
    }

    #[test]
    fn selection_and_csv() {
        let rows = vec![
            SweepRow {
                lambda: 0.0,
                sigma: 1.0,
                error_sen: 1.0,
                error_spec: 5.0,
                n_failed: 0,
            },
            SweepRow {
                lambda: 0.5,
                sigma: 1.0,
                error_sen: 2.0,
                error_spec: 2.0,
                n_failed: 0,
            },
            SweepRow {
                lambda: 1.0,
                sigma: 1.0,
                error_sen: 0.5,
                error_spec: 0.5,
                n_failed: 2,
            },
            SweepRow {
                lambda: 2.0,
                sigma: 1.0,
                error_sen: f64::NAN,
                error_spec: f64::NAN,
                n_failed: 3,
            },
        ];
        assert_eq!(select_best(&rows).unwrap().lambda, 0.5);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,sigma,error_sen,error_spec,n_failed\n0,1,1,5,0\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
