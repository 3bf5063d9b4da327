// SPDX-License-Identifier: MIT OR Apache-2.0

//! Subcommand bodies. Every command loads and validates all of its inputs
//! before it creates the output directory or writes a file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::detector::{run_detection, ChangePointReport, DetectionConfig};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{
    apply_lag, detection_errors, lag_seconds_to_samples, parameter_sweep, select_best,
    test_adjacent_segments, write_sweep_csv, CovTestOptions, EvalResult, SegmentPairTest, SweepRow,
};
use crate::forecaster::{load_model, save_model, train};
use crate::numerics::{derive_seed, TimeCourses};
use crate::persist::{write_atomic, write_json};
use crate::synth::{
    check_subject_id, load_split, make_benchmark, read_manifest, rest_template, task_template,
    write_benchmark, Split,
};

use super::config::RunConfig;
use super::{
    Command, CommonArgs, CovtestArgs, DetectArgs, DetectionArgs, EvalArgs, SynthArgs, TrainArgs,
};

pub(super) fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) if a.sweep => sweep(a),
        Command::Eval(a) => eval(a),
        Command::Covtest(a) => covtest(a),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.apply_master_seed();
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(invalid(format!("{} is not a directory", dir.display())));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn detection_config(cfg: &RunConfig, args: &DetectionArgs) -> Result<DetectionConfig> {
    let mut section = cfg.detection.clone();
    if let Some(p) = &args.preset {
        section.preset = p.clone();
    }
    section.lambda = args.lambda.or(section.lambda);
    section.sigma = args.sigma.or(section.sigma);
    section.kernel_scale = args.kernel_scale.or(section.kernel_scale);
    section.burn_in = args.burn_in.or(section.burn_in);
    if args.strict_peak {
        section.strict_peak = Some(true);
    }
    if args.threshold_on_smoothed {
        section.threshold_on_smoothed = Some(true);
    }
    section.resolve()
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut s = cfg.synth.clone();
    if let Some(p) = a.preset {
        s.preset = p;
    }
    s.channels = a.channels.unwrap_or(s.channels);
    s.block_len = a.block_len.unwrap_or(s.block_len);
    s.jitter = a.jitter.unwrap_or(s.jitter);
    s.n_train = a.n_train.unwrap_or(s.n_train);
    s.n_val = a.n_val.unwrap_or(s.n_val);
    s.n_test = a.n_test.unwrap_or(s.n_test);
    if a.smoothing.is_some() {
        s.temporal_smoothing = a.smoothing;
    }
    let mut template = match (&s.template, s.preset.as_str()) {
        (Some(t), _) => t.clone(),
        (None, "task") => task_template(s.channels, s.block_len, s.template_seed)?,
        (None, "rest") => rest_template(s.channels, s.block_len, s.template_seed)?,
        (None, other) => return Err(invalid(format!("unknown synth preset '{other}'"))),
    };
    if s.temporal_smoothing.is_some() {
        template.temporal_smoothing = s.temporal_smoothing;
    }
    let seed = cfg.seed.unwrap_or(0);
    let bench = make_benchmark(s.n_train, s.n_val, s.n_test, &template, s.jitter, seed)?;
    prepare_out(&a.common.out)?;
    write_benchmark(&a.common.out, &bench)?;
    info!(
        "wrote {} subjects to {}",
        bench.subjects().count(),
        a.common.out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut section = cfg.train.clone();
    if let Some(p) = a.model_preset {
        section.model_preset = p;
        section.hidden_dims = None;
    }
    if a.hidden.is_some() {
        section.hidden_dims = a.hidden;
    }
    let opt = &mut section.optimizer;
    opt.epochs = a.epochs.unwrap_or(opt.epochs);
    opt.learning_rate = a.learning_rate.unwrap_or(opt.learning_rate);
    opt.bptt_window = a.bptt_window.unwrap_or(opt.bptt_window);
    opt.batch_size = a.batch_size.unwrap_or(opt.batch_size);
    opt.validate()?;
    let shape = section.shape()?;

    let data: Vec<TimeCourses> = load_split(&a.data, a.split.to_split())?
        .into_iter()
        .map(|(u, _)| u)
        .collect();
    if data.is_empty() {
        return Err(invalid("no subjects in the requested split"));
    }
    info!(
        "training {:?} on {} sequences for {} epochs",
        shape.hidden_dims,
        data.len(),
        section.optimizer.epochs
    );
    let outcome = train(&data, &shape, &section.optimizer)?;

    prepare_out(&a.common.out)?;
    save_model(&outcome.model, &a.common.out.join("model.json"))?;
    let mut curve = String::from("epoch,loss\n");
    for (i, l) in outcome.loss_curve.iter().enumerate() {
        writeln!(curve, "{},{l:?}", i + 1).expect("write to string");
    }
    write_atomic(&a.common.out.join("loss_curve.csv"), curve.as_bytes())?;
    if let Some(last) = outcome.loss_curve.last() {
        info!("final training loss {last:.6}");
    }
    Ok(())
}

/// Input sequences for `detect`: a benchmark split or standalone CSV files.
fn detect_inputs(a: &DetectArgs) -> Result<Vec<TimeCourses>> {
    match (&a.data, a.input.is_empty()) {
        (Some(dir), true) => Ok(load_split(dir, a.split.to_split())?
            .into_iter()
            .map(|(u, _)| u)
            .collect()),
        (None, false) => a.input.iter().map(|p| read_standalone(p)).collect(),
        _ => Err(invalid("detect needs either --data or --input")),
    }
}

fn read_standalone(path: &Path) -> Result<TimeCourses> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    check_subject_id(&id)?;
    TimeCourses::read_csv(id, path)
}

fn detect(a: DetectArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let det = detection_config(&cfg, &a.detection)?;
    let model = load_model(&a.model)?;
    let inputs = detect_inputs(&a)?;
    if inputs.is_empty() {
        return Err(invalid("no subjects to run detection on"));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = inputs.iter().find(|u| !seen.insert(u.subject_id())) {
        return Err(invalid(format!(
            "duplicate subject id {}",
            dup.subject_id()
        )));
    }
    let reports = inputs
        .iter()
        .map(|u| run_detection(u, &model, &det))
        .collect::<Result<Vec<_>>>()?;

    prepare_out(&a.common.out)?;
    let mut table = String::from("subject_id,change_point\n");
    for r in &reports {
        write_json(&a.common.out.join(format!("{}.json", r.subject_id)), r)?;
        for c in &r.change_points {
            writeln!(table, "{},{c}", r.subject_id).expect("write to string");
        }
        info!("{}: {} change points", r.subject_id, r.change_points.len());
    }
    write_atomic(&a.common.out.join("detections.csv"), table.as_bytes())
}

/// Reports in `dir` for manifest subjects of `split`, in subject-id order.
fn matching_reports(
    reports: &Path,
    data: &Path,
    split: Option<Split>,
) -> Result<Vec<(ChangePointReport, Vec<usize>)>> {
    let manifest = read_manifest(data)?;
    let mut out = Vec::new();
    for (id, entry) in manifest {
        if split.is_some_and(|s| s != entry.split) {
            continue;
        }
        let path = reports.join(format!("{id}.json"));
        if !path.is_file() {
            continue;
        }
        let report = ChangePointReport::read(&path)?;
        if report.subject_id != id {
            return Err(Error::Parse(format!(
                "{} holds subject {}",
                path.display(),
                report.subject_id
            )));
        }
        if entry
            .ground_truth_cps
            .last()
            .is_some_and(|&c| c > report.scan_len())
        {
            return Err(Error::Parse(format!(
                "ground truth of {id} exceeds the report's {} time points",
                report.scan_len()
            )));
        }
        out.push((report, entry.ground_truth_cps));
    }
    if out.is_empty() {
        return Err(invalid(format!(
            "no report in {} matches a subject of the manifest",
            reports.display()
        )));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SubjectEval {
    subject_id: String,
    lag_samples: i64,
    /// Ground-truth change points after the lag, clamped to the scan.
    lagged_ground_truth: Vec<usize>,
    clamped: Vec<bool>,
    /// `None` when the detector produced no change point.
    result: Option<EvalResult>,
}

#[derive(Serialize)]
struct EvalSummary {
    n_subjects: usize,
    n_failed: usize,
    lag_samples: i64,
    /// Means over subjects with at least one detection; `None` if there are none.
    mean_error_sen: Option<f64>,
    mean_error_spec: Option<f64>,
}

fn eval(a: EvalArgs) -> Result<()> {
    let reports_dir = a
        .reports
        .as_ref()
        .ok_or_else(|| invalid("eval needs --reports"))?;
    let lag = match (a.lag_samples, a.lag_seconds) {
        (Some(l), _) => l,
        (None, Some(s)) => lag_seconds_to_samples(s, a.tr.unwrap_or(f64::NAN))?,
        (None, None) => 0,
    };
    let pairs = matching_reports(reports_dir, &a.data, a.split.and_then(|s| s.to_split()))?;

    let mut evals = Vec::with_capacity(pairs.len());
    for (report, truth) in &pairs {
        let lagged = apply_lag(truth, lag, report.scan_len());
        let result = match detection_errors(&lagged.indices, &report.change_points) {
            Ok(r) => Some(r),
            Err(Error::NoDetections) => {
                warn!("{}: no change points detected", report.subject_id);
                None
            }
            Err(e) => return Err(e),
        };
        evals.push(SubjectEval {
            subject_id: report.subject_id.clone(),
            lag_samples: lag,
            lagged_ground_truth: lagged.indices,
            clamped: lagged.clamped,
            result,
        });
    }
    let scored: Vec<&EvalResult> = evals.iter().filter_map(|e| e.result.as_ref()).collect();
    let mean = |f: fn(&EvalResult) -> f64| {
        (!scored.is_empty()).then(|| scored.iter().map(|r| f(r)).sum::<f64>() / scored.len() as f64)
    };
    let summary = EvalSummary {
        n_subjects: evals.len(),
        n_failed: evals.len() - scored.len(),
        lag_samples: lag,
        mean_error_sen: mean(|r| r.error_sen),
        mean_error_spec: mean(|r| r.error_spec),
    };

    prepare_out(&a.common.out)?;
    for e in &evals {
        write_json(&a.common.out.join(format!("{}.eval.json", e.subject_id)), e)?;
    }
    write_json(&a.common.out.join("summary.json"), &summary)?;
    info!(
        "{} subjects, {} without detections, mean error_sen {:?}, error_spec {:?}",
        summary.n_subjects, summary.n_failed, summary.mean_error_sen, summary.mean_error_spec
    );
    Ok(())
}

fn sweep(a: EvalArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let base = detection_config(&cfg, &a.detection)?;
    let lambdas = a.lambdas.clone().unwrap_or(cfg.sweep.lambdas.clone());
    let sigmas = a.sigmas.clone().unwrap_or(cfg.sweep.sigmas.clone());
    let model_path = a
        .model
        .as_ref()
        .ok_or_else(|| invalid("sweep needs --model"))?;
    let model = load_model(model_path)?;
    let split = a.split.unwrap_or(super::SplitArg::Val).to_split();
    let validation = load_split(&a.data, split)?;
    if validation.is_empty() {
        return Err(invalid("no subjects in the requested split"));
    }
    let rows = parameter_sweep(&validation, &model, &lambdas, &sigmas, &base)?;
    let best: Option<SweepRow> = select_best(&rows).cloned();

    prepare_out(&a.common.out)?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    write_atomic(&a.common.out.join("sweep.csv"), &csv)?;
    write_json(&a.common.out.join("best.json"), &best)?;
    match &best {
        Some(b) => info!(
            "best lambda {} sigma {}: error_sen {:.3}, error_spec {:.3}",
            b.lambda, b.sigma, b.error_sen, b.error_spec
        ),
        None => warn!("no (lambda, sigma) produced detections on any subject"),
    }
    Ok(())
}

fn covtest(a: CovtestArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut opts: CovTestOptions = cfg.covtest.clone();
    if let Some(m) = a.method {
        opts.method = m.into();
    }
    opts.permutations = a.permutations.unwrap_or(opts.permutations);

    // (series, change points) per subject.
    let jobs: Vec<(TimeCourses, Vec<usize>)> = match (&a.reports, &a.input) {
        (Some(reports), None) => {
            let data = a
                .data
                .as_ref()
                .ok_or_else(|| invalid("--reports needs --data"))?;
            matching_reports(reports, data, None)?
                .into_iter()
                .map(|(r, _)| {
                    let path: PathBuf = data.join(format!("{}.csv", r.subject_id));
                    let u = TimeCourses::read_csv(r.subject_id.clone(), &path)?;
                    if u.len() != r.scan_len() {
                        return Err(Error::Parse(format!(
                            "{}: report covers {} time points, data has {}",
                            r.subject_id,
                            r.scan_len(),
                            u.len()
                        )));
                    }
                    Ok((u, r.change_points))
                })
                .collect::<Result<_>>()?
        }
        (None, Some(input)) => {
            let cps = a
                .cps
                .clone()
                .ok_or_else(|| invalid("--input needs --cps"))?;
            vec![(read_standalone(input)?, cps)]
        }
        _ => {
            return Err(invalid(
                "covtest needs either --reports with --data, or --input with --cps",
            ))
        }
    };

    let mut results: Vec<(String, Vec<SegmentPairTest>)> = Vec::with_capacity(jobs.len());
    for (i, (u, cps)) in jobs.iter().enumerate() {
        let subject_opts = CovTestOptions {
            seed: derive_seed(opts.seed, i as u64),
            ..opts.clone()
        };
        let tests = test_adjacent_segments(u, cps, &subject_opts)?;
        if tests.is_empty() {
            warn!("{}: fewer than two testable segments", u.subject_id());
        }
        results.push((u.subject_id().to_string(), tests));
    }

    prepare_out(&a.common.out)?;
    for (id, tests) in &results {
        write_json(&a.common.out.join(format!("{id}.covtest.json")), tests)?;
        let rejected = tests.iter().filter(|t| t.result.p_value < 0.05).count();
        info!(
            "{id}: {rejected}/{} adjacent pairs differ at p < 0.05",
            tests.len()
        );
    }
    Ok(())
}
