// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use statetrace::cli::RunConfig;
use statetrace::detector::{run_detection, ChangePointReport, DetectionConfig};
use statetrace::forecaster::load_model;
use statetrace::synth::{load_split, task_template, BenchmarkTemplate, Block, Paradigm, Split};

fn statetrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_statetrace"))
        .args(args)
        .env("STATETRACE_LOG", "warn")
        .output()
        .expect("spawn statetrace")
}

fn ok(args: &[&str]) {
    let out = statetrace(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir` with its bytes.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Three blocks alternating between two states.
fn three_block_config() -> RunConfig {
    let base = task_template(3, 40, 2).unwrap();
    let states = base.states[..2].to_vec();
    let block = |i: usize| Block {
        label: states[i].label.clone(),
        duration: 40,
    };
    let mut cfg = RunConfig {
        seed: Some(5),
        ..RunConfig::default()
    };
    cfg.synth.template = Some(BenchmarkTemplate {
        paradigm: Paradigm::new(vec![block(0), block(1), block(0)]).unwrap(),
        states,
        temporal_smoothing: None,
    });
    cfg.synth.jitter = 3;
    cfg.synth.n_train = 4;
    cfg.synth.n_val = 2;
    cfg.synth.n_test = 2;
    cfg.train.hidden_dims = Some(vec![6]);
    cfg.train.optimizer.epochs = 4;
    cfg
}

#[test]
fn unknown_flag_is_a_usage_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = statetrace(&["synth", "--out", s(&out), "--no-such-flag"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());

    let res = statetrace(&["frobnicate"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn bad_data_is_a_data_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = statetrace(&[
        "train",
        "--data",
        s(&tmp.path().join("missing")),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());

    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"detection": {"lambda": -1.0}}"#).unwrap();
    let csv = tmp.path().join("subj.csv");
    fs::write(&csv, "1,2\n3,4\n5,6\n").unwrap();
    let res = statetrace(&[
        "detect",
        "--config",
        s(&bad_cfg),
        "--model",
        s(&tmp.path().join("nope.json")),
        "--input",
        s(&csv),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn full_pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg_path = root.join("config.json");
    fs::write(
        &cfg_path,
        serde_json::to_string(&three_block_config()).unwrap(),
    )
    .unwrap();
    let (data, model_dir, reports, eval) = (
        root.join("data"),
        root.join("model"),
        root.join("reports"),
        root.join("eval"),
    );

    ok(&["synth", "--config", s(&cfg_path), "--out", s(&data)]);
    let data_before = snapshot(&data);
    assert!(data_before.contains_key(Path::new("manifest.json")));

    ok(&[
        "train",
        "--config",
        s(&cfg_path),
        "--data",
        s(&data),
        "--out",
        s(&model_dir),
    ]);
    let model_path = model_dir.join("model.json");
    let curve = fs::read_to_string(model_dir.join("loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 5);

    ok(&[
        "detect",
        "--model",
        s(&model_path),
        "--data",
        s(&data),
        "--out",
        s(&reports),
    ]);
    let table = fs::read_to_string(reports.join("detections.csv")).unwrap();
    assert!(table.starts_with("subject_id,change_point\n"));

    ok(&[
        "eval",
        "--data",
        s(&data),
        "--reports",
        s(&reports),
        "--out",
        s(&eval),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_subjects"], 2);
    for key in ["mean_error_sen", "mean_error_spec"] {
        let v = &summary[key];
        assert!(v.is_null() || v.as_f64().unwrap().is_finite(), "{key}: {v}");
    }

    let sweep = root.join("sweep");
    ok(&[
        "eval",
        "--sweep",
        "--model",
        s(&model_path),
        "--data",
        s(&data),
        "--lambdas",
        "0,1",
        "--sigmas",
        "2,6",
        "--out",
        s(&sweep),
    ]);
    let rows = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(sweep.join("best.json").exists());

    let cov = root.join("cov");
    ok(&[
        "covtest",
        "--reports",
        s(&reports),
        "--data",
        s(&data),
        "--method",
        "asymptotic",
        "--out",
        s(&cov),
    ]);

    // Nothing upstream was touched by later stages.
    assert_eq!(snapshot(&data), data_before);

    // Defaults of `detect` are the task preset.
    let model = load_model(&model_path).unwrap();
    for (u, _) in load_split(&data, Some(Split::Test)).unwrap() {
        let text = fs::read_to_string(reports.join(format!("{}.json", u.subject_id()))).unwrap();
        let report = ChangePointReport::from_json(&text).unwrap();
        assert_eq!(
            report,
            run_detection(&u, &model, &DetectionConfig::task()).unwrap()
        );
    }
}

#[test]
fn detect_on_standalone_files_keeps_them_intact() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg_path = root.join("config.json");
    let mut cfg = three_block_config();
    cfg.train.optimizer.epochs = 1;
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let data = root.join("data");
    ok(&["synth", "--config", s(&cfg_path), "--out", s(&data)]);
    ok(&[
        "train",
        "--config",
        s(&cfg_path),
        "--data",
        s(&data),
        "--out",
        s(&root.join("m")),
    ]);

    let inputs = root.join("inputs");
    fs::create_dir(&inputs).unwrap();
    for id in ["alpha", "beta"] {
        fs::copy(data.join("test-000.csv"), inputs.join(format!("{id}.csv"))).unwrap();
    }
    let before = snapshot(&inputs);
    let out = root.join("r");
    ok(&[
        "detect",
        "--model",
        s(&root.join("m").join("model.json")),
        "--preset",
        "rest",
        "--input",
        s(&inputs.join("alpha.csv")),
        s(&inputs.join("beta.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(snapshot(&inputs), before);
    assert!(out.join("alpha.json").exists() && out.join("beta.json").exists());
}
