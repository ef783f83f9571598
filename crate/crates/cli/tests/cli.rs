use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphomotor"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic cohort plus its extracted feature matrix.
fn cohort(dir: &Path, per_group: usize) -> PathBuf {
    let data = dir.join("data");
    let n = per_group.to_string();
    ok(&["synth", "-o", s(&data), "--n-intact", &n, "--n-dd", &n, "--seed", "7"]);
    ok(&["extract", s(&data), "-o", s(dir)]);
    dir.join("features.csv")
}

/// Runs `args` twice into the same directory and checks that `files` come
/// out byte-identical.
fn assert_rerun_identical(runs: &[Vec<&str>], dir: &Path, files: &[&str]) {
    let snapshot = || -> Vec<Vec<u8>> {
        for args in runs {
            ok(args);
        }
        files.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
    };
    let first = snapshot();
    let second = snapshot();
    for ((a, b), name) in first.iter().zip(&second).zip(files) {
        assert!(a == b, "{name} differs between runs");
    }
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn extract_single_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "-o", s(&data), "--n-intact", "1", "--n-dd", "1"]);
    let out = tmp.path().join("out");
    ok(&["extract", s(&data.join("S0002.svc")), "-o", s(&out)]);
    let lines = data_lines(&out.join("features.csv"));
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("S0002,"));
    let first = std::fs::read_to_string(out.join("features.csv")).unwrap();
    assert!(first.starts_with("# graphomotor "), "provenance comment");
    assert!(first.lines().next().unwrap().contains("run_config="));
    for name in ["catalog.json", "validation.json"] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(name)).unwrap()).unwrap();
        assert_eq!(v["toolkit"], "graphomotor");
    }
}

#[test]
fn extract_directory_rows_are_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    let matrix = cohort(tmp.path(), 3);
    let ids: Vec<String> = data_lines(&matrix)[1..].iter().map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(ids, ["S0001", "S0002", "S0003", "S0004", "S0005", "S0006"]);
}

#[test]
fn corrupt_file_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "-o", s(&data), "--n-intact", "2", "--n-dd", "1"]);
    std::fs::write(data.join("S0002.svc"), "3\n1 2 x\n").unwrap();

    let strict = run(&["extract", s(&data), "-o", s(&tmp.path().join("a"))]);
    assert_eq!(code(&strict), 3);
    assert!(!tmp.path().join("a/features.csv").exists());

    let lenient = run(&["extract", s(&data), "-o", s(&tmp.path().join("b")), "--keep-going"]);
    assert_eq!(code(&lenient), 7);
    let lines = data_lines(&tmp.path().join("b/features.csv"));
    assert_eq!(lines.len(), 3);
    let validation = std::fs::read_to_string(tmp.path().join("b/validation.json")).unwrap();
    assert!(validation.contains("parse_error"));
}

#[test]
fn usage_and_missing_input_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["extract"])), 2);
    assert_eq!(code(&run(&["bogus"])), 2);
    let missing = tmp.path().join("nope.svc");
    assert_eq!(code(&run(&["extract", s(&missing), "-o", s(tmp.path())])), 6);
    let garbage = tmp.path().join("m.csv");
    std::fs::write(&garbage, "not,a\nmatrix\n").unwrap();
    assert_eq!(code(&run(&["analyze", s(&garbage), "-o", s(tmp.path())])), 3);
}

#[test]
fn analyze_ranks_injected_effect_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "-o", s(&data)]);
    ok(&["extract", s(&data), "-o", s(tmp.path())]);
    let matrix = tmp.path().join("features.csv");

    let a = tmp.path().join("a");
    assert_rerun_identical(
        &[vec!["analyze", s(&matrix), "-o", s(&a)]],
        &a,
        &["analysis_diagnosis.csv", "analysis_total.json", "analysis_top.csv"],
    );

    let top: Vec<String> = data_lines(&a.join("analysis_top.csv"))
        .into_iter()
        .filter(|l| l.starts_with("diagnosis,"))
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect();
    assert_eq!(top.len(), 5);
    assert!(top.iter().any(|f| f == "duration_writing:in_air:none"), "{top:?}");
}

#[test]
fn alpha_flag_and_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let matrix = cohort(tmp.path(), 10);
    let read = |dir: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.join("analysis_diagnosis.json")).unwrap()).unwrap()
    };

    let flag = tmp.path().join("flag");
    ok(&["analyze", s(&matrix), "-o", s(&flag), "--target", "diagnosis", "--alpha", "0.01"]);
    let v = read(&flag);
    assert_eq!(v["alpha"], 0.01);
    assert_eq!(v["run_config"]["stats"]["alpha"], 0.01);
    assert!(!flag.join("analysis_total.json").exists());

    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "[stats]\nalpha = 0.2\ntargets = [\"diagnosis\"]\n").unwrap();
    let file = tmp.path().join("file");
    ok(&["analyze", s(&matrix), "-o", s(&file), "--config", s(&config)]);
    assert_eq!(read(&file)["alpha"], 0.2);

    let both = tmp.path().join("both");
    ok(&["analyze", s(&matrix), "-o", s(&both), "--config", s(&config), "--alpha", "0.1"]);
    assert_eq!(read(&both)["alpha"], 0.1);

    assert_eq!(code(&run(&["analyze", s(&matrix), "-o", s(&both), "--alpha", "1.5"])), 2);
    std::fs::write(&config, "[stats]\nnot_a_field = 1\n").unwrap();
    assert_eq!(code(&run(&["analyze", s(&matrix), "-o", s(&both), "--config", s(&config)])), 2);
}

#[test]
fn train_evaluate_explain_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let matrix = cohort(tmp.path(), 12);
    let dir = tmp.path().join("a");
    let model = dir.join("model_diagnosis.json");
    let cv = ["--folds", "3", "--repeats", "2", "--seed", "11"];
    let mut train = vec!["train", s(&matrix), "-o", s(&dir), "--n-iter", "4"];
    train.extend(cv);
    let mut evaluate = vec!["evaluate", s(&matrix), "--model", s(&model), "-o", s(&dir)];
    evaluate.extend(cv);
    let explain = vec!["explain", s(&matrix), "--model", s(&model), "-o", s(&dir), "--top-k", "3"];
    assert_rerun_identical(
        &[train, evaluate, explain],
        &dir,
        &[
            "model_diagnosis.json",
            "eval_diagnosis.json",
            "eval_diagnosis.csv",
            "search_diagnosis.json",
            "evaluation_diagnosis.json",
            "predictions_diagnosis.csv",
            "shap_diagnosis.csv",
            "shap_top_diagnosis.csv",
            "importance_diagnosis.json",
        ],
    );
    let runs = [dir];

    let single = tmp.path().join("single");
    ok(&["train", s(&matrix), "-o", s(&single), "--n-iter", "4", "-j", "1", "--folds", "3", "--repeats", "2", "--seed", "11"]);
    let body = |p: PathBuf| -> serde_json::Value {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["model"].clone()
    };
    assert!(body(single.join("model_diagnosis.json")) == body(runs[0].join("model_diagnosis.json")), "thread count changed the model");
    // the stored configuration reproduces the search's cross-validation
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(runs[0].join("eval_diagnosis.json")).unwrap()).unwrap();
    let again: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(runs[0].join("evaluation_diagnosis.json")).unwrap()).unwrap();
    assert_eq!(eval["report"]["classification"], again["report"]["classification"]);
    assert_eq!(data_lines(&runs[0].join("predictions_diagnosis.csv")).len(), 25);

    let report = ok(&["report", s(&runs[0])]);
    let md = String::from_utf8(report.stdout).unwrap();
    assert!(md.contains("## Performance: diagnosis"));
    assert!(md.contains("## SHAP importance: diagnosis"));

    let bad_model = tmp.path().join("bad.json");
    std::fs::write(&bad_model, "{\"target\": \"diagnosis\", \"model\": {}}").unwrap();
    assert_eq!(code(&run(&["explain", s(&matrix), "--model", s(&bad_model), "-o", s(tmp.path())])), 3);
}

#[test]
fn regression_target_trains() {
    let tmp = tempfile::tempdir().unwrap();
    let matrix = cohort(tmp.path(), 12);
    let dir = tmp.path().join("t");
    ok(&["train", s(&matrix), "-o", s(&dir), "--target", "total", "--n-iter", "2", "--folds", "3", "--repeats", "1"]);
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("eval_total.json")).unwrap()).unwrap();
    assert!(eval["report"]["regression"]["eer"]["mean"].as_f64().unwrap() >= 0.0);
    assert_eq!(code(&run(&["train", s(&matrix), "-o", s(&dir), "--target", "nonsense"])), 2);
}

#[test]
fn synth_writes_manifest_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    ok(&["synth", "-o", s(&data), "--n-intact", "2", "--n-dd", "3", "--null"]);
    let truth = data_lines(&data.join("truth.csv"));
    assert_eq!(truth.len(), 6);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("synth.json")).unwrap()).unwrap();
    assert_eq!(manifest["run_config"]["synth"]["factors"]["in_air_duration"], 1.0);
    assert_eq!(manifest["truth"].as_array().unwrap().len(), 5);
    assert_eq!(code(&run(&["synth", "-o", s(&data), "--n-dd", "0"])), 2);
}

#[test]
fn default_cohort_reaches_reference_performance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "-o", s(&data)]);
    ok(&["extract", s(&data), "-o", s(tmp.path())]);
    let matrix = tmp.path().join("features.csv");
    let metric = |file: &str, path: [&str; 3]| -> f64 {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(file)).unwrap()).unwrap();
        v["report"][path[0]][path[1]][path[2]].as_f64().unwrap()
    };

    ok(&["train", s(&matrix), "-o", s(tmp.path()), "--n-iter", "25", "--seed", "7"]);
    let bacc = metric("eval_diagnosis.json", ["classification", "bacc", "mean"]);
    assert!(bacc >= 0.9, "BACC {bacc}");

    ok(&["train", s(&matrix), "-o", s(tmp.path()), "--target", "total", "--n-iter", "25", "--seed", "7"]);
    let eer = metric("eval_total.json", ["regression", "eer", "mean"]);
    assert!(eer < 15.0, "EER {eer}%");
}
