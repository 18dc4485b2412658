//! End-to-end behavior of the installed binary: exit codes, artifact
//! layout, and schema validity of every emitted JSON document.

use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_illposed-gd"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run_cmd(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn schema_validator(name: &str) -> jsonschema::Validator {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(schema: &str, artifact: &Path) {
    let validator = schema_validator(schema);
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(artifact).unwrap()).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&value)
        .map(|e| format!("{e}"))
        .collect();
    assert!(
        errors.is_empty(),
        "{} does not validate against {schema}: {errors:?}",
        artifact.display()
    );
}

#[test]
fn run_emits_artifacts_that_validate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "config.json",
        r#"{"problem": "quadratic", "noise_levels": [1e-1, 1e-2], "seeds": [1, 2],
            "condition_samples": 500}"#,
    );
    let out = dir.path().join("out");
    let result = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--gnuplot",
    ]);
    assert!(result.status.success(), "{result:?}");
    assert_valid("summary.schema.json", &out.join("summary.json"));
    assert_valid("trace.schema.json", &out.join("traces/exact.json"));
    assert_valid("trace.schema.json", &out.join("traces/noisy_d1e-1_s1.json"));
    assert_valid("trace.schema.json", &out.join("traces/noisy_d1e-2_s2.json"));
    assert!(out.join("plots.gp").exists());
    assert!(out.join("traces/exact.csv").exists());

    let csv = std::fs::read_to_string(out.join("traces/noisy_d1e-1_s1.csv")).unwrap();
    assert!(csv.starts_with("k,err,J,Jdelta,grad_norm,inner_ek\n"));
}

#[test]
fn study_and_diagnose_and_verify_artifacts_validate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "config.json",
        r#"{"problem": "scalar-quadratic",
            "noise_levels": [1e-2, 1e-3, 1e-4], "seeds": [1, 2, 3],
            "condition_samples": 800}"#,
    );
    let out = dir.path().join("out");

    let study = run_cmd(&[
        "study",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--gnuplot",
    ]);
    assert!(study.status.success(), "{study:?}");
    assert_valid("study.schema.json", &out.join("study.json"));
    assert!(out.join("study.gp").exists());

    let diagnose = run_cmd(&[
        "diagnose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(diagnose.status.success(), "{diagnose:?}");
    assert_valid("report.schema.json", &out.join("report.json"));

    let verify = run_cmd(&[
        "verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(verify.status.success(), "{verify:?}");
    assert_valid("verify.schema.json", &out.join("verify.json"));
}

#[test]
fn invalid_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        // start outside the ball
        r#"{"problem": "quadratic", "x0_offset": [9, 0, 0, 0, 0, 0, 0, 0]}"#,
        // unknown problem
        r#"{"problem": "heat-equation"}"#,
        // malformed stop rule
        r#"{"problem": "quadratic", "stop": {"kappa": 2.0}}"#,
        // not JSON at all
        "not json",
    ];
    for (index, body) in cases.iter().enumerate() {
        let config = write_config(dir.path(), &format!("bad{index}.json"), body);
        let result = run_cmd(&["run", "--config", config.to_str().unwrap()]);
        assert_eq!(
            result.status.code(),
            Some(2),
            "case {index}: {}",
            String::from_utf8_lossy(&result.stderr)
        );
    }

    // a study over a single noise level cannot assess a trend
    let config = write_config(
        dir.path(),
        "single_level.json",
        r#"{"problem": "quadratic", "noise_levels": [1e-2]}"#,
    );
    let result = run_cmd(&["study", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));

    // diagnose with zero samples is a validation error
    let config = write_config(
        dir.path(),
        "zero_samples.json",
        r#"{"problem": "quadratic", "condition_samples": 0}"#,
    );
    let result = run_cmd(&["diagnose", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn x0_outside_ball_message_names_the_start_condition() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "outside.json",
        r#"{"problem": "quadratic", "x0_offset": [9, 0, 0, 0, 0, 0, 0, 0]}"#,
    );
    let result = run_cmd(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(
        stderr.contains("start-quality") && stderr.contains("rho^2"),
        "stderr: {stderr}"
    );
}

#[test]
fn fault_fixture_exits_one_and_names_the_lemma() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fault.json",
        r#"{"problem": "quadratic", "noise_levels": [1e-2], "seeds": [1],
            "fault_injection": "summability"}"#,
    );
    let out = dir.path().join("out");
    let result = run_cmd(&[
        "verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("summability"), "stdout: {stdout}");
    assert_valid("verify.schema.json", &out.join("verify.json"));
}

#[test]
fn oversized_noise_is_refused_but_exits_zero() {
    // at this level the declared noisy Lipschitz constant reaches 1, so the
    // cell is refused rather than run; that is a flagged outcome, not an
    // error exit
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "large_noise.json",
        r#"{"problem": "scalar-quadratic", "noise_levels": [2e-1], "seeds": [1]}"#,
    );
    let out = dir.path().join("out");
    let result = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    assert_valid("summary.schema.json", &out.join("summary.json"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(
        summary["cells"][0]["refused"].is_string(),
        "expected a refusal marker, got {}",
        summary["cells"][0]
    );
}

#[test]
fn diagnose_on_autoconvolution_is_exploratory() {
    // witnesses may or may not appear for this problem; either way the
    // report is written, validates, and the exit is zero
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "autoconv.json",
        r#"{"problem": {"name": "autoconv", "grid_size": 16},
            "condition_samples": 1000}"#,
    );
    let out = dir.path().join("out");
    let result = run_cmd(&[
        "diagnose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    assert_valid("report.schema.json", &out.join("report.json"));
}

#[test]
fn verify_with_refused_noise_still_runs_exact_checks() {
    // oversized noise level: the noisy cell is refused (declared Lipschitz
    // constant at 1), the exact-trace checks still run and pass
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "refused.json",
        r#"{"problem": "scalar-quadratic", "noise_levels": [2e-1], "seeds": [1]}"#,
    );
    let out = dir.path().join("out");
    let result = run_cmd(&[
        "verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let checks: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    let checks = checks.as_array().unwrap();
    let exact: Vec<_> = checks.iter().filter(|c| c["scope"] == "exact").collect();
    assert_eq!(exact.len(), 3);
    assert!(exact.iter().all(|c| c["status"] == "passed"));
    assert!(checks.iter().all(|c| c["scope"] == "exact"));
}

#[test]
fn zero_iteration_cells_record_the_start_error() {
    // noise large enough that the cap clause yields a zero stopping index,
    // yet small enough that the run is not refused: the row is flagged and
    // the final error is the start error
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "zero_iter.json",
        r#"{"problem": "scalar-quadratic", "noise_levels": [6e-2], "seeds": [1]}"#,
    );
    let out = dir.path().join("out");
    let result = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let cell = &summary["cells"][0];
    assert_eq!(cell["zero_iterations"], true, "cell: {cell}");
    assert_eq!(cell["stop_index"], 0);
    // default offset is half the radius 0.1
    let final_error = cell["final_error"].as_f64().unwrap();
    assert!((final_error - 0.05).abs() < 1e-12, "final error {final_error}");
}

#[test]
fn repeated_binary_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "config.json",
        r#"{"problem": "quadratic", "noise_levels": [1e-2], "seeds": [7],
            "condition_samples": 300}"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, workers) in [(&out_a, "1"), (&out_b, "3")] {
        let result = run_cmd(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(result.status.success());
    }
    let summary_a = std::fs::read(out_a.join("summary.json")).unwrap();
    let summary_b = std::fs::read(out_b.join("summary.json")).unwrap();
    assert_eq!(summary_a, summary_b);
    let trace_a = std::fs::read(out_a.join("traces/noisy_d1e-2_s7.csv")).unwrap();
    let trace_b = std::fs::read(out_b.join("traces/noisy_d1e-2_s7.csv")).unwrap();
    assert_eq!(trace_a, trace_b);
}
