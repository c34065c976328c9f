//! End-to-end checks of the `camdp` binary: command output, file layout,
//! exit codes, and rerun determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_camdp")
}

/// Per-test scratch directory, removed on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("camdp-cli-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn arg(&self) -> &str {
        self.0.to_str().unwrap()
    }

    fn read(&self, name: &str) -> String {
        let path = self.0.join(name);
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn exit(output: &Output) -> i32 {
    output.status.code().expect("process exited")
}

/// Parse one JSONL line and pull out a numeric field by dotted path.
fn number(line: &str, path: &str) -> f64 {
    let mut value: serde_json::Value = serde_json::from_str(line).unwrap();
    for key in path.split('.') {
        value = value[key].take();
    }
    value
        .as_f64()
        .unwrap_or_else(|| panic!("no number at {path} in {line}"))
}

#[test]
fn case_study_reports_golden_values_and_persists_records() {
    let dir = Scratch::new("case-study");
    let out = run(&["case-study", "--count", "5", "--out", dir.arg()]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("matrix max 9.988937"), "stdout: {text}");
    assert!(text.contains("value 9.810983"), "stdout: {text}");
    assert!(text.contains("([1,1,0,0],[1,0,0,0])"), "stdout: {text}");

    let records = dir.read("case-study.jsonl");
    let lines: Vec<&str> = records.lines().collect();
    assert!(lines[0].contains("\"record\":\"value-matrix-summary\""));
    assert!(
        lines[0].contains("\"command\":\"case-study\""),
        "config embedded"
    );
    assert!(
        lines[0].contains("\"gamma\":0.98"),
        "default discount recorded"
    );
    assert_eq!(
        records.matches("\"record\":\"exploration-run\"").count(),
        5,
        "one record per seed"
    );
    assert!(lines
        .last()
        .unwrap()
        .contains("\"record\":\"exploration-summary\""));
}

#[test]
fn enumerate_writes_value_matrix_csv() {
    let dir = Scratch::new("enumerate");
    let out = run(&[
        "enumerate",
        "--fixture",
        "paper-case-study",
        "--gamma",
        "0.98",
        "--format",
        "csv",
        "--out",
        dir.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    let csv = dir.read("value-matrix.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 18, "config comment + header + 16 policy rows");
    assert!(lines[0].starts_with("# config {"));
    assert!(lines[1].starts_with("pi0\\pi1,0000,"));
    assert!(csv.contains("9.988937333283"), "matrix maximum present");
}

#[test]
fn conditions_reports_fixture_flags_and_basin() {
    let dir = Scratch::new("conditions");
    let out = run(&[
        "conditions",
        "--fixture",
        "paper-case-study",
        "--gamma",
        "0.98",
        "--out",
        dir.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("cond1=false cond2=true"), "stdout: {text}");
    let record = dir.read("conditions.jsonl");
    assert!(record.contains("\"([0,1,0,0],[0,0,0,0])\":176"));
    assert!(record.contains("\"([1,1,0,0],[1,0,0,0])\":336"));
    assert!(record.contains("\"ne_bound\":3"));
}

#[test]
fn solve_converges_on_the_fixture() {
    let dir = Scratch::new("solve");
    let out = run(&[
        "solve",
        "--fixture",
        "paper-case-study",
        "--gamma",
        "0.98",
        "--out",
        dir.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("outcome converged"));
    let records = dir.read("solve.jsonl");
    assert!(records.contains("\"outcome\":\"converged\""));
    assert!(records.contains("\"record\":\"step\""));
    let scalar = number(records.lines().next().unwrap(), "scalar_value");
    assert!((scalar - 9.988937333283168).abs() < 1e-9, "scalar {scalar}");
}

#[test]
fn solve_exits_three_and_persists_partial_policies_when_improvement_cycles() {
    let dir = Scratch::new("solve-cycle");
    let out = run(&["solve", "--generate", "--seed", "36", "--out", dir.arg()]);
    assert_eq!(exit(&out), 3, "stderr: {}", stderr(&out));
    let records = dir.read("solve.jsonl");
    assert!(records.contains("\"outcome\":\"non-convergence\""));
    assert!(records.contains("\"visited\""));
}

#[test]
fn reduce_preset_matches_constrained_optimum() {
    let dir = Scratch::new("reduce");
    let out = run(&[
        "reduce",
        "--fixture",
        "paper-case-study",
        "--gamma",
        "0.98",
        "--preset",
        "ss-only",
        "--out",
        dir.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("16→4 policies"), "stdout: {text}");
    let record = dir.read("reduction.jsonl");
    let reduced = number(&record, "report.best_reduced");
    let original = number(&record, "report.best_original");
    assert!(
        (reduced - 9.045940434359343).abs() < 1e-9,
        "reduced {reduced}"
    );
    assert!(
        (original - 9.988937333283168).abs() < 1e-9,
        "original {original}"
    );
}

#[test]
fn generate_is_deterministic_and_models_load_back() {
    let first = Scratch::new("generate-a");
    let second = Scratch::new("generate-b");
    for dir in [&first, &second] {
        let out = run(&[
            "generate",
            "--count",
            "2",
            "--seed",
            "9",
            "--out",
            dir.arg(),
        ]);
        assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    }
    assert_eq!(first.read("model-9.json"), second.read("model-9.json"));
    assert_eq!(first.read("model-10.json"), second.read("model-10.json"));
    assert_eq!(first.read("generate.jsonl"), second.read("generate.jsonl"));

    let model_path = first.0.join("model-9.json");
    let out = run(&[
        "conditions",
        "--model",
        model_path.to_str().unwrap(),
        "--out",
        first.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn mc_conditions_reruns_are_byte_identical() {
    let first = Scratch::new("mc-a");
    let second = Scratch::new("mc-b");
    for dir in [&first, &second] {
        let out = run(&["mc-conditions", "--count", "5", "--out", dir.arg()]);
        assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
        assert!(stdout(&out).contains("implication violations=0"));
    }
    assert_eq!(
        first.read("mc-conditions.jsonl"),
        second.read("mc-conditions.jsonl")
    );
}

#[test]
fn unknown_fixture_is_a_usage_error() {
    let dir = Scratch::new("unknown-fixture");
    let out = run(&[
        "conditions",
        "--fixture",
        "no-such-thing",
        "--out",
        dir.arg(),
    ]);
    assert_eq!(exit(&out), 2);
    assert!(
        stderr(&out).contains("paper-case-study"),
        "names the fixture"
    );
}

#[test]
fn missing_model_file_is_an_io_error() {
    let dir = Scratch::new("missing-model");
    let out = run(&[
        "solve",
        "--model",
        "/definitely/not/here.json",
        "--out",
        dir.arg(),
    ]);
    assert_eq!(exit(&out), 4);
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = Scratch::new("env-out");
    let out = Command::new(bin())
        .args([
            "conditions",
            "--fixture",
            "paper-case-study",
            "--gamma",
            "0.98",
        ])
        .env("CAMDP_OUT_DIR", &dir.0)
        .output()
        .unwrap();
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    assert!(dir.0.join("conditions.jsonl").exists());
}

#[test]
fn explicit_out_flag_overrides_env_var() {
    let env_dir = Scratch::new("env-losing");
    let flag_dir = Scratch::new("flag-winning");
    let out = Command::new(bin())
        .args([
            "conditions",
            "--fixture",
            "paper-case-study",
            "--gamma",
            "0.98",
            "--out",
            flag_dir.arg(),
        ])
        .env("CAMDP_OUT_DIR", &env_dir.0)
        .output()
        .unwrap();
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    assert!(flag_dir.0.join("conditions.jsonl").exists());
    assert!(!env_dir.0.join("conditions.jsonl").exists());
}

#[test]
fn custom_partition_matches_preset_partition() {
    // "0,1|2,3" groups pi0 cells by the first factor, i.e. the s0-only preset.
    let custom = Scratch::new("partition-custom");
    let named = Scratch::new("partition-named");
    let out = run(&[
        "reduce",
        "--fixture",
        "paper-case-study",
        "--gamma",
        "0.98",
        "--classes",
        "0,1|2,3",
        "--agent",
        "agent0",
        "--out",
        custom.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    let out = run(&[
        "reduce",
        "--fixture",
        "paper-case-study",
        "--gamma",
        "0.98",
        "--preset",
        "s0-only",
        "--out",
        named.arg(),
    ]);
    assert_eq!(exit(&out), 0, "stderr: {}", stderr(&out));
    let custom_best = number(&custom.read("reduction.jsonl"), "report.best_reduced");
    let named_best = number(&named.read("reduction.jsonl"), "report.best_reduced");
    assert_eq!(custom_best, named_best, "same partition, same optimum");
    assert!(
        (custom_best - 9.81098320537743).abs() < 1e-9,
        "best {custom_best}"
    );
}
