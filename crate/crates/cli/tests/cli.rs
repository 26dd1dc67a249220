use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hoig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoig"))
        .args(args)
        .env_remove("HOIG_OUT_DIR")
        .output()
        .expect("failed to launch hoig")
}

fn manifest_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn shipped_model() -> String {
    manifest_path("models/synthetic_polynomial.json").display().to_string()
}

fn fixture() -> String {
    manifest_path("../core/tests/data/realestate_416.csv").display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn explains_shipped_model_with_hessian_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stack.json");
    let o = hoig(&[
        "explain", "--model", &shipped_model(), "--input", "1,1,1,1,1,1,1,1",
        "--order", "2", "--method", "hessian", "--points", "50", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"hessian_formula\""));
    assert!(text.contains("\"direct_integral\""));
    assert!(text.contains("\"x1\""));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = hoig(&["explain", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn help_exits_cleanly() {
    let o = hoig(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("export-graph"));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let o = hoig(&["train", "glm", "--data", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dimension_mismatch_is_a_data_error() {
    let o = hoig(&["explain", "--model", &shipped_model(), "--input", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn third_order_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stack.json");
    let o = hoig(&[
        "explain", "--model", &shipped_model(), "--input", "0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2",
        "--order", "3", "--points", "30", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = hoig(&["verify", "--tensors", s(&out)]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    assert!(String::from_utf8_lossy(&v.stdout).contains("\"passed\": true"));
}

#[test]
fn corrupted_stack_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stack.json");
    let o = hoig(&[
        "explain", "--model", &shipped_model(), "--input", "1,1,1,1,1,1,1,1",
        "--order", "2", "--points", "20", "--out", s(&out),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut stack: serde_json::Value = serde_json::from_str(&text).unwrap();
    let v = &mut stack[1]["canonical_values"][0];
    *v = serde_json::json!(v.as_f64().unwrap() + 5.0);
    std::fs::write(&out, stack.to_string()).unwrap();
    let v = hoig(&["verify", "--tensors", s(&out)]);
    assert_eq!(v.status.code(), Some(3));
}

#[test]
fn dot_export_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let stack = dir.path().join("stack.json");
    let o = hoig(&[
        "explain", "--model", &shipped_model(), "--input", "1,1,1,1,1,1,1,1",
        "--order", "3", "--points", "20", "--out", s(&stack),
    ]);
    assert!(o.status.success());
    let a = hoig(&["export-graph", "--tensors", s(&stack), "--format", "dot", "--threshold", "0.2"]);
    let b = hoig(&["export-graph", "--tensors", s(&stack), "--format", "dot", "--threshold", "0.2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let dot = String::from_utf8(a.stdout).unwrap();
    assert!(dot.starts_with("graph G {"));
    assert!(dot.contains("// triangle x1 x2 x3"));
    assert!(dot.contains("// triangle x6 x7 x8"));
}

#[test]
fn threshold_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let stack = dir.path().join("stack.json");
    hoig(&[
        "explain", "--model", &shipped_model(), "--input", "1,1,1,1,1,1,1,1",
        "--order", "2", "--points", "10", "--out", s(&stack),
    ]);
    let o = hoig(&["export-graph", "--tensors", s(&stack), "--threshold", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_train_explain_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synth.csv");
    let model = dir.path().join("gpr.json");
    let o = hoig(&["synth", "--samples", "60", "--out", s(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hoig(&["train", "gpr", "--data", s(&csv), "--out", s(&model)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hoig(&[
        "explain", "--model", s(&model), "--data", s(&csv), "--input-row", "3",
        "--baseline", "mean", "--order", "2", "--points", "20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"baseline_kind\": \"mean\""));
}

#[test]
fn realestate_experiment_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        hoig(&[
            "experiment", "realestate", "--data", &fixture(), "--target", "Y house price of unit area",
            "--exclude", "No", "--points", "50", "--out", s(out),
        ])
    };
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    let o = run(&first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run(&second).status.success());
    let mut dots: Vec<_> = std::fs::read_dir(&first)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".dot"))
        .collect();
    dots.sort();
    assert_eq!(dots.len(), 3);
    for name in &dots {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    assert!(first.join("report.json").exists());
}
