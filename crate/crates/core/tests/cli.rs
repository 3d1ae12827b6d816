use std::path::Path;
use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dnp-steady"))
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/configs"))
}

#[test]
fn run_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let status = cli()
        .args(["run"])
        .arg(configs().join("decreasing_unique.toml"))
        .arg("--out")
        .arg(out.path())
        .args(["--seed", "3", "--threads", "2"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stdout));
    for f in ["report.json", "timing.json", "fields.csv", "fields/lower.csv", "plots/profile.svg", "plots/sup_diff.svg"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out.path().join("fields.csv")).unwrap();
    assert!(csv.starts_with("node_index,x,y,value\n"));
    assert_eq!(csv.lines().count(), 50);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["passed"], true);
    assert!(report.to_string().find("wall_time").is_none());
}

#[test]
fn validate_reports_config_errors_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"steady\"\n[mesh]\nkind = \"interval\"\nn = 8\nlength = 1.0\n[operator]\nkind = \"multiphase\"\nweights = [\"1\"]\nexponents = [\"2 +\"]\n[source]\nkind = \"logistic\"\n").unwrap();
    let out = cli().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("operator.exponents[0]") && err.contains("bad.toml"), "{err}");

    let ok = cli().arg("validate").arg(configs().join("allee_band.toml")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("allee_band: ok"));
}

#[test]
fn failed_assertion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    // a residual tolerance no iterate can meet
    let text = std::fs::read_to_string(configs().join("three_phase_signomial.toml")).unwrap()
        + "residual_tol = 1e-30\n";
    std::fs::write(&cfg, text).unwrap();
    let out = cli().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL steady_state.weak_residual"));
}

#[test]
fn missing_file_is_a_config_error() {
    let out = cli().args(["run", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
