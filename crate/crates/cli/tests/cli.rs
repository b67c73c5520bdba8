use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn elab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elab")).args(args).output().expect("elab runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_linear_decay(out: &Path, extra: &[&str]) -> Output {
    let (out, cfg) = (out.display().to_string(), config("quarter_linear_decay.json"));
    let mut args = vec!["--out", out.as_str()];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["run", cfg.as_str()]);
    elab(&args)
}

#[test]
fn run_writes_artifacts_and_a_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_linear_decay(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS limit is a profile")), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
    for f in ["field.csv", "trajectory.json", "profile_z=1.000000.csv", "summary.json", "analysis.json", "slide.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.len() >= 6);
    for e in files {
        let bytes = std::fs::read(dir.path().join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["wall_time_ms"].is_u64());
    assert_eq!(summary["failed"], 0);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_linear_decay(a.path(), &["--threads", "1"]).status.success());
    assert!(run_linear_decay(b.path(), &["--threads", "4"]).status.success());
    for f in ["field.csv", "trajectory.json", "slide.json", "analysis.json", "trajectory.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn malformed_config_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"nonlinearity\": { \"spec\": \"logistic\" },\n  \"domain\": [\n}\n").unwrap();
    let o = elab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("quarter_logistic.json")).unwrap().replace("\"tol\"", "\"tolerance\"");
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, text).unwrap();
    let o = elab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));
}

#[test]
fn unreachable_output_dir_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = elab(&["--out", out.to_str().unwrap(), "eigen", "--n", "64"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn infeasible_profile_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = elab(&["--out", dir.path().to_str().unwrap(), "profile", "--f", "logistic", "--z", "0.5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn plot_is_deterministic_with_one_polyline_per_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = elab(&["--out", d, "trajectory", "--f", "logistic", "--kind", "quarter", "--l1", "40", "--l2", "20", "--h", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = dir.path().join("trajectory.json");
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    for svg in [&a, &b] {
        let o = elab(&["plot", report.to_str().unwrap(), svg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let svg = std::fs::read_to_string(&a).unwrap();
    assert_eq!(svg.as_bytes(), std::fs::read(&b).unwrap().as_slice());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(svg.matches("<polyline").count(), r["candidates"].as_array().unwrap().len());
}

#[test]
fn plot_rejects_empty_and_mismatched_reports() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"detected_z":null,"converged":false,"M":1.0,"m":0.0,"tail_slope":0.0,"h_grid":[],"candidates":[],"distances":[],"final_distance":1.0,"margin_ratio":1.0}"#,
    )
    .unwrap();
    let svg = dir.path().join("x.svg");
    let o = elab(&["plot", empty.to_str().unwrap(), svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"lambda": 5.78}"#).unwrap();
    let o = elab(&["plot", wrong.to_str().unwrap(), svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!svg.exists());
}

#[test]
fn field_files_feed_back_into_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let solve = dir.path().join("solve");
    let o = elab(&[
        "--out",
        solve.to_str().unwrap(),
        "solve-half",
        "--f",
        "abs-sin",
        "--l1",
        "30",
        "--l2",
        "10",
        "--h",
        "0.5",
        "--trace",
        "constant:5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let field = solve.join("field.csv");
    let o = elab(&["--out", d, "trajectory", "--f", "abs-sin", "--kind", "half", "--field", field.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("trajectory.json")).unwrap()).unwrap();
    let z = r["detected_z"].as_f64().unwrap();
    assert!((z - 2.0 * std::f64::consts::PI).abs() < 1e-9, "z = {z}");
}
