use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kfl::formats::{git_blob_hash, write_profile, write_tensor};

fn kfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfl")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.scn"));
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fubini_study_run_keeps_monitors_constant() {
    let out = tempfile::tempdir().unwrap();
    let scn = crate_dir().join("scenarios/fs-p1.scn");
    let o = kfl(&["run-flow", "--scenario", s(&scn), "--out", s(out.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.path().join("fs-p1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,sup_u,sup_grad_u,sup_R,sup_ric_minus_g,int_R_minus_n_sq,Y,Z,lambda,futaki_proj,chen_margin,griffiths_margin,soliton_residual"
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert!(rows.len() > 10);
    for r in &rows {
        let sup_r: f64 = r[3].parse().unwrap();
        assert!((sup_r - 1.0).abs() < 1e-10, "{sup_r}");
        let y: f64 = r[6].parse().unwrap();
        assert!(y < 1e-20);
    }
    // λ is only computed every fifth sample; the other rows leave it empty.
    assert!(rows.iter().any(|r| r[8].is_empty()));
    assert!(rows.iter().any(|r| !r[8].is_empty()));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("fs-p1.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    let fixture = std::fs::read(crate_dir().join("fixtures/fs-p1.profile")).unwrap();
    assert_eq!(manifest["initial_profile"]["hash"], git_blob_hash(&fixture));
    assert_eq!(manifest["grid"]["points"], 257);
    assert!(manifest["timestamp_unix"].as_u64().unwrap() > 0);
    assert!(manifest["config"]["dt"].as_f64().unwrap() > 0.0);
}

#[test]
fn cfl_violation_exits_2_before_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "bad", "fixture = perturbed-p1\ndt = 0.01\n");
    let out = dir.path().join("out");
    let o = kfl(&["run-flow", "--scenario", s(&scn), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
    assert!(!out.join("bad.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("bad.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "config-error");
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_scenario(dir.path(), "k", "fixture = fs-p1\nspeed = 3\n");
    assert_eq!(code(&kfl(&["run-flow", "--scenario", s(&bad_key), "--out", s(dir.path())])), 2);
    let missing = write_scenario(dir.path(), "m", "profile = does-not-exist.profile\n");
    assert_eq!(code(&kfl(&["run-flow", "--scenario", s(&missing), "--out", s(dir.path())])), 2);
    assert_eq!(code(&kfl(&["spectrum"])), 2);
    assert_eq!(code(&kfl(&["no-such-command"])), 2);
    let garbage = dir.path().join("g.profile");
    std::fs::write(&garbage, "# momentum-profile n=1 m=3\n0\nx\n0\n").unwrap();
    assert_eq!(code(&kfl(&["futaki", "--profile", s(&garbage)])), 2);
}

#[test]
fn unstable_override_is_a_numerical_halt() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "blowup", "fixture = perturbed-p1\ncfl_safety = 20\nt_max = 1\n");
    let o = kfl(&["run-flow", "--scenario", s(&scn), "--out", s(dir.path())]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("blowup.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "halted");
    assert!(!dir.path().join("blowup.csv").exists());
}

#[test]
fn failed_scenario_leaves_others_intact() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_scenario(dir.path(), "good", "fixture = fs-p1\nt_max = 0.05\nsample_dt = 0.01\n");
    let bad = write_scenario(dir.path(), "bad", "fixture = fs-p1\ndt = 1\n");
    let out = dir.path().join("out");
    let o = kfl(&["run-flow", "--scenario", s(&good), "--scenario", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let csv = std::fs::read_to_string(out.join("good.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    assert!(!out.join("bad.csv").exists());
}

#[test]
fn corrupted_fixture_fails_only_its_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixtures");
    std::fs::create_dir(&fx).unwrap();
    for e in std::fs::read_dir(crate_dir().join("fixtures")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), fx.join(e.file_name())).unwrap();
    }
    let path = fx.join("fs-p1.profile");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[100] = "0.3";
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = dir.path().join("out");
    let o = kfl(&["verify", "--filter", "c1,c2,c7", "--fixtures", s(&fx), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let line = |id: &str| stdout.lines().find(|l| l.split_whitespace().nth(1) == Some(id)).unwrap().to_string();
    assert!(line("c1").starts_with("PASS"), "{stdout}");
    assert!(line("c2").starts_with("FAIL"), "{stdout}");
    assert!(line("c7").starts_with("PASS"), "{stdout}");

    // Unparsable file: same verdicts.
    std::fs::write(&path, "not a profile").unwrap();
    let o = kfl(&["verify", "--filter", "c2", "--fixtures", s(&fx), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_filter_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = kfl(&["verify", "--filter", "demailly", "--seed", "3", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("PASS c1"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["passed"], true);
    assert_eq!(code(&kfl(&["verify", "--filter", "nothing-matches", "--out", s(dir.path())])), 2);
}

#[test]
fn check_positivity_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    // Round P² with Ric = g in a unitary frame: Griffiths minimum 1/3.
    let t = kfl_core::geometry::frame_model_tensor(2, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0);
    let path = dir.path().join("fs.tensor");
    std::fs::write(&path, write_tensor(&t)).unwrap();
    let o = kfl(&["check-positivity", "--tensor", s(&path), "--seed", "5"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["griffiths_min"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-10);
    assert!(v["nakano_min_sym"].as_f64().unwrap() > 0.0);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["restarts"], 32);
    std::fs::write(&path, "# curvature n=2\n0 0 0\n").unwrap();
    assert_eq!(code(&kfl(&["check-positivity", "--tensor", s(&path)])), 2);
}

#[test]
fn spectrum_and_futaki_on_profile_files() {
    let dir = tempfile::tempdir().unwrap();
    let fs = crate_dir().join("fixtures/fs-p1.profile");
    let o = kfl(&["spectrum", "--profile", s(&fs), "--sectors", "4"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert_eq!(v["kernel_dim"], 3);

    let p = kfl_core::geometry::perturbed_profile(1, 129, 0.5, 0.2).unwrap();
    let path = dir.path().join("metric-a.profile");
    std::fs::write(&path, write_profile(&p)).unwrap();
    let o = kfl(&["futaki", "--profile", s(&path)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metric_id"], "metric-a");
    assert_eq!(v["basis_labels"].as_array().unwrap().len(), 3);
    for val in v["values"].as_array().unwrap() {
        assert!(val[0].as_f64().unwrap().hypot(val[1].as_f64().unwrap()) <= 1e-6);
    }
}
