use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

const SMALL: &str = "grid_n = 2047\ngrid_rmax = 100\ndiag_bih_n = 511\ndiag_bih_rmax = 1000\n";

fn halfwave(out: &Path, cfg: &str, args: &[&str]) -> Output {
    let path = out.join(format!("cfg-{}.txt", args[0]));
    std::fs::create_dir_all(out).unwrap();
    std::fs::write(&path, cfg).unwrap();
    Command::new(env!("CARGO_BIN_EXE_halfwave"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn error_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn report(out: &Path, stage: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(stage).join("report.json")).unwrap()).unwrap()
}

fn all_pass(rep: &Value) -> bool {
    rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["report_only"].as_bool().unwrap() || c["pass"].as_bool().unwrap())
}

/// Ground state and profile built once on a small grid and shared read-only.
fn base() -> &'static PathBuf {
    static CELL: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &CELL
        .get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().join("out");
            for stage in ["ground-state", "profile"] {
                let o = halfwave(&out, SMALL, &[stage]);
                assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
            }
            (dir, out)
        })
        .1
}

#[test]
fn ground_state_and_profile_reports_pass() {
    let out = base();
    for stage in ["ground-state", "profile"] {
        let rep = report(out, stage);
        assert!(all_pass(&rep), "{rep}");
        assert_eq!(rep["grid"], serde_json::json!([2047, 100.0]));
    }
    let csv = std::fs::read_to_string(out.join("profile/phi_scaling.csv")).unwrap();
    assert!(csv.starts_with("b,phi_l2,phi_h2,mass_deviation,energy_over_b2"));
    assert_eq!(csv.lines().count(), 5);
    assert!(std::fs::read_to_string(out.join("ground-state/config.txt")).unwrap().contains("grid_n = 2047"));
}

#[test]
fn soliton_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for stage in ["ground-state", "profile"] {
        copy_dir(&base().join(stage), &out.join(stage));
    }
    let cfg = format!("{SMALL}evolve_b0 = 0\nevolve_t_end = 2\nevolve_sample_stride = 250\nevolve_richardson_t = 0\n");
    let o = halfwave(out, &cfg, &["evolve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(out, "evolve");
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"soliton_l2_error_per_unit_time"), "{names:?}");
    let series = std::fs::read_to_string(out.join("evolve/series.csv")).unwrap();
    assert!(series.starts_with("t,M,E,P3,lambda,b,gamma,eps_l2,eps_h_half,mod_norm"));

    let o = halfwave(out, SMALL, &["modulation"]);
    assert!(o.status.success());
    let o = halfwave(out, SMALL, &["report"]);
    assert!(o.status.success());
    let all = report(out, "report");
    assert_eq!(all["details"]["pass"], Value::Bool(true));
    assert_eq!(all["details"]["stages"].as_array().unwrap().len(), 4);
    assert!(out.join("report/summary.txt").exists());
}

#[test]
fn modulation_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfwave(dir.path(), "", &["modulation"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(dir.path(), "modulation");
    let dev = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "closed_form_deviation")
        .unwrap();
    assert!(dev["value"].as_f64().unwrap() <= 1e-8);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("half_derivative_exponent") && text.contains("not_sharp"));
}

#[test]
fn diagnostics_pass_and_printed_mode_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for stage in ["ground-state", "profile"] {
        copy_dir(&base().join(stage), &out.join(stage));
    }
    let cfg = format!("{SMALL}diag_a_list = 16, 64\ndiag_battery = 5\n");
    let o = halfwave(out, &cfg, &["diagnostics"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics/checks.json")).unwrap()).unwrap();
    assert!(records.as_array().unwrap().iter().all(|r| r.get("rhs_or_bound").is_some()));
    let sweep = std::fs::read_to_string(out.join("diagnostics/coercivity_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);

    // with the printed coefficient L₊,A loses its negative direction, so the
    // unconstrained minimum is no longer ≤ 0 and the run reports a failed check
    let cfg = format!("{SMALL}diag_a_list = 64\ndiag_battery = 2\ndiag_mode = printed\n");
    let o = halfwave(out, &cfg, &["diagnostics"]);
    assert_eq!(o.status.code(), Some(8));
    let err = error_json(&o);
    assert_eq!(err["error"]["kind"], "checks_failed");
    assert!(err["error"]["message"].as_str().unwrap().contains("unconstrained_minimum"));
}

#[test]
fn profile_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    copy_dir(&base().join("ground-state"), &out.join("ground-state"));
    let cfg = format!("{SMALL}profile_beta_orders = false\n");
    let o = halfwave(out, &cfg, &["profile"]);
    assert!(o.status.success());
    let first = std::fs::read(out.join("profile/manifest.json")).unwrap();
    let csv1 = std::fs::read(out.join("profile/phi_scaling.csv")).unwrap();
    let o = halfwave(out, &cfg, &["profile"]);
    assert!(o.status.success());
    assert_eq!(first, std::fs::read(out.join("profile/manifest.json")).unwrap());
    assert_eq!(csv1, std::fs::read(out.join("profile/phi_scaling.csv")).unwrap());
}

#[test]
fn unreachable_tolerance_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfwave(dir.path(), "grid_n = 255\ngrid_rmax = 40\ngs_tol = 1e-30\ngs_max_iter = 200\n", &["ground-state"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "iteration_diverged");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, "grid_n = 255\ngrid_rmax = 40\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_halfwave"))
        .args(["ground-state", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"]["kind"], "io");
}

#[test]
fn missing_artifacts_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["profile", "evolve", "diagnostics", "report"] {
        let o = halfwave(dir.path(), SMALL, &[stage]);
        assert_eq!(o.status.code(), Some(4), "{stage}");
        assert_eq!(error_json(&o)["error"]["kind"], "missing_artifact");
    }
}

#[test]
fn out_of_range_parameters_are_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfwave(dir.path(), "profile_b_list = 0.5, 0.1\n", &["profile"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["kind"], "domain");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in ["grid_m = 3\n", "schema_version = 7\n", "grid_n = many\n"] {
        let o = halfwave(dir.path(), cfg, &["ground-state"]);
        assert_eq!(o.status.code(), Some(1), "{cfg}");
        assert_eq!(error_json(&o)["error"]["kind"], "config");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_halfwave")).arg("--bogus").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["exit_code"], 1);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfwave(dir.path(), "grid_n = 4096\n", &["ground-state", "--grid-n", "1023", "--grid-rmax", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(dir.path(), "ground-state")["grid"], serde_json::json!([1023, 50.0]));
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}
