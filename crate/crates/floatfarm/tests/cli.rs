use std::path::Path;
use std::process::{Command, Output};

use floatfarm::harness::{FarmSetup, Scenario};

fn floatfarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floatfarm")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn score_of_perfect_tracking_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("time_s,p_gen_mw,p_sp_mw\n");
    for k in 0..240 {
        let t = 10.0 * k as f64;
        let p = 30.0 + 3.0 * (0.013 * t).sin() * (0.0021 * t).cos();
        csv.push_str(&format!("{t},{p},{p}\n"));
    }
    let input = write(dir.path(), "pair.csv", &csv);
    let out = dir.path().join("card");
    let o = floatfarm(&["score", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let card: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("scorecard.json")).unwrap()).unwrap();
    assert_eq!(card["composite"].as_f64(), Some(1.0));
    assert_eq!(card["pass"].as_bool(), Some(true));
    let rows = std::fs::read_to_string(out.join("intervals.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 8);
}

#[test]
fn score_rejects_an_uneven_clock() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pair.csv", "time_s,p_gen_mw,p_sp_mw\n0,30,30\n10,30,30\n25,30,30\n");
    let o = floatfarm(&["score", &input]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn validate_flags_a_small_proportional_gain() {
    let s = Scenario::default();
    let setup = FarmSetup::build(&s.turbine, Path::new(".")).unwrap();
    let check = setup.gain_check((s.mpc.omega_min_rpm, s.mpc.omega_max_rpm), s.turbine.region2_wind).unwrap();
    assert!(check.pass);

    let dir = tempfile::tempdir().unwrap();
    let ok = floatfarm(&["validate"]);
    assert_eq!(ok.status.code(), Some(0), "{}", text(&ok));

    let k_p = check.kp_bound / 10.0;
    let path = write(dir.path(), "low.toml", &format!("[turbine]\nk_p = {k_p:e}\n"));
    let o = floatfarm(&["validate", "--scenario", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).contains(&format!("{:.4e}", check.kp_bound)), "{}", text(&o));
}

#[test]
fn bad_scenarios_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "startup = \"soon\"\n");
    let o = floatfarm(&["validate", "--scenario", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));

    let path = write(dir.path(), "ok.toml", "startup = 100.0\nduration = 400.0\n");
    let o = floatfarm(&["run", "--scenario", &path, "--controller", "pid", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).contains("pid"));

    let o = floatfarm(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_with_missing_inflow_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
startup = 100.0
duration = 400.0
[[columns]]
source = { kind = "synthetic" }
[[columns]]
source = { kind = "csv", path = "missing_column.csv" }
"#;
    let path = write(dir.path(), "scenario.toml", body);
    let o = floatfarm(&["run", "--scenario", &path, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains(dir.path().join("missing_column.csv").to_str().unwrap()), "{}", text(&o));
}

#[test]
fn run_writes_series_and_scorecard() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "scenario.toml", "startup = 100.0\nduration = 400.0\n[output]\nstride = 200\n");
    let out = dir.path().join("out");
    let o = floatfarm(&[
        "run",
        "--scenario",
        &path,
        "--controller",
        "lpvtd-mpc",
        "--seed",
        "4",
        "--workers",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).starts_with("lpvtd-mpc: composite"));
    for f in ["series.csv", "pair.csv", "telemetry.csv", "intervals.csv", "scorecard.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    // 8001 samples kept every 200th
    assert_eq!(series.lines().count(), 1 + 41);
    let telemetry = std::fs::read_to_string(out.join("telemetry.csv")).unwrap();
    assert_eq!(telemetry.lines().count(), 1 + 6);
}
