use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn charflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charflow"))
        .current_dir(dir)
        .env_remove("CHARFLOW_SEED")
        .args(args)
        .output()
        .expect("spawn charflow")
}

fn scenario(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const SHOCK: &str = r#"{"name": "shock", "flux": {"kind": "burgers"},
    "datum": {"kind": "table", "breaks": [0.0], "values": [1.0, 0.0]}, "k": 4, "horizon": 2.0}"#;
const RAREFACTION: &str = r#"{"name": "rarefaction", "flux": {"kind": "burgers"},
    "datum": {"kind": "table", "breaks": [0.0], "values": [0.0, 1.0]}, "k": 5, "horizon": 1.0,
    "verify": {"oracle": true}}"#;
const MERGE: &str = r#"{"name": "merge", "flux": {"kind": "cubic"},
    "datum": {"kind": "table", "breaks": [0.0, 1.0, 1.5], "values": [1.0, 0.25, -0.5, 0.5]}, "k": 3, "horizon": 2.0}"#;

#[test]
fn solve_shock_writes_one_front() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "s.json", SHOCK);
    let o = charflow(d.path(), &["solve", "--scenario", "s.json", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fronts = fs::read_to_string(d.path().join("o/fronts.csv")).unwrap();
    let lines: Vec<&str> = fronts.lines().collect();
    assert_eq!(lines[0], "id,t_birth,x_birth,t_death,x_death,u_left,u_right,speed");
    assert_eq!(lines[1..], ["0,0.0,0.0,,,1.0,0.0,0.5"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["events"], 0);
    assert_eq!(summary["conservation_error"], 0.0);
    assert!(d.path().join("o/timing.json").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "m.json", MERGE);
    scenario(d.path(), "r.json", RAREFACTION);
    for out in ["a", "b"] {
        let o = charflow(d.path(), &["solve", "--scenario", "m.json", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = charflow(d.path(), &["verify", "--scenario", "r.json", "--scenario", "m.json", "--out", &format!("{out}v"), "--workers", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["fronts.csv", "events.csv", "samples.csv", "summary.json"] {
        assert_eq!(fs::read(d.path().join("a").join(f)).unwrap(), fs::read(d.path().join("b").join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read(d.path().join("av/summary.json")).unwrap(), fs::read(d.path().join("bv/summary.json")).unwrap());
}

#[test]
fn verify_all_passes_on_rarefaction() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "r.json", RAREFACTION);
    let o = charflow(d.path(), &["verify", "all", "--scenario", "r.json", "--out", "v", "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("v/summary.json")).unwrap()).unwrap();
    assert_eq!(s["passed"], true);
    assert_eq!(s["seed"], 7);
    assert!(s["max_weak_residual"].as_f64().unwrap() < 1e-8);
    assert!(s["max_oracle_l1"].as_f64().unwrap() <= 5.0 / 32.0);
}

#[test]
fn seed_comes_from_environment_when_no_flag() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "r.json", RAREFACTION);
    let o = Command::new(env!("CARGO_BIN_EXE_charflow"))
        .current_dir(d.path())
        .env("CHARFLOW_SEED", "42")
        .args(["verify", "concentration", "--scenario", "r.json", "--out", "v"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("v/summary.json")).unwrap()).unwrap();
    assert_eq!(s["seed"], 42);
    assert!(s["conservation_error"].is_null());
}

#[test]
fn malformed_flux_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "bad.json", r#"{"flux": {"kind": "quartic"}, "datum": {"kind": "cantor", "n": 2}, "k": 4, "horizon": 1.0}"#);
    let o = charflow(d.path(), &["solve", "--scenario", "bad.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("flux.kind"));
}

#[test]
fn flags_override_scenario_fields() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "s.json", SHOCK);
    let o = charflow(d.path(), &["solve", "--scenario", "s.json", "--until", "0.5", "--k", "6", "--out", "o"]);
    assert!(o.status.success());
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(s["horizon"], 0.5);
    assert_eq!(s["k"], 6);
}

#[test]
fn riemann_prints_fan() {
    let d = tempfile::tempdir().unwrap();
    let o = charflow(d.path(), &["riemann", "--ul", "0", "--ur", "1", "--k", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text, "speed,u_before,u_after\n0.125,0.0,0.25\n0.375,0.25,0.5\n0.625,0.5,0.75\n0.875,0.75,1.0\n");
}

#[test]
fn classify_and_dissipation_outputs() {
    let d = tempfile::tempdir().unwrap();
    scenario(
        d.path(),
        "m.json",
        r#"{"flux": {"kind": "burgers"}, "datum": {"kind": "table", "breaks": [0.0, 1.0], "values": [2.0, 1.0, 0.0]},
            "k": 2, "horizon": 3.0, "window": [-2.0, 5.0]}"#,
    );
    fs::write(d.path().join("p.csv"), "t,x\n2.0,2.5\n0.5,-1\n").unwrap();
    let o = charflow(d.path(), &["classify", "--scenario", "m.json", "--points", "p.csv", "--y-grid", "40", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(d.path().join("o/labels.csv")).unwrap(), "t,x,region,jump\n2.0,2.5,A1,true\n0.5,-1.0,C,false\n");
    let o = charflow(d.path(), &["dissipation", "--scenario", "m.json", "--entropy", "kruzkov:+:0.5", "--out", "o"]);
    assert!(o.status.success());
    let atoms = fs::read_to_string(d.path().join("o/atoms.csv")).unwrap();
    assert_eq!(atoms.lines().next(), Some("front_id,rate,t_start,t_end"));
    assert_eq!(atoms.lines().count(), 4);
    let o = charflow(d.path(), &["dissipation", "--scenario", "m.json", "--entropy", "renyi", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn counterexample_tables() {
    let d = tempfile::tempdir().unwrap();
    let o = charflow(d.path(), &["counterexample1", "--levels", "3", "--out", "o"]);
    assert!(o.status.success());
    let c = fs::read_to_string(d.path().join("o/criterion.csv")).unwrap();
    assert_eq!(c.lines().next(), Some("level,measured,exact,bound,pass_fraction"));
    assert_eq!(c.lines().count(), 4);
    let o = charflow(d.path(), &["counterexample2", "--blocks", "1..2", "--k", "12", "--out", "o", "--series-terms", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = fs::read_to_string(d.path().join("o/blocks.csv")).unwrap();
    assert_eq!(b.lines().next(), Some("n,d_n,t1,tv_integral,theoretical_bound"));
    assert_eq!(b.lines().count(), 3);
}

#[test]
fn unwritable_output_exits_with_three() {
    let d = tempfile::tempdir().unwrap();
    scenario(d.path(), "s.json", SHOCK);
    fs::write(d.path().join("file"), "").unwrap();
    let o = charflow(d.path(), &["solve", "--scenario", "s.json", "--out", "file/sub"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("internal error"));
}
