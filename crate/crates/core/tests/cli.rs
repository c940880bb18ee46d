use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hybrid_servo::run::export_tilting_step;
use hybrid_servo::scenario::{ScenarioFile, SolverSettings};
use hybrid_servo::tilting::TiltingScenario;

fn run(dir: &Path, scenario: &str, out: &str, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybrid-servo"))
        .arg("--scenario")
        .arg(dir.join(scenario))
        .arg("--out")
        .arg(dir.join(out))
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn default_scenario_writes_fifteen_verified_steps() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.json", r#"{"schema": 1, "scenario_type": "block_tilting"}"#);
    let out = run(dir.path(), "s.json", "o.json", &["--verify", "--csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    let steps = json["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 15);
    assert!(steps.iter().all(|s| s["verification"]["passed"] == true));

    let csv = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("step,n_av,pgd_cost,lp_margin,newton_residual,ms_velocity,ms_force")
    );
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.lines().last().unwrap().starts_with("median,"));
}

#[test]
fn identical_inputs_give_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"schema": 1, "scenario_type": "block_tilting", "params": {"num_steps": 5}}"#,
    );
    let a = run(dir.path(), "s.json", "a.json", &["--seed", "4", "--verify"]);
    let b = run(dir.path(), "s.json", "b.json", &["--seed", "4", "--verify"]);
    assert!(a.status.success() && b.status.success());
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn frictionless_table_exits_three_at_step_one() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"schema": 1, "scenario_type": "block_tilting", "params": {"mu_table": 0.0}}"#,
    );
    let out = run(dir.path(), "s.json", "o.json", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 1"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(json["failure"]["step"], 1);
}

#[test]
fn malformed_json_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.json", "{\"schema\": 1, ");
    assert_eq!(run(dir.path(), "s.json", "o.json", &[]).status.code(), Some(4));
    write(
        dir.path(),
        "t.json",
        r#"{"schema": 1, "scenario_type": "block_tilting", "params": {"edge": 1}}"#,
    );
    assert_eq!(run(dir.path(), "t.json", "o.json", &[]).status.code(), Some(4));
}

#[test]
fn underconstrained_instance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"schema": 1, "scenario_type": "raw_instance",
            "params": {"n_u": 2, "n_a": 1, "goal": [[0, 0, 1]], "goal_rhs": [1]}}"#,
    );
    let out = run(dir.path(), "s.json", "o.json", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inconsistent_goal_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"schema": 1, "scenario_type": "raw_instance",
            "params": {"n_u": 0, "n_a": 2, "holonomic": [[1, 0]], "goal": [[1, 0]], "goal_rhs": [1]}}"#,
    );
    assert_eq!(run(dir.path(), "s.json", "o.json", &[]).status.code(), Some(2));
}

#[test]
fn exported_step_resolves_to_the_same_action() {
    let dir = tempfile::tempdir().unwrap();
    let s = TiltingScenario::default();
    let settings = SolverSettings::default();
    write(dir.path(), "traj.json", &ScenarioFile::block_tilting(&s, &settings).to_json());
    write(
        dir.path(),
        "step.json",
        &export_tilting_step(&s, 0, &settings).unwrap().to_json(),
    );
    assert!(run(dir.path(), "traj.json", "traj_out.json", &[]).status.success());
    assert!(run(dir.path(), "step.json", "step_out.json", &[]).status.success());

    let read =
        |name: &str| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(dir.path().join(name)).unwrap()).unwrap() };
    assert_eq!(
        read("traj_out.json")["steps"][0]["action"],
        read("step_out.json")["steps"][0]["action"]
    );
}

#[test]
fn canonical_scenarios_round_trip_byte_for_byte() {
    let s = TiltingScenario {
        mu_table: 0.65,
        tilt_rate: 0.1,
        ..Default::default()
    };
    let settings = SolverSettings::default();
    for file in [
        ScenarioFile::block_tilting(&s, &settings),
        export_tilting_step(&s, 7, &settings).unwrap(),
    ] {
        let text = file.to_json();
        let again = ScenarioFile::parse(&text).unwrap();
        assert_eq!(again, file);
        assert_eq!(again.to_json(), text);
    }
}
