//! Scenario files: write the default tilting scenario, solve it through
//! the file-based driver, then export one step as a raw instance and check
//! that re-solving it gives the same action.

use hybrid_servo::run::{export_tilting_step, run_trajectory, solve_single, RunConfig};
use hybrid_servo::scenario::{ScenarioFile, SolverSettings};
use hybrid_servo::tilting::TiltingScenario;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("hybrid-servo-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let scenario = TiltingScenario::default();
    let settings = SolverSettings::default();

    let path = dir.join("tilting.json");
    std::fs::write(&path, ScenarioFile::block_tilting(&scenario, &settings).to_json())?;
    let mut config = RunConfig::new(&path, dir.join("tilting_out.json"));
    config.emit_csv = true;
    config.verify = true;
    let output = run_trajectory(&config)?;
    println!(
        "trajectory: {} steps written to {}",
        output.steps.len(),
        config.output_path.display()
    );

    let raw = dir.join("step4.json");
    std::fs::write(&raw, export_tilting_step(&scenario, 3, &settings)?.to_json())?;
    let single = solve_single(&raw, &settings, true)?;
    let same = single.action == output.steps[3].action;
    println!("step 4 re-solved from {}: identical action = {same}", raw.display());

    std::fs::remove_dir_all(&dir)?;
    assert!(same);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
