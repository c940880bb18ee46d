//! Independent checks of a solved step, and what they report when the
//! solution is tampered with.

use hybrid_servo::force::{solve_force, ForceSolverConfig};
use hybrid_servo::tilting::{build_instance, TiltingScenario};
use hybrid_servo::velocity::{solve_velocity, VelocitySolverConfig};
use hybrid_servo::verify::brute_force_force_oracle;
use hybrid_servo::verify::{check_forces, check_velocity_command, DEFAULT_GRID_RESOLUTION};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = TiltingScenario::default();
    let state = &scenario.rollout()[6];
    let (instance, guard) = build_instance(state, &scenario)?;
    let vel = solve_velocity(&instance, &VelocitySolverConfig::default())?;
    let config = ForceSolverConfig::default();
    let force = solve_force(&instance, &guard, &vel.transform, vel.n_av, &config)?;

    let v = check_velocity_command(&instance, &vel.c, &vel.b_c, 1e-8);
    let f = check_forces(&instance, &guard, &vel.transform, &force.lambda, &force.eta);
    println!(
        "solver output: velocity {} / force {} (min margin {:.3})",
        v.passed, f.passed, f.min_margin
    );

    let mut zeroed = vel.c.clone();
    zeroed.row_mut(0).fill(0.0);
    let bad = check_velocity_command(&instance, &zeroed, &vel.b_c, 1e-8);
    println!("zeroed command row: passed = {}, notes = {:?}", bad.passed, bad.notes);

    let mut lambda = force.lambda.clone();
    lambda[3] += 2.0;
    let bad = check_forces(&instance, &guard, &vel.transform, &lambda, &force.eta);
    println!(
        "shifted table force: passed = {}, newton residual = {:.3}",
        bad.passed, bad.newton_residual
    );

    let grid = brute_force_force_oracle(
        &instance,
        &guard,
        &vel.transform,
        vel.n_av,
        config.f_max,
        DEFAULT_GRID_RESOLUTION,
    )?;
    println!(
        "LP margin {:.4} vs grid margin {:.4} over {} points",
        force.objective_margin, grid.best_margin, grid.evaluated
    );
    assert!(v.passed && f.passed);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
