//! Tilting a cube about one bottom edge by 90° with a finger on its top
//! face, solved step by step.

use hybrid_servo::run::solve_step;
use hybrid_servo::scenario::SolverSettings;
use hybrid_servo::tilting::{build_instance, hand_to_axis, planned_hand_velocity, TiltingScenario};
use nalgebra::Vector3;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = TiltingScenario::default();
    let settings = SolverSettings::default();
    println!("step  n_av  cmd·arc  cmd·axis   f_x      f_y      f_z    margin");
    for (k, state) in scenario.rollout().iter().enumerate() {
        let (instance, guard) = build_instance(state, &scenario)?;
        let out = solve_step(k + 1, &instance, &guard, &settings, true)?;
        let c = &out.record.action.velocity_command[0];
        let cmd = Vector3::new(c[6], c[7], c[8]);
        let arc = planned_hand_velocity(state, &scenario).normalize();
        let f = &out.record.action.actuated_force;
        println!(
            "{:>4}  {:>4}  {:>7.3}  {:>8.3}  {:>7.2}  {:>7.2}  {:>7.2}  {:>6.3}",
            k + 1,
            out.record.action.n_av,
            cmd.dot(&arc),
            cmd.dot(&hand_to_axis(state, &scenario)),
            f[0],
            f[1],
            f[2],
            out.record.diagnostics.lp_margin
        );
        let report = out.record.verification.as_ref().expect("verification requested");
        assert!(report.passed, "{:?}", report.notes);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
