//! Kinematic building blocks of the tilting model: quaternion rate map,
//! velocity map, goal twist and constraint Jacobian along the roll-out.

use hybrid_servo::tilting::{goal_twist, holonomic_jacobian, omega_map, quat_rate_map, TiltingScenario};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = TiltingScenario::default();
    let states = scenario.rollout();
    println!("E(q) at identity:\n{:.2}", quat_rate_map(&[1.0, 0.0, 0.0, 0.0])?);

    for k in [0, 7, 14] {
        let state = &states[k];
        let (phi, jac) = holonomic_jacobian(state, &scenario);
        let (_, twist) = goal_twist(state, &scenario);
        let n = &jac * omega_map(state)?;
        println!(
            "step {:>2}: tilt {:>5.1}°, ‖Φ‖ = {:.1e}, N is {}x{}, body twist = {:.4?}",
            k + 1,
            (k as f64 * scenario.tilt_rate * scenario.step_duration).to_degrees(),
            phi.norm(),
            n.nrows(),
            n.ncols(),
            twist.as_slice()
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
