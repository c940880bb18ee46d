//! Velocity stage on a planar example: a slider on a rail pushed by a
//! two-axis hand, with the goal of moving the slider at 0.1 m/s.

use hybrid_servo::linalg::Matrix;
use hybrid_servo::model::SystemInstance;
use hybrid_servo::velocity::{solve_velocity, VelocitySolverConfig};
use nalgebra::DVector;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // v = [slider x; hand x; hand y]. The slider is unactuated and the hand
    // sticks to it along x: v_slider − v_hand_x = 0.
    let n = Matrix::from_row_slice(1, 3, &[1.0, -1.0, 0.0]);
    let goal = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let instance = SystemInstance::new(1, 2, n, goal, DVector::from_vec(vec![0.1]), DVector::zeros(3));

    let sol = solve_velocity(&instance, &VelocitySolverConfig::default())?;
    println!("n_av = {}, n_af = {}", sol.n_av, sol.n_af());
    println!("velocity command C = {:.3}", sol.c);
    println!("magnitude w_av = {:.3}", sol.b_c[0]);
    println!("per-start costs = {:?}", sol.per_start_costs);
    assert_eq!(sol.n_av, 1);
    assert!((sol.c[(0, 1)].abs() - 1.0).abs() < 1e-9);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
