//! Force stage on a vertical stack: a block resting on a table with a
//! finger pressing from above. The solver picks the finger force that keeps
//! both contacts furthest from losing contact or exceeding a force cap, and
//! a grid search over the same command confirms the optimum.

use hybrid_servo::force::{solve_force, ForceSolverConfig};
use hybrid_servo::linalg::{Matrix, Vector};
use hybrid_servo::model::{GuardConditions, SystemInstance};
use hybrid_servo::verify::brute_force_force_oracle;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // v = [block z; finger z], λ = [table; finger] (both push when positive).
    let n = Matrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
    let goal = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let weight = Vector::from_vec(vec![-2.5, 0.0]);
    let instance = SystemInstance::new(1, 1, n, goal, Vector::zeros(1), weight);

    // λ_table ≥ 0.5, λ_finger ≥ 0.5, λ_table ≤ 10; rows act on [λ; f].
    #[rustfmt::skip]
    let rows = Matrix::from_row_slice(3, 4, &[
        -1.0,  0.0, 0.0, 0.0,
         0.0, -1.0, 0.0, 0.0,
         1.0,  0.0, 0.0, 0.0,
    ]);
    let guard = GuardConditions::inequalities_only(rows, Vector::from_vec(vec![-0.5, -0.5, 10.0]));
    let t = Matrix::identity(2, 2);

    let config = ForceSolverConfig::default();
    let sol = solve_force(&instance, &guard, &t, 0, &config)?;
    println!("finger command η_af = {:.3} N", sol.eta_af[0]);
    println!("contact forces λ = {:.3?}", sol.lambda.as_slice());
    println!("worst margin = {:.3} N", sol.objective_margin);

    let grid = brute_force_force_oracle(&instance, &guard, &t, 0, config.f_max, 0.25)?;
    println!(
        "grid search: margin {:.3} N at η_af = {:?}",
        grid.best_margin, grid.best_eta_af
    );
    assert!(sol.objective_margin >= grid.best_margin - 1e-9);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
