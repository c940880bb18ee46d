//! Numerical rank, null spaces and minimum-norm solutions.

use hybrid_servo::linalg::{min_norm_solution, null_space_basis, numerical_rank, Matrix, Vector, DEFAULT_RANK_TOL};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Two contact rows that agree up to 1e-12 count once.
    let n = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 1.0, 1e-12, 1.0]);
    let rank = numerical_rank(&n, DEFAULT_RANK_TOL)?;
    let null = null_space_basis(&n, DEFAULT_RANK_TOL)?;
    println!("rank(N) = {rank}, dim null(N) = {}", null.dim());
    assert_eq!(rank + null.dim(), 3);

    let v = min_norm_solution(&Matrix::from_row_slice(1, 2, &[1.0, 1.0]), &Vector::from_vec(vec![2.0]))?;
    println!("min-norm solution of x + y = 2: ({:.3}, {:.3})", v[0], v[1]);

    let inconsistent = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
    match min_norm_solution(&inconsistent, &Vector::from_vec(vec![1.0, 2.0])) {
        Err(e) => println!("x = 1 and x = 2: {e}"),
        Ok(_) => return Err("expected an inconsistent system".into()),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
