//! Seeded generators of random, well-posed problem instances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::force::{assemble_newton, build_kkt};
use crate::linalg::{null_space_basis, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::model::{transform_matrix, GuardConditions, SystemInstance};

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Random `k×k` orthogonal matrix (Q factor of a Gaussian matrix).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Matrix {
    if k == 0 {
        return Matrix::zeros(0, 0);
    }
    gaussian_matrix(rng, k, k).qr().q()
}

/// Instance with `n` generalized velocities that passes the dimension
/// check and has a consistent goal.
///
/// `N` has `n_φ ≥ rank(N)` rows (so it may be row-rank-deficient), the goal
/// rows are generic and `b_G` is the goal image of a random `v` in `null(N)`.
pub fn random_feasible_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SystemInstance {
    assert!(n >= 2, "need at least one unactuated and one actuated velocity");
    let n_u = rng.random_range(1..n);
    let n_a = n - n_u;
    let r_n = rng.random_range(n_u..n);
    let n_phi = r_n + rng.random_range(0..=2);
    let holonomic = gaussian_matrix(rng, n_phi, r_n) * gaussian_matrix(rng, r_n, n);
    let n_g = rng.random_range(1..=n - r_n);
    let goal = gaussian_matrix(rng, n_g, n);

    let null = null_space_basis(&holonomic, DEFAULT_RANK_TOL).expect("finite").basis;
    let v0 = &null * gaussian_vector(rng, null.ncols());
    let goal_rhs = &goal * v0;
    let external_force = gaussian_vector(rng, n);
    SystemInstance::new(n_u, n_a, holonomic, goal, goal_rhs, external_force)
}

/// A force-stage problem with a fixed action frame.
#[derive(Clone, Debug)]
pub struct ForceProblem {
    pub instance: SystemInstance,
    pub guard: GuardConditions,
    pub transform: Matrix,
    pub n_av: usize,
}

/// Random force problem with `n_af` force-controlled directions, a random
/// orthogonal action frame and guard inequalities that are strictly
/// satisfied at some command in `[−20, 20]^{n_af}`.
pub fn random_force_problem<R: Rng + ?Sized>(rng: &mut R, n_af: usize) -> Result<ForceProblem> {
    let n_u = rng.random_range(1..=3);
    let n_av = rng.random_range(0..=2);
    let n_a = n_af + n_av;
    let n = n_u + n_a;
    // Enough contacts for every command to admit equilibrium.
    let n_phi = n_u + n_af + rng.random_range(0..=n_av);
    let holonomic = gaussian_matrix(rng, n_phi, n);
    let external_force = gaussian_vector(rng, n) * 3.0;
    let instance = SystemInstance::new(n_u, n_a, holonomic, Matrix::zeros(0, n), Vector::zeros(0), external_force);
    let transform = transform_matrix(n_u, &random_orthogonal(rng, n_a));

    let rows = rng.random_range(2..=6);
    let inequality = gaussian_matrix(rng, rows, n_phi + n);
    let anchor = Vector::from_fn(n_af, |_, _| rng.random_range(-20.0..20.0));
    let assembly = assemble_newton(&instance, &GuardConditions::empty(n_phi + n), &transform, n_av)?;
    let (f_free, _) = build_kkt(&assembly).solve(&anchor)?;
    let (lambda, eta) = assembly.unpack(&f_free, &anchor);
    let x0 = assembly.guard_vector(&lambda, &eta);
    let slack = Vector::from_fn(rows, |_, _| rng.random_range(0.1..3.0));
    let inequality_rhs = &inequality * x0 + slack;

    Ok(ForceProblem {
        instance,
        guard: GuardConditions::inequalities_only(inequality, inequality_rhs),
        transform,
        n_av,
    })
}
