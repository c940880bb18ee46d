//! Velocity stage: how many directions to velocity-control, along which
//! axes, and with what magnitudes.
//!
//! The number of velocity commands is the minimum that pins the goal,
//! `n_av = rank([N; G]) − rank(N)`. Their directions are chosen by a
//! multi-start projected gradient descent that keeps the command rows
//! mutually orthogonal and close to `null(N)`; the remaining actuated
//! directions become force-controlled axes. Starts whose rows fail to pin
//! the goal (`rank([N; C]) < rank([N; G])`) are skipped when picking the
//! best one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    canonical_basis, min_norm_solution_with_tol, null_space_basis, numerical_rank, singular_values, vstack, vstack_vec, Matrix,
    SubspaceBasis, Vector, DEFAULT_RANK_TOL,
};
use crate::model::{ensure_valid, transform_matrix, GuardConditions, SystemInstance};

const SINGULAR_TRANSFORM_TOL: f64 = 1e-8;
const GRADIENT_NORM_GUARD: f64 = 1e-12;
const DESCENT_SLACK: f64 = 1e-12;
const MAX_BACKTRACKS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySolverConfig {
    /// Number of random initializations.
    pub num_starts: usize,
    /// Gradient step length.
    pub step_length: f64,
    pub max_iters: usize,
    /// Stop when the parameter change falls below this.
    pub convergence_tol: f64,
    pub rng_seed: u64,
    /// Relative singular-value threshold for every rank decision.
    pub rank_tol: f64,
    /// Skip starts whose command rows leave `rank([N; C]) < rank([N; G])`
    /// before picking the lowest cost.
    pub rank_screen: bool,
}

impl Default for VelocitySolverConfig {
    fn default() -> Self {
        Self {
            num_starts: 3,
            step_length: 10.0,
            max_iters: 200,
            convergence_tol: 1e-8,
            rng_seed: 0,
            rank_tol: DEFAULT_RANK_TOL,
            rank_screen: true,
        }
    }
}

impl VelocitySolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_starts == 0 {
            return Err(Error::InvalidConfig("num_starts must be at least 1".into()));
        }
        if !(self.step_length > 0.0) {
            return Err(Error::InvalidConfig("step_length must be positive".into()));
        }
        if !(self.rank_tol > 0.0) {
            return Err(Error::InvalidConfig("rank_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Rank bookkeeping for the velocity stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dimensions {
    pub n_av_min: usize,
    pub n_av_max: usize,
    pub n_av: usize,
    pub r_n: usize,
    pub r_ng: usize,
}

pub fn compute_dimensions(holonomic: &Matrix, goal: &Matrix, rel_tol: f64) -> Result<Dimensions> {
    if holonomic.ncols() != goal.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "N has {} columns, G has {}",
            holonomic.ncols(),
            goal.ncols()
        )));
    }
    let n = holonomic.ncols();
    let r_n = numerical_rank(holonomic, rel_tol)?;
    let r_ng = numerical_rank(&vstack(holonomic, goal), rel_tol)?;
    let n_av_min = r_ng - r_n;
    Ok(Dimensions {
        n_av_min,
        n_av_max: n - r_n,
        n_av: n_av_min,
        r_n,
        r_ng,
    })
}

/// The actions and constraints together must be able to fully constrain the
/// system: `rank(N) + n_a ≥ n`.
pub fn check_feasibility(n: usize, n_a: usize, r_n: usize) -> bool {
    r_n + n_a >= n
}

/// Orthonormal basis `B_c` of admissible command rows `c`: orthogonal to
/// every vector of `null([N; G])` and zero on the unactuated entries.
pub fn candidate_basis(holonomic: &Matrix, goal: &Matrix, n_u: usize, rel_tol: f64) -> Result<Matrix> {
    let dims = compute_dimensions(holonomic, goal, rel_tol)?;
    let n = holonomic.ncols();
    let goal_null = null_space_basis(&vstack(holonomic, goal), rel_tol)?;

    let mut unactuated = Matrix::zeros(n_u, n);
    unactuated.view_mut((0, 0), (n_u, n_u.min(n))).fill_with_identity();
    let stacked = vstack(&goal_null.basis.transpose(), &unactuated);
    let basis = null_space_basis(&stacked, rel_tol)?.basis;

    if basis.ncols() < dims.n_av || (dims.n_av > 0 && basis.ncols() == 0) {
        return Err(Error::EmptyBasis {
            available: basis.ncols(),
            required: dims.n_av,
        });
    }
    Ok(basis)
}

/// Direction cost `Σ_{i≠j} |c_iᵀc_j| − Σ_i ‖Null(N)ᵀ c_i‖` with `c_i = B_c k_i`.
pub fn direction_cost(k: &Matrix, b_c: &Matrix, null_n: &SubspaceBasis) -> f64 {
    let c = b_c * k;
    cost_of_rows(&c, null_n)
}

fn cost_of_rows(c: &Matrix, null_n: &SubspaceBasis) -> f64 {
    let gram = c.transpose() * c;
    let mut cross = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            if i != j {
                cross += gram[(i, j)].abs();
            }
        }
    }
    let proj = null_n.basis.transpose() * c;
    let alignment: f64 = proj.column_iter().map(|col| col.norm()).sum();
    cross - alignment
}

fn direction_gradient(k: &Matrix, b_c: &Matrix, null_n: &SubspaceBasis) -> Matrix {
    let c = b_c * k;
    let gram = c.transpose() * &c;
    let p = &null_n.basis;
    let mut grad_c = Matrix::zeros(c.nrows(), c.ncols());
    for i in 0..c.ncols() {
        let mut g = Vector::zeros(c.nrows());
        for j in 0..c.ncols() {
            if i != j {
                // (i,j) and (j,i) both contribute.
                let s = gram[(i, j)];
                let sign = if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                g += c.column(j) * (2.0 * sign);
            }
        }
        let proj = p.transpose() * c.column(i);
        let norm = proj.norm();
        if norm >= GRADIENT_NORM_GUARD {
            g -= p * proj / norm;
        }
        grad_c.set_column(i, &g);
    }
    b_c.transpose() * grad_c
}

/// Rescale every column so that `‖B_c k_i‖ = 1`.
fn project_columns(k: &mut Matrix, b_c: &Matrix) {
    for mut col in k.column_iter_mut() {
        let norm = (b_c * &col).norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
}

/// Result of one projected-gradient run.
#[derive(Clone, Debug, PartialEq)]
pub struct PgdRun {
    pub k: Matrix,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every accepted projected step, starting with the projected
    /// initialization.
    pub history: Vec<f64>,
}

fn start_rng(seed: u64, start_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(start_index as u64))
}

/// Random initialization for start `start_index`, already projected.
pub fn initial_coefficients(b_c: &Matrix, n_av: usize, seed: u64, start_index: usize) -> Matrix {
    let mut rng = start_rng(seed, start_index);
    let n_c = b_c.ncols();
    loop {
        let mut k = Matrix::from_fn(n_c, n_av, |_, _| StandardNormal.sample(&mut rng));
        if k.column_iter().all(|col| (b_c * col).norm() > 1e-6) {
            project_columns(&mut k, b_c);
            return k;
        }
    }
}

/// Projected gradient descent on the direction cost from one random start.
///
/// Each iteration takes the configured step, projects back onto
/// `‖B_c k_i‖ = 1`, and halves the step while the projected cost would rise.
pub fn projected_gradient_descent(
    b_c: &Matrix,
    null_n: &SubspaceBasis,
    n_av: usize,
    config: &VelocitySolverConfig,
    start_index: usize,
) -> PgdRun {
    assert!(
        b_c.ncols() > 0 && n_av > 0,
        "projected_gradient_descent needs a nonempty basis and n_av >= 1"
    );
    let mut k = initial_coefficients(b_c, n_av, config.rng_seed, start_index);
    let mut cost = direction_cost(&k, b_c, null_n);
    let initial_cost = cost;
    let mut history = vec![cost];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let grad = direction_gradient(&k, b_c, null_n);
        let mut step = config.step_length;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let mut trial = &k - &grad * step;
            project_columns(&mut trial, b_c);
            let trial_cost = direction_cost(&trial, b_c, null_n);
            if trial_cost <= cost + DESCENT_SLACK {
                accepted = Some((trial, trial_cost));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            converged = true;
            break;
        };
        let change = (&next - &k).norm();
        k = next;
        cost = next_cost.min(cost);
        history.push(next_cost);
        if change < config.convergence_tol {
            converged = true;
            break;
        }
    }

    PgdRun {
        k,
        cost,
        initial_cost,
        iterations,
        converged,
        history,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySolution {
    pub dims: Dimensions,
    /// Velocity command rows `C` (`n_av × n`).
    pub c: Matrix,
    /// Command magnitudes `b_C = w_av = C v*`.
    pub b_c: Vector,
    pub transform: Matrix,
    pub r_a: Matrix,
    pub n_av: usize,
    pub cost: f64,
    pub per_start_costs: Vec<f64>,
    pub selected_start: Option<usize>,
    /// Starts skipped by the rank screen.
    pub rejected_starts: Vec<usize>,
    pub converged: bool,
    /// The particular goal-consistent velocity `v*` used for `b_C`.
    pub particular_velocity: Vector,
}

impl VelocitySolution {
    pub fn n_af(&self) -> usize {
        self.r_a.nrows() - self.n_av
    }
}

/// Expand the command block `R_C` (`n_av × n_a`) into an invertible `R_a` by
/// stacking an orthonormal basis of `null(R_C)` above it.
pub fn expand_actuated_rotation(r_c: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let n_a = r_c.ncols();
    let null = null_space_basis(r_c, rel_tol)?;
    let complement = canonical_basis(&null.basis);
    let r_a = vstack(&complement.transpose(), r_c);
    if r_a.nrows() != n_a {
        return Err(Error::SingularTransform(0.0));
    }
    let smallest = singular_values(&r_a).last().copied().unwrap_or(1.0);
    if n_a > 0 && smallest <= SINGULAR_TRANSFORM_TOL {
        return Err(Error::SingularTransform(smallest));
    }
    Ok(r_a)
}

/// Unit-norm command rows `C = (B_c K)ᵀ` with the unactuated columns zeroed.
fn command_rows(b_c: &Matrix, k: &Matrix, n_u: usize) -> Matrix {
    let mut c = (b_c * k).transpose();
    c.columns_mut(0, n_u).fill(0.0);
    for mut row in c.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    c
}

pub fn solve_velocity(instance: &SystemInstance, config: &VelocitySolverConfig) -> Result<VelocitySolution> {
    config.validate()?;
    ensure_valid(instance, &GuardConditions::empty(instance.n_phi() + instance.n()))?;
    let n = instance.n();
    let n_u = instance.n_u;
    let tol = config.rank_tol;

    let dims = compute_dimensions(&instance.holonomic, &instance.goal, tol)?;
    if !check_feasibility(n, instance.n_a, dims.r_n) {
        return Err(Error::InfeasibleDimensions {
            n,
            n_a: instance.n_a,
            r_n: dims.r_n,
        });
    }

    let stacked = vstack(&instance.holonomic, &instance.goal);
    let rhs = vstack_vec(&Vector::zeros(instance.n_phi()), &instance.goal_rhs);
    let v_star = match min_norm_solution_with_tol(&stacked, &rhs, tol) {
        Ok(v) => v,
        Err(Error::InconsistentSystem { residual, .. }) => return Err(Error::InconsistentGoal { residual }),
        Err(e) => return Err(e),
    };

    if dims.n_av == 0 {
        let r_a = Matrix::identity(instance.n_a, instance.n_a);
        return Ok(VelocitySolution {
            dims,
            c: Matrix::zeros(0, n),
            b_c: Vector::zeros(0),
            transform: transform_matrix(n_u, &r_a),
            r_a,
            n_av: 0,
            cost: 0.0,
            per_start_costs: Vec::new(),
            selected_start: None,
            rejected_starts: Vec::new(),
            converged: true,
            particular_velocity: v_star,
        });
    }

    let b_c = candidate_basis(&instance.holonomic, &instance.goal, n_u, tol)?;
    let null_n = null_space_basis(&instance.holonomic, tol)?;

    let runs: Vec<PgdRun> = (0..config.num_starts)
        .map(|s| projected_gradient_descent(&b_c, &null_n, dims.n_av, config, s))
        .collect();
    let per_start_costs: Vec<f64> = runs.iter().map(|r| r.cost).collect();
    let commands: Vec<Matrix> = runs.iter().map(|r| command_rows(&b_c, &r.k, n_u)).collect();
    let mut rejected_starts = Vec::new();
    if config.rank_screen {
        for (i, c) in commands.iter().enumerate() {
            if numerical_rank(&vstack(&instance.holonomic, c), tol)? != dims.r_ng {
                rejected_starts.push(i);
            }
        }
    }
    // When every start is rejected, fall back to the plain lowest cost.
    let eligible: Vec<usize> = if rejected_starts.len() == runs.len() {
        (0..runs.len()).collect()
    } else {
        (0..runs.len()).filter(|i| !rejected_starts.contains(i)).collect()
    };
    let mut best = eligible[0];
    for &i in &eligible[1..] {
        if runs[i].cost < runs[best].cost - 1e-12 {
            best = i;
        }
    }
    let run = &runs[best];
    let mut c = commands[best].clone();

    // Orient each command so its magnitude is non-negative.
    let mut b = &c * &v_star;
    let scale = 1e-12 * (1.0 + instance.goal_rhs.norm());
    for i in 0..c.nrows() {
        if b[i] < -scale {
            c.row_mut(i).neg_mut();
            b[i] = -b[i];
        }
    }

    let r_c = c.columns(n_u, instance.n_a).into_owned();
    let r_a = expand_actuated_rotation(&r_c, tol)?;
    let cost = cost_of_rows(&c.transpose(), &null_n);

    Ok(VelocitySolution {
        dims,
        transform: transform_matrix(n_u, &r_a),
        r_a,
        n_av: dims.n_av,
        c,
        b_c: b,
        cost,
        per_start_costs,
        selected_start: Some(best),
        rejected_starts,
        converged: run.converged,
        particular_velocity: v_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis_from(cols: &[&[f64]]) -> SubspaceBasis {
        let n = cols[0].len();
        let mut m = Matrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, &Vector::from_column_slice(c));
        }
        SubspaceBasis {
            basis: m,
            source_rank: n - cols.len(),
            tolerance_used: 1e-8,
        }
    }

    #[test]
    fn dimensions_unconstrained() {
        let d = compute_dimensions(&Matrix::zeros(0, 4), &Matrix::identity(4, 4), 1e-8).unwrap();
        assert_eq!(d.n_av, 4);
        assert_eq!(d.r_n, 0);
        assert_eq!(d.n_av_max, 4);
    }

    #[test]
    fn dimensions_goal_implied_by_constraints() {
        let n = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let g = Matrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let d = compute_dimensions(&n, &g, 1e-8).unwrap();
        assert_eq!(d.n_av, 0);
        assert!(d.n_av_min <= d.n_av_max);
    }

    #[test]
    fn feasibility_examples() {
        assert!(check_feasibility(9, 3, 6));
        assert!(!check_feasibility(9, 3, 5));
        assert!(check_feasibility(4, 4, 0));
    }

    #[test]
    fn candidate_basis_unconstrained_spans_everything() {
        let b = candidate_basis(&Matrix::zeros(0, 3), &Matrix::identity(3, 3), 0, 1e-8).unwrap();
        assert_eq!(b.ncols(), 3);
        assert_relative_eq!(b.transpose() * &b, Matrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn candidate_basis_nothing_actuated() {
        let err = candidate_basis(&Matrix::zeros(0, 3), &Matrix::identity(3, 3), 3, 1e-8).unwrap_err();
        assert!(matches!(
            err,
            Error::EmptyBasis {
                available: 0,
                required: 3
            }
        ));
    }

    #[test]
    fn cost_examples() {
        let null_n = basis_from(&[&[1.0, 0.0, 0.0]]);
        let b_c = Matrix::identity(3, 3);
        let k_in = Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_relative_eq!(direction_cost(&k_in, &b_c, &null_n), -1.0, epsilon = 1e-15);
        let k_out = Matrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert_relative_eq!(direction_cost(&k_out, &b_c, &null_n), 0.0, epsilon = 1e-15);
        let k_dup = Matrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(direction_cost(&k_dup, &b_c, &null_n), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_kinks() {
        let null_n = basis_from(&[&[0.6, 0.0, 0.8, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        let b_c = Matrix::identity(4, 4);
        let k = Matrix::from_column_slice(4, 2, &[0.3, -0.2, 0.5, 0.7, -0.1, 0.4, 0.9, 0.2]);
        let grad = direction_gradient(&k, &b_c, &null_n);
        let h = 1e-6;
        for idx in 0..k.len() {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp[idx] += h;
            km[idx] -= h;
            let fd = (direction_cost(&kp, &b_c, &null_n) - direction_cost(&km, &b_c, &null_n)) / (2.0 * h);
            assert_relative_eq!(grad[idx], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn one_dimensional_basis_converges_immediately() {
        let b_c = Matrix::from_column_slice(3, 1, &[0.0, 0.6, 0.8]);
        let null_n = basis_from(&[&[0.0, 1.0, 0.0]]);
        let config = VelocitySolverConfig::default();
        let run = projected_gradient_descent(&b_c, &null_n, 1, &config, 0);
        assert_relative_eq!(run.k[0].abs(), 1.0, epsilon = 1e-12);
        assert!(run.converged);
        assert_relative_eq!(run.cost, -0.6, epsilon = 1e-12);
    }

    #[test]
    fn pure_velocity_servo() {
        let v_des = Vector::from_vec(vec![0.1, -0.2, 0.3]);
        let inst = SystemInstance::new(
            0,
            3,
            Matrix::zeros(0, 3),
            Matrix::identity(3, 3),
            v_des.clone(),
            Vector::zeros(3),
        );
        let sol = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
        assert_eq!(sol.n_av, 3);
        let v = sol.c.clone().lu().solve(&sol.b_c).unwrap();
        assert_relative_eq!(v, v_des, epsilon = 1e-8);
        assert!(sol.b_c.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn goal_implied_gives_pure_force_action() {
        let n = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = Matrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let inst = SystemInstance::new(1, 1, n, g, Vector::zeros(1), Vector::zeros(2));
        let sol = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
        assert_eq!(sol.n_av, 0);
        assert_eq!(sol.r_a, Matrix::identity(1, 1));
        assert_eq!(sol.c.nrows(), 0);
    }

    #[test]
    fn infeasible_dimensions_reported() {
        // Two free dofs, one actuated, no constraints.
        let inst = SystemInstance::new(
            2,
            1,
            Matrix::zeros(0, 3),
            Matrix::identity(3, 3),
            Vector::zeros(3),
            Vector::zeros(3),
        );
        let err = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDimensions { n: 3, n_a: 1, r_n: 0 }));
    }

    #[test]
    fn inconsistent_goal_reported() {
        let n = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let inst = SystemInstance::new(1, 1, n, g, Vector::from_vec(vec![1.0]), Vector::zeros(2));
        let err = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InconsistentGoal { .. }));
    }

    #[test]
    fn zero_starts_rejected() {
        let config = VelocitySolverConfig {
            num_starts: 0,
            ..Default::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn rank_screen_skips_degenerate_minimum() {
        // For this instance the lowest cost over 20 starts belongs to rows
        // whose null(N) projections are dependent.
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(1054);
        let n = rng.random_range(4..=12);
        let inst = crate::random::random_feasible_instance(&mut rng, n);
        let rank_nc = |sol: &VelocitySolution| numerical_rank(&vstack(&inst.holonomic, &sol.c), 1e-8).unwrap();

        let plain = VelocitySolverConfig {
            num_starts: 20,
            rank_screen: false,
            ..Default::default()
        };
        let sol = solve_velocity(&inst, &plain).unwrap();
        assert!(rank_nc(&sol) < sol.dims.r_ng);

        let screened = VelocitySolverConfig {
            num_starts: 20,
            ..Default::default()
        };
        let sol = solve_velocity(&inst, &screened).unwrap();
        assert_eq!(rank_nc(&sol), sol.dims.r_ng);
        assert!(!sol.rejected_starts.is_empty());
        assert!(!sol.rejected_starts.contains(&sol.selected_start.unwrap()));
    }
}
