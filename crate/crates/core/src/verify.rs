//! Checks of solver outputs against the defining conditions, recomputed from
//! the raw instance. Nothing here reads solver intermediates: the velocity
//! check only sees `C` and `w_av`, the force check only sees `λ` and `η`, and
//! the grid oracle obtains free forces from a pseudo-inverse rather than the
//! KKT route used by the solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::force::ForceSolution;
use crate::linalg::{
    min_norm_solution_with_tol, null_space_basis, numerical_rank, vstack, vstack_vec, Matrix, Vector, DEFAULT_RANK_TOL,
};
use crate::model::{GuardConditions, HybridAction, SystemInstance};
use crate::velocity::VelocitySolution;

/// Tolerance of the subspace and residual checks.
pub const CHECK_TOL: f64 = 1e-6;

/// Guard margins above `-MARGIN_TOL` count as satisfied.
pub const MARGIN_TOL: f64 = 1e-8;

pub const CONSTANCY_SAMPLES: usize = 32;

pub const DEFAULT_GRID_RESOLUTION: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubspaceCheck {
    pub passed: bool,
    pub rank_nc: usize,
    pub rank_ng: usize,
    /// Largest `‖G v‖` over the unit basis vectors of `null([N;C])`.
    pub null_residual: f64,
    /// Worst cross-satisfaction error between the two particular solutions.
    pub cross_residual: f64,
    /// Worst relative variation of `C v` over sampled goal-consistent `v`.
    pub constancy_residual: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForceCheck {
    pub passed: bool,
    /// `‖T Nᵀ λ + η + T F‖`.
    pub newton_residual: f64,
    /// `‖H T⁻¹ η‖`, the unactuated force that must vanish.
    pub unactuated_residual: f64,
    pub guard_equality_residual: f64,
    pub guard_margins: Vec<f64>,
    pub min_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub subspace_equality: SubspaceCheck,
    pub newton_residual: f64,
    pub unactuated_residual: f64,
    pub guard_equality_residual: f64,
    pub guard_margins: Vec<f64>,
    pub velocity_command_consistency: f64,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(velocity: SubspaceCheck, force: ForceCheck) -> Self {
        let mut notes = velocity.notes.clone();
        if !force.passed {
            notes.push(format!(
                "force check failed: newton {:.3e}, unactuated {:.3e}, min margin {:.3e}",
                force.newton_residual, force.unactuated_residual, force.min_margin
            ));
        }
        Self {
            passed: velocity.passed && force.passed,
            newton_residual: force.newton_residual,
            unactuated_residual: force.unactuated_residual,
            guard_equality_residual: force.guard_equality_residual,
            guard_margins: force.guard_margins,
            velocity_command_consistency: velocity.constancy_residual,
            subspace_equality: velocity,
            notes,
        }
    }
}

pub fn check_velocity_solution(instance: &SystemInstance, sol: &VelocitySolution) -> SubspaceCheck {
    check_velocity_command(instance, &sol.c, &sol.b_c, DEFAULT_RANK_TOL)
}

/// `{N v = 0, C v = w_av}` and `{N v = 0, G v = b_G}` must have the same
/// solution set.
pub fn check_velocity_command(instance: &SystemInstance, c: &Matrix, w_av: &Vector, rank_tol: f64) -> SubspaceCheck {
    let n_mat = &instance.holonomic;
    let n_phi = n_mat.nrows();
    let mut notes = Vec::new();
    let failed = |notes: Vec<String>, msg: String| SubspaceCheck {
        passed: false,
        rank_nc: 0,
        rank_ng: 0,
        null_residual: f64::INFINITY,
        cross_residual: f64::INFINITY,
        constancy_residual: f64::INFINITY,
        notes: [notes, vec![msg]].concat(),
    };
    if c.ncols() != instance.n() || c.nrows() != w_av.len() {
        return failed(
            notes,
            format!("command has shape {}x{} with {} magnitudes", c.nrows(), c.ncols(), w_av.len()),
        );
    }
    if c.nrows() == 0 {
        notes.push("no velocity-controlled directions; checks are vacuous".into());
    }

    let nc = vstack(n_mat, c);
    let ng = vstack(n_mat, &instance.goal);
    let (rank_nc, rank_ng) = match (numerical_rank(&nc, rank_tol), numerical_rank(&ng, rank_tol)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return failed(notes, "rank computation failed on non-finite input".into()),
    };
    if rank_nc != rank_ng {
        notes.push(format!("rank mismatch: rank([N;C]) = {rank_nc}, rank([N;G]) = {rank_ng}"));
    }

    let g_scale = 1.0 + instance.goal.amax();
    let null_nc = null_space_basis(&nc, rank_tol).expect("finite input").basis;
    let null_residual = (0..null_nc.ncols())
        .map(|j| (&instance.goal * null_nc.column(j)).norm() / g_scale)
        .fold(0.0, f64::max);
    if null_residual > CHECK_TOL {
        notes.push(format!("null([N;C]) leaves the goal set: {null_residual:.3e}"));
    }

    let rhs_g = vstack_vec(&Vector::zeros(n_phi), &instance.goal_rhs);
    let rhs_c = vstack_vec(&Vector::zeros(n_phi), w_av);
    let v_g = min_norm_solution_with_tol(&ng, &rhs_g, rank_tol);
    let v_c = min_norm_solution_with_tol(&nc, &rhs_c, rank_tol);
    let cross_residual = match (&v_g, &v_c) {
        (Ok(v_g), Ok(v_c)) => {
            let a = (&nc * v_g - &rhs_c).amax() / (1.0 + w_av.amax());
            let b = (&ng * v_c - &rhs_g).amax() / (1.0 + instance.goal_rhs.amax());
            a.max(b)
        }
        _ => f64::INFINITY,
    };
    if cross_residual > CHECK_TOL {
        notes.push(format!("particular solutions do not cross-satisfy: {cross_residual:.3e}"));
    }

    let constancy_residual = match &v_g {
        Ok(v_g) => constancy(&ng, c, w_av, v_g, rank_tol),
        Err(_) => f64::INFINITY,
    };
    if constancy_residual > CHECK_TOL {
        notes.push(format!("C v varies over the goal set: {constancy_residual:.3e}"));
    }

    SubspaceCheck {
        passed: rank_nc == rank_ng
            && null_residual <= CHECK_TOL
            && cross_residual <= CHECK_TOL
            && constancy_residual <= CHECK_TOL,
        rank_nc,
        rank_ng,
        null_residual,
        cross_residual,
        constancy_residual,
        notes,
    }
}

fn constancy(ng: &Matrix, c: &Matrix, w_av: &Vector, v_g: &Vector, rank_tol: f64) -> f64 {
    if c.nrows() == 0 {
        return 0.0;
    }
    let sigma = null_space_basis(ng, rank_tol).expect("finite input").basis;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let scale = 1.0 + v_g.norm();
    let mut worst: f64 = 0.0;
    for _ in 0..CONSTANCY_SAMPLES {
        let xi = Vector::from_fn(sigma.ncols(), |_, _| StandardNormal.sample(&mut rng));
        let xi = if xi.norm() > 0.0 { xi.normalize() * scale } else { xi };
        let v = v_g + &sigma * xi;
        worst = worst.max((c * &v - w_av).amax() / (1.0 + v.norm()));
    }
    worst
}

pub fn check_force_solution(
    instance: &SystemInstance,
    guard: &GuardConditions,
    transform: &Matrix,
    sol: &ForceSolution,
) -> ForceCheck {
    check_forces(instance, guard, transform, &sol.lambda, &sol.eta)
}

pub fn check_action(instance: &SystemInstance, guard: &GuardConditions, action: &HybridAction) -> ForceCheck {
    check_forces(instance, guard, &action.transform, &action.lambda, &action.eta)
}

/// Equilibrium, unactuated-force, guard-equality and guard-inequality
/// residuals of `(λ, η)` under the action frame `T`.
pub fn check_forces(
    instance: &SystemInstance,
    guard: &GuardConditions,
    transform: &Matrix,
    lambda: &Vector,
    eta: &Vector,
) -> ForceCheck {
    let n = instance.n();
    let bad = ForceCheck {
        passed: false,
        newton_residual: f64::INFINITY,
        unactuated_residual: f64::INFINITY,
        guard_equality_residual: f64::INFINITY,
        guard_margins: Vec::new(),
        min_margin: f64::NEG_INFINITY,
    };
    if transform.shape() != (n, n) || eta.len() != n || lambda.len() != instance.n_phi() {
        return bad;
    }
    let Some(f) = transform.clone().lu().solve(eta) else {
        return bad;
    };

    let newton = transform * instance.holonomic.transpose() * lambda + eta + transform * &instance.external_force;
    let newton_residual = newton.norm();
    let unactuated_residual = f.rows(0, instance.n_u).norm();
    let stacked = vstack_vec(lambda, &f);
    let guard_equality_residual = if guard.equality.nrows() > 0 {
        (&guard.equality * &stacked - &guard.equality_rhs).norm()
    } else {
        0.0
    };
    let margins = if guard.inequality.nrows() > 0 {
        &guard.inequality_rhs - &guard.inequality * &stacked
    } else {
        Vector::zeros(0)
    };
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let finite = newton_residual.is_finite() && margins.iter().all(|m| m.is_finite());
    ForceCheck {
        passed: finite
            && newton_residual <= CHECK_TOL
            && unactuated_residual <= CHECK_TOL
            && guard_equality_residual <= CHECK_TOL
            && min_margin >= -MARGIN_TOL,
        newton_residual,
        unactuated_residual,
        guard_equality_residual,
        guard_margins: margins.iter().copied().collect(),
        min_margin,
    }
}

/// Minimum-norm `x` with `M x = r`, by SVD pseudo-inverse.
pub fn min_norm_projection_oracle(m: &Matrix, rhs: &Vector) -> Vector {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vector::zeros(m.ncols());
    }
    let eps = 1e-10 * m.amax();
    m.clone().pseudo_inverse(eps).expect("eps is non-negative") * rhs
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridOracleResult {
    /// Best worst-case guard margin over the grid, `-∞` when no grid point
    /// admits equilibrium.
    pub best_margin: f64,
    pub best_eta_af: Vec<f64>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Exhaustive search of `η_af` over a grid on `[−f_max, f_max]^{n_af}`.
///
/// At every grid point the free forces are the minimum-norm solution of the
/// equilibrium rows, computed from the raw instance with a pseudo-inverse.
/// Points where equilibrium cannot be met are skipped.
pub fn brute_force_force_oracle(
    instance: &SystemInstance,
    guard: &GuardConditions,
    transform: &Matrix,
    n_av: usize,
    f_max: f64,
    resolution: f64,
) -> Result<GridOracleResult> {
    let n = instance.n();
    let n_u = instance.n_u;
    let n_phi = instance.n_phi();
    if n_av > instance.n_a || transform.shape() != (n, n) {
        return Err(Error::DimensionMismatch("grid oracle: bad transform or n_av".into()));
    }
    let n_af = instance.n_a - n_av;
    if n_af > 3 {
        return Err(Error::InvalidConfig(format!("grid oracle supports n_af <= 3, got {n_af}")));
    }
    if !(resolution > 0.0 && f_max > 0.0) {
        return Err(Error::InvalidConfig("grid resolution and f_max must be positive".into()));
    }
    let tinv = transform.clone().try_inverse().ok_or(Error::SingularTransform(0.0))?;

    // Unknowns x = [λ; η]; rows: f_u = 0, equilibrium, guard equalities.
    let n_gamma = guard.equality.nrows();
    let rows = n_u + n + n_gamma;
    let mut e = Matrix::zeros(rows, n_phi + n);
    let mut rhs = Vector::zeros(rows);
    e.view_mut((0, n_phi), (n_u, n)).copy_from(&tinv.rows(0, n_u));
    e.view_mut((n_u, 0), (n, n_phi))
        .copy_from(&(transform * instance.holonomic.transpose()));
    e.view_mut((n_u, n_phi), (n, n)).fill_with_identity();
    rhs.rows_mut(n_u, n).copy_from(&(-(transform * &instance.external_force)));
    if n_gamma > 0 {
        e.view_mut((n_u + n, 0), (n_gamma, n_phi))
            .copy_from(&guard.equality.columns(0, n_phi));
        e.view_mut((n_u + n, n_phi), (n_gamma, n))
            .copy_from(&(guard.equality.columns(n_phi, n) * &tinv));
        rhs.rows_mut(n_u + n, n_gamma).copy_from(&guard.equality_rhs);
    }
    let af_cols: Vec<usize> = (n_phi + n_u..n_phi + n_u + n_af).collect();
    let free_cols: Vec<usize> = (0..n_phi + n).filter(|c| !af_cols.contains(c)).collect();
    let e_free = e.select_columns(&free_cols);
    let e_af = e.select_columns(&af_cols);

    // Everything below is affine in η_af: evaluate at 0 and the unit axes.
    let pinv = if e_free.ncols() > 0 && rows > 0 {
        e_free
            .clone()
            .pseudo_inverse(1e-10 * e_free.amax().max(1e-300))
            .expect("eps is non-negative")
    } else {
        Matrix::zeros(e_free.ncols(), rows)
    };
    let x_at = |eta_af: &Vector| -> Vector {
        let free = &pinv * (&rhs - &e_af * eta_af);
        let mut x = Vector::zeros(n_phi + n);
        for (k, &c) in free_cols.iter().enumerate() {
            x[c] = free[k];
        }
        for (k, &c) in af_cols.iter().enumerate() {
            x[c] = eta_af[k];
        }
        x
    };
    let to_guard = |x: &Vector| -> Vector {
        let lambda = x.rows(0, n_phi).into_owned();
        let f = &tinv * x.rows(n_phi, n);
        vstack_vec(&lambda, &f)
    };
    let x0 = x_at(&Vector::zeros(n_af));
    let res0 = &e * &x0 - &rhs;
    let g0 = to_guard(&x0);
    let mut res_lin = Matrix::zeros(rows, n_af);
    let mut guard_lin = Matrix::zeros(g0.len(), n_af);
    for i in 0..n_af {
        let mut unit = Vector::zeros(n_af);
        unit[i] = 1.0;
        let xi = x_at(&unit);
        res_lin.set_column(i, &(&e * &xi - &rhs - &res0));
        guard_lin.set_column(i, &(to_guard(&xi) - &g0));
    }
    let margin0 = guard.margins(&g0);
    let margin_lin = if guard.inequality.nrows() > 0 {
        -(&guard.inequality * &guard_lin)
    } else {
        Matrix::zeros(0, n_af)
    };
    let res_tol = CHECK_TOL * (1.0 + rhs.norm());

    let per_axis = (2.0 * f_max / resolution).floor() as usize + 1;
    let total = per_axis.pow(n_af as u32);
    let mut best = GridOracleResult {
        best_margin: f64::NEG_INFINITY,
        best_eta_af: Vec::new(),
        evaluated: 0,
        skipped: 0,
    };
    let mut eta = Vector::zeros(n_af);
    for index in 0..total {
        let mut rest = index;
        for i in 0..n_af {
            eta[i] = -f_max + resolution * (rest % per_axis) as f64;
            rest /= per_axis;
        }
        if (&res0 + &res_lin * &eta).norm() > res_tol {
            best.skipped += 1;
            continue;
        }
        best.evaluated += 1;
        let margin = if margin0.is_empty() {
            // Without guard rows the margin is the distance to the box.
            eta.iter().map(|x| f_max - x.abs()).fold(f_max, f64::min)
        } else {
            (&margin0 + &margin_lin * &eta).min()
        };
        if margin > best.best_margin {
            best.best_margin = margin;
            best.best_eta_af = eta.iter().copied().collect();
        }
    }
    Ok(best)
}
