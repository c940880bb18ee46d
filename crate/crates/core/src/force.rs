//! Force stage: with the action frame `T` fixed, choose the force command
//! `η_af` so that the reaction forces implied by quasi-static equilibrium
//! satisfy the guard conditions with the largest possible margin.
//!
//! For a given `η_af` the free forces `f_free = [λ; η_u; η_av]` are the
//! minimum-norm solution of the stacked equilibrium equations, obtained from
//! a KKT system. The KKT equalities are embedded in a linear program over
//! `(f_free, f*_free, η_af, s)` that maximizes the worst guard margin `s`
//! subject to a box bound on `η_af`; a second pass keeps that margin and
//! returns the command with the smallest `‖η_af‖₁`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs, min_norm_solution_with_tol, null_space_basis, row_space_basis, singular_values, solve_square, vstack_vec, Matrix,
    Vector, DEFAULT_RANK_TOL,
};
use crate::model::{ensure_valid, GuardConditions, SystemInstance};

/// A solution whose best margin is below `-FEASIBILITY_TOL` is reported as
/// infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-8;

const MAX_TRANSFORM_CONDITION: f64 = 1e10;

#[derive(Clone, Debug, PartialEq)]
pub struct ForceSolverConfig {
    /// Box bound `‖η_af‖_∞ ≤ f_max`, in Newtons (or Newton-meters).
    pub f_max: f64,
    pub rank_tol: f64,
}

impl Default for ForceSolverConfig {
    fn default() -> Self {
        Self {
            f_max: 50.0,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Which force quantity a column of `M_free` acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeForce {
    Reaction(usize),
    Unactuated(usize),
    VelocityAxis(usize),
}

/// Stacked equilibrium equations partitioned into free forces and the
/// force command: `M_free f_free + M_eta_f η_af = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonAssembly {
    pub m_free: Matrix,
    pub m_eta_f: Matrix,
    pub rhs: Vector,
    pub layout: Vec<FreeForce>,
    pub n_phi: usize,
    pub n_u: usize,
    pub n_af: usize,
    pub n_av: usize,
    /// `T⁻¹`, kept to map transformed forces back to `f`.
    pub transform_inv: Matrix,
}

impl NewtonAssembly {
    pub fn n_free(&self) -> usize {
        self.m_free.ncols()
    }

    /// Split `f_free` and `η_af` into `(λ, η)`.
    pub fn unpack(&self, f_free: &Vector, eta_af: &Vector) -> (Vector, Vector) {
        let lambda = f_free.rows(0, self.n_phi).into_owned();
        let eta_u = f_free.rows(self.n_phi, self.n_u);
        let eta_av = f_free.rows(self.n_phi + self.n_u, self.n_av);
        let eta = Vector::from_iterator(
            self.n_u + self.n_af + self.n_av,
            eta_u.iter().chain(eta_af.iter()).chain(eta_av.iter()).copied(),
        );
        (lambda, eta)
    }

    /// Stacked `[λ; f]` with `f = T⁻¹ η`, the vector the guards act on.
    pub fn guard_vector(&self, lambda: &Vector, eta: &Vector) -> Vector {
        vstack_vec(lambda, &(&self.transform_inv * eta))
    }
}

/// Write equilibrium, `f_u = 0` and the guard equalities in the transformed
/// force space and partition the columns into free forces and `η_af`.
pub fn assemble_newton(
    instance: &SystemInstance,
    guard: &GuardConditions,
    transform: &Matrix,
    n_av: usize,
) -> Result<NewtonAssembly> {
    let n = instance.n();
    let n_u = instance.n_u;
    let n_phi = instance.n_phi();
    if transform.shape() != (n, n) || n_av > instance.n_a {
        return Err(Error::DimensionMismatch(format!(
            "transform is {}x{} with n_av = {n_av}, expected {n}x{n} and n_av <= {}",
            transform.nrows(),
            transform.ncols(),
            instance.n_a
        )));
    }
    let n_af = instance.n_a - n_av;
    let sigma = singular_values(transform);
    let smallest = sigma.last().copied().unwrap_or(1.0);
    if n > 0 && !(smallest > 0.0 && sigma[0] / smallest < MAX_TRANSFORM_CONDITION) {
        return Err(Error::SingularTransform(smallest));
    }
    let transform_inv = transform.clone().try_inverse().ok_or(Error::SingularTransform(smallest))?;

    let n_gamma = guard.equality.nrows();
    let rows = n_u + n + n_gamma;
    let mut full = Matrix::zeros(rows, n_phi + n);
    // f_u = H T⁻¹ η = 0
    let h_tinv = instance.unactuated_selection() * &transform_inv;
    full.view_mut((0, n_phi), (n_u, n)).copy_from(&h_tinv);
    // T Ωᵀ J_Φᵀ λ + η = −T F
    let t_nt = transform * instance.holonomic.transpose();
    full.view_mut((n_u, 0), (n, n_phi)).copy_from(&t_nt);
    full.view_mut((n_u, n_phi), (n, n)).fill_with_identity();
    // Γ_λ λ + Γ_f T⁻¹ η = b_Γ
    if n_gamma > 0 {
        let gamma_l = guard.equality.columns(0, n_phi);
        let gamma_f = guard.equality.columns(n_phi, n) * &transform_inv;
        full.view_mut((n_u + n, 0), (n_gamma, n_phi)).copy_from(&gamma_l);
        full.view_mut((n_u + n, n_phi), (n_gamma, n)).copy_from(&gamma_f);
    }

    let mut rhs = Vector::zeros(rows);
    rhs.rows_mut(n_u, n).copy_from(&(-(transform * &instance.external_force)));
    rhs.rows_mut(n_u + n, n_gamma).copy_from(&guard.equality_rhs);

    let mut free_cols: Vec<usize> = (0..n_phi + n_u).collect();
    free_cols.extend(n_phi + n_u + n_af..n_phi + n);
    let mut layout: Vec<FreeForce> = (0..n_phi).map(FreeForce::Reaction).collect();
    layout.extend((0..n_u).map(FreeForce::Unactuated));
    layout.extend((0..n_av).map(FreeForce::VelocityAxis));

    let m_free = full.select_columns(&free_cols);
    let m_eta_f = full.columns(n_phi + n_u, n_af).into_owned();

    Ok(NewtonAssembly {
        m_free,
        m_eta_f,
        rhs,
        layout,
        n_phi,
        n_u,
        n_af,
        n_av,
        transform_inv,
    })
}

/// KKT system of the minimum-norm free-force problem:
/// `K [f_free; f*_free] = rhs_const + rhs_eta_map · η_af`.
#[derive(Clone, Debug, PartialEq)]
pub struct KktSystem {
    pub k: Matrix,
    pub rhs_const: Vector,
    pub rhs_eta_map: Matrix,
    pub n_free: usize,
}

pub fn build_kkt(assembly: &NewtonAssembly) -> KktSystem {
    let p = assembly.m_free.ncols();
    let m = assembly.m_free.nrows();
    let mut k = Matrix::zeros(p + m, p + m);
    k.view_mut((0, 0), (p, p)).fill_diagonal(2.0);
    k.view_mut((0, p), (p, m)).copy_from(&assembly.m_free.transpose());
    k.view_mut((p, 0), (m, p)).copy_from(&assembly.m_free);

    let rhs_const = vstack_vec(&Vector::zeros(p), &assembly.rhs);
    let mut rhs_eta_map = Matrix::zeros(p + m, assembly.n_af);
    rhs_eta_map
        .view_mut((p, 0), (m, assembly.n_af))
        .copy_from(&(-&assembly.m_eta_f));
    KktSystem {
        k,
        rhs_const,
        rhs_eta_map,
        n_free: p,
    }
}

impl KktSystem {
    /// Free forces and their duals for a given force command.
    pub fn solve(&self, eta_af: &Vector) -> Result<(Vector, Vector)> {
        let rhs = &self.rhs_const + &self.rhs_eta_map * eta_af;
        let sol = solve_square(&self.k, &rhs)?;
        let p = self.n_free;
        Ok((sol.rows(0, p).into_owned(), sol.rows(p, sol.len() - p).into_owned()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceSolution {
    pub eta_af: Vector,
    pub lambda: Vector,
    /// Transformed generalized force `[η_u; η_af; η_av]`.
    pub eta: Vector,
    pub f_free: Vector,
    pub f_free_dual: Vector,
    /// `b_Λ − Λ·[λ; f]`, recomputed after the solve.
    pub guard_margins: Vector,
    /// Optimal worst-case margin `s`.
    pub objective_margin: f64,
    /// `‖T Nᵀ λ + η + T F‖`.
    pub newton_residual: f64,
}

/// Affine parametrization `z = z0 + Z y` of the solutions of the combined
/// KKT equalities in `z = [f_free; f*_free; η_af]`, restricted to directions
/// that move `f_free` or `η_af`.
struct KktFamily {
    z0: Vector,
    dirs: Matrix,
    n_free: usize,
    n_dual: usize,
}

fn kkt_family(assembly: &NewtonAssembly, tol: f64) -> Result<KktFamily> {
    let kkt = build_kkt(assembly);
    let p = kkt.n_free;
    let m = assembly.m_free.nrows();
    let n_af = assembly.n_af;
    // [2I, M_freeᵀ, 0; M_free, 0, M_eta_f] z = [0; rhs]
    let mut a = Matrix::zeros(p + m, p + m + n_af);
    a.view_mut((0, 0), (p + m, p + m)).copy_from(&kkt.k);
    a.view_mut((p, p + m), (m, n_af)).copy_from(&assembly.m_eta_f);

    let z0 = match min_norm_solution_with_tol(&a, &kkt.rhs_const, tol) {
        Ok(z) => z,
        Err(Error::InconsistentSystem { .. }) => {
            return Err(Error::InfeasibleLp {
                margin: f64::NEG_INFINITY,
            })
        }
        Err(e) => return Err(e),
    };
    let null = null_space_basis(&a, tol)?.basis;

    // Drop directions that only move the (possibly non-unique) duals.
    let mut observed = Matrix::zeros(p + n_af, null.ncols());
    observed.view_mut((0, 0), (p, null.ncols())).copy_from(&null.rows(0, p));
    observed
        .view_mut((p, 0), (n_af, null.ncols()))
        .copy_from(&null.rows(p + m, n_af));
    let dirs = if null.ncols() == 0 {
        null
    } else {
        let keep = row_space_basis(&observed, tol)?;
        &null * keep
    };
    Ok(KktFamily {
        z0,
        dirs,
        n_free: p,
        n_dual: m,
    })
}

/// Relative slack on the optimal margin allowed in the effort phase.
const LEXICOGRAPHIC_SLACK: f64 = 1e-9;

/// Margin LP over the family coordinates `y`:
/// `margin(y) = guard_const − guard_lin · y`, `η_af(y) = eta_const + eta_lin · y`.
struct MarginLp<'a> {
    guard_const: &'a Vector,
    guard_lin: &'a Matrix,
    eta_const: &'a Vector,
    eta_lin: &'a Matrix,
    f_max: f64,
}

impl MarginLp<'_> {
    /// Without `floor`, maximize the worst margin `s`. With `floor`, keep
    /// `s ≥ floor` and minimize `‖η_af‖₁` instead, which picks the smallest
    /// command among the (often many) margin-optimal ones.
    fn solve(&self, floor: Option<f64>) -> Result<(Vector, f64)> {
        let d = self.guard_lin.ncols();
        let n_af = self.eta_const.len();
        let no_guards = self.guard_lin.nrows() == 0;
        let free = (f64::NEG_INFINITY, f64::INFINITY);

        let mut lp = Problem::new(match floor {
            None => OptimizationDirection::Maximize,
            Some(_) => OptimizationDirection::Minimize,
        });
        let y: Vec<_> = (0..d).map(|_| lp.add_var(0.0, free)).collect();
        let s = match floor {
            None => lp.add_var(1.0, free),
            Some(lo) => lp.add_var(0.0, (lo, f64::INFINITY)),
        };
        let eta_expr = |i: usize, sign: f64| -> Vec<_> { (0..d).map(|j| (y[j], sign * self.eta_lin[(i, j)])).collect() };

        // margin_r(y) ≥ s
        for r in 0..self.guard_lin.nrows() {
            let mut expr: Vec<_> = (0..d).map(|j| (y[j], self.guard_lin[(r, j)])).collect();
            expr.push((s, 1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, self.guard_const[r]);
        }
        for i in 0..n_af {
            let (c, up, down) = (self.eta_const[i], eta_expr(i, 1.0), eta_expr(i, -1.0));
            lp.add_constraint(up.as_slice(), ComparisonOp::Le, self.f_max - c);
            lp.add_constraint(down.as_slice(), ComparisonOp::Le, self.f_max + c);
            if no_guards {
                // Without guard rows the margin is the distance to the box.
                let mut upper = up.clone();
                upper.push((s, 1.0));
                lp.add_constraint(upper.as_slice(), ComparisonOp::Le, self.f_max - c);
                let mut lower = down.clone();
                lower.push((s, 1.0));
                lp.add_constraint(lower.as_slice(), ComparisonOp::Le, self.f_max + c);
            }
            if floor.is_some() {
                // t_i ≥ |η_af,i|
                let t = lp.add_var(1.0, (0.0, f64::INFINITY));
                let mut upper = up;
                upper.push((t, -1.0));
                lp.add_constraint(upper.as_slice(), ComparisonOp::Le, -c);
                let mut lower = down;
                lower.push((t, -1.0));
                lp.add_constraint(lower.as_slice(), ComparisonOp::Le, c);
            }
        }
        if no_guards {
            lp.add_constraint([(s, 1.0)], ComparisonOp::Le, self.f_max);
        }

        let solution = lp
            .solve()
            .map_err(|e| match e {
                microlp::Error::Infeasible => Error::InfeasibleLp {
                    margin: f64::NEG_INFINITY,
                },
                other => Error::LpFailure(other.to_string()),
            })?
            .into_solution()
            .map_err(|e| Error::LpFailure(format!("{:?}", e.termination_reason())))?;
        let y_val = Vector::from_iterator(d, y.iter().map(|&v| solution.var_value(v)));
        Ok((y_val, solution.var_value(s)))
    }
}

/// Solve the margin-maximizing LP without judging feasibility: the returned
/// `objective_margin` may be negative.
pub fn maximize_guard_margin(
    instance: &SystemInstance,
    guard: &GuardConditions,
    transform: &Matrix,
    n_av: usize,
    config: &ForceSolverConfig,
) -> Result<ForceSolution> {
    if !(config.f_max > 0.0) {
        return Err(Error::InvalidConfig("f_max must be positive".into()));
    }
    ensure_valid(instance, guard)?;
    let assembly = assemble_newton(instance, guard, transform, n_av)?;
    let family = kkt_family(&assembly, config.rank_tol)?;
    let (p, m, n_af) = (family.n_free, family.n_dual, assembly.n_af);

    // Guard vector [λ; f] as an affine function of z.
    let n = instance.n();
    let n_phi = assembly.n_phi;
    let mut to_guard = Matrix::zeros(n_phi + n, p + m + n_af);
    to_guard.view_mut((0, 0), (n_phi, n_phi)).fill_with_identity();
    // f = T⁻¹ η with η = [η_u; η_af; η_av]
    let tinv = &assembly.transform_inv;
    let n_u = assembly.n_u;
    for i in 0..n_u {
        to_guard.view_mut((n_phi, n_phi + i), (n, 1)).copy_from(&tinv.column(i));
    }
    for i in 0..n_af {
        to_guard.view_mut((n_phi, p + m + i), (n, 1)).copy_from(&tinv.column(n_u + i));
    }
    for i in 0..assembly.n_av {
        to_guard
            .view_mut((n_phi, n_phi + n_u + i), (n, 1))
            .copy_from(&tinv.column(n_u + n_af + i));
    }

    let guard_const = guard.margins(&(&to_guard * &family.z0));
    let guard_lin = &guard.inequality * &to_guard * &family.dirs;
    let eta_const = family.z0.rows(p + m, n_af).into_owned();
    let eta_lin = family.dirs.rows(p + m, n_af).into_owned();

    let lp = MarginLp {
        guard_const: &guard_const,
        guard_lin: &guard_lin,
        eta_const: &eta_const,
        eta_lin: &eta_lin,
        f_max: config.f_max,
    };
    let (_, objective_margin) = lp.solve(None)?;
    let floor = objective_margin - LEXICOGRAPHIC_SLACK * (1.0 + objective_margin.abs());
    let (y_val, _) = lp.solve(Some(floor))?;

    let z = &family.z0 + &family.dirs * &y_val;
    let f_free = z.rows(0, p).into_owned();
    let f_free_dual = z.rows(p, m).into_owned();
    let eta_af = z.rows(p + m, n_af).into_owned();
    let (lambda, eta) = assembly.unpack(&f_free, &eta_af);
    let guard_margins = guard.margins(&assembly.guard_vector(&lambda, &eta));
    let newton_residual =
        (transform * instance.holonomic.transpose() * &lambda + &eta + transform * &instance.external_force).norm();

    Ok(ForceSolution {
        eta_af,
        lambda,
        eta,
        f_free,
        f_free_dual,
        guard_margins,
        objective_margin,
        newton_residual,
    })
}

/// Force command maximizing the worst guard margin; fails with
/// [`Error::InfeasibleLp`] when no command keeps every margin non-negative.
pub fn solve_force(
    instance: &SystemInstance,
    guard: &GuardConditions,
    transform: &Matrix,
    n_av: usize,
    config: &ForceSolverConfig,
) -> Result<ForceSolution> {
    let sol = maximize_guard_margin(instance, guard, transform, n_av, config)?;
    if sol.objective_margin < -FEASIBILITY_TOL {
        return Err(Error::InfeasibleLp {
            margin: sol.objective_margin,
        });
    }
    Ok(sol)
}

/// Largest entry of `|M_free f − (rhs − M_eta_f η_af)|`.
pub fn equilibrium_residual(assembly: &NewtonAssembly, f_free: &Vector, eta_af: &Vector) -> f64 {
    let r = &assembly.m_free * f_free + &assembly.m_eta_f * eta_af - &assembly.rhs;
    max_abs(&Matrix::from_column_slice(r.len(), 1, r.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    /// Object (unactuated) resting on a table, a finger (actuated) pressing
    /// on it from above, everything moving vertically. `λ = [λ_table;
    /// λ_finger]`, both positive when the contact pushes.
    fn stacked_blocks(weight: f64) -> SystemInstance {
        let n = Matrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
        let g = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        SystemInstance::new(1, 1, n, g, vec(&[0.0]), vec(&[-weight, 0.0]))
    }

    fn pushing_guards(table_cap: Option<f64>) -> GuardConditions {
        let mut rows = vec![-1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0];
        let mut rhs = vec![-0.5, -0.5];
        if let Some(cap) = table_cap {
            rows.extend([1.0, 0.0, 0.0, 0.0]);
            rhs.push(cap);
        }
        GuardConditions::inequalities_only(Matrix::from_row_slice(rhs.len(), 4, &rows), vec(&rhs))
    }

    fn assembly_from(m_free: Matrix, rhs: Vector) -> NewtonAssembly {
        let p = m_free.ncols();
        NewtonAssembly {
            m_eta_f: Matrix::zeros(m_free.nrows(), 0),
            layout: (0..p).map(FreeForce::Reaction).collect(),
            m_free,
            rhs,
            n_phi: p,
            n_u: 0,
            n_af: 0,
            n_av: 0,
            transform_inv: Matrix::zeros(0, 0),
        }
    }

    #[test]
    fn kkt_with_identity_returns_rhs() {
        let kkt = build_kkt(&assembly_from(Matrix::identity(1, 1), vec(&[3.0])));
        let (f, _) = kkt.solve(&Vector::zeros(0)).unwrap();
        assert_relative_eq!(f, vec(&[3.0]), epsilon = 1e-12);
    }

    #[test]
    fn kkt_with_orthonormal_rows_is_transpose_map() {
        let (c, s) = (0.6, 0.8);
        let m = Matrix::from_row_slice(2, 3, &[c, s, 0.0, 0.0, 0.0, 1.0]);
        let rhs = vec(&[2.0, -1.0]);
        let kkt = build_kkt(&assembly_from(m.clone(), rhs.clone()));
        let (f, _) = kkt.solve(&Vector::zeros(0)).unwrap();
        assert_relative_eq!(f, m.transpose() * rhs, epsilon = 1e-12);
    }

    #[test]
    fn kkt_with_dependent_rows_is_singular() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let kkt = build_kkt(&assembly_from(m, vec(&[1.0, 2.0])));
        assert!(matches!(kkt.solve(&Vector::zeros(0)), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn free_hand_without_contacts_gets_zero_command() {
        let inst = SystemInstance::new(
            1,
            1,
            Matrix::zeros(0, 2),
            Matrix::zeros(0, 2),
            Vector::zeros(0),
            Vector::zeros(2),
        );
        let guard = GuardConditions::empty(2);
        let sol = solve_force(&inst, &guard, &Matrix::identity(2, 2), 0, &ForceSolverConfig::default()).unwrap();
        assert_relative_eq!(sol.eta_af, vec(&[0.0]), epsilon = 1e-12);
        assert_relative_eq!(sol.objective_margin, 50.0, epsilon = 1e-9);
        assert_eq!(sol.lambda.len(), 0);
    }

    #[test]
    fn resting_object_carries_its_weight() {
        // Finger pushes as hard as the box allows: λ_f = 50, λ_t = 52.5.
        let inst = stacked_blocks(2.5);
        let sol = solve_force(
            &inst,
            &pushing_guards(None),
            &Matrix::identity(2, 2),
            0,
            &ForceSolverConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(sol.eta_af, vec(&[-50.0]), epsilon = 1e-7);
        assert_relative_eq!(sol.lambda, vec(&[52.5, 50.0]), epsilon = 1e-7);
        assert_relative_eq!(sol.objective_margin, 49.5, epsilon = 1e-7);
        assert!(sol.newton_residual < 1e-9);
    }

    #[test]
    fn capped_table_force_balances_margins() {
        // min(2 − η, −0.5 − η, 7.5 + η) peaks at η = −4 with s = 3.5.
        let inst = stacked_blocks(2.5);
        let sol = solve_force(
            &inst,
            &pushing_guards(Some(10.0)),
            &Matrix::identity(2, 2),
            0,
            &ForceSolverConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(sol.eta_af, vec(&[-4.0]), epsilon = 1e-7);
        assert_relative_eq!(sol.objective_margin, 3.5, epsilon = 1e-7);
        assert_relative_eq!(sol.guard_margins.min(), 3.5, epsilon = 1e-7);
    }

    #[test]
    fn conflicting_guards_are_infeasible() {
        // min(2 − η, −0.5 − η, −2.4 + η) peaks at η = 0.95 with s = −1.45.
        let inst = stacked_blocks(2.5);
        let guard = pushing_guards(Some(0.1));
        let cfg = ForceSolverConfig::default();
        let raw = maximize_guard_margin(&inst, &guard, &Matrix::identity(2, 2), 0, &cfg).unwrap();
        assert_relative_eq!(raw.objective_margin, -1.45, epsilon = 1e-7);
        let err = solve_force(&inst, &guard, &Matrix::identity(2, 2), 0, &cfg).unwrap_err();
        assert!(matches!(err, Error::InfeasibleLp { margin } if (margin + 1.45).abs() < 1e-7));
    }

    #[test]
    fn assembly_rows_reproduce_equilibrium() {
        let inst = stacked_blocks(2.5);
        let guard = pushing_guards(None);
        let asm = assemble_newton(&inst, &guard, &Matrix::identity(2, 2), 0).unwrap();
        assert_eq!(asm.m_free.shape(), (3, 3));
        assert_eq!(
            asm.layout,
            vec![FreeForce::Reaction(0), FreeForce::Reaction(1), FreeForce::Unactuated(0)]
        );
        // λ_t = 3.5, λ_f = 1, η = [0, −1]
        assert!(equilibrium_residual(&asm, &vec(&[3.5, 1.0, 0.0]), &vec(&[-1.0])) < 1e-12);
        assert!(equilibrium_residual(&asm, &vec(&[3.0, 1.0, 0.0]), &vec(&[-1.0])) > 0.1);
    }

    #[test]
    fn rejects_singular_transform() {
        let inst = stacked_blocks(2.5);
        let t = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            assemble_newton(&inst, &pushing_guards(None), &t, 0),
            Err(Error::SingularTransform(_))
        ));
    }

    #[test]
    fn rejects_bad_box() {
        let inst = stacked_blocks(2.5);
        let cfg = ForceSolverConfig {
            f_max: 0.0,
            ..Default::default()
        };
        assert!(solve_force(&inst, &pushing_guards(None), &Matrix::identity(2, 2), 0, &cfg).is_err());
    }
}
