//! In-memory model of one time step of a quasi-static rigid-body system.
//!
//! Generalized velocities are ordered `v = [v_u; v_a]` (unactuated first).
//! Reaction forces `λ` follow the sign convention of whichever scenario
//! builder produced the holonomic constraints; guard rows are written against
//! the stacked force vector `[λ; f]`.

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Matrix, Vector};

/// Tolerance on `N = J_Φ·Ω` when both factors are supplied.
pub const PRODUCT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SystemInstance {
    pub n_u: usize,
    pub n_a: usize,
    /// Holonomic velocity constraint `N` (`n_Φ × n`), `N v = 0`.
    pub holonomic: Matrix,
    /// Goal rows `G` (`n_G × n`).
    pub goal: Matrix,
    /// Goal values `b_G`.
    pub goal_rhs: Vector,
    /// External generalized force `F` (gravity etc.).
    pub external_force: Vector,
    /// Constraint Jacobian `J_Φ` with respect to the configuration, when known.
    pub jacobian: Option<Matrix>,
    /// Configuration-rate map `Ω`, `q̇ = Ω v`, when known.
    pub omega: Option<Matrix>,
}

impl SystemInstance {
    /// Instance from a bare `N` without the `(J_Φ, Ω)` factorization.
    pub fn new(n_u: usize, n_a: usize, holonomic: Matrix, goal: Matrix, goal_rhs: Vector, external_force: Vector) -> Self {
        Self {
            n_u,
            n_a,
            holonomic,
            goal,
            goal_rhs,
            external_force,
            jacobian: None,
            omega: None,
        }
    }

    /// Instance whose `N` is assembled from `J_Φ` and `Ω`.
    pub fn from_factors(
        n_u: usize,
        n_a: usize,
        jacobian: Matrix,
        omega: Matrix,
        goal: Matrix,
        goal_rhs: Vector,
        external_force: Vector,
    ) -> Result<Self> {
        let holonomic = assemble_n(&jacobian, &omega)?;
        Ok(Self {
            n_u,
            n_a,
            holonomic,
            goal,
            goal_rhs,
            external_force,
            jacobian: Some(jacobian),
            omega: Some(omega),
        })
    }

    pub fn n(&self) -> usize {
        self.n_u + self.n_a
    }

    /// Number of holonomic constraints `n_Φ`.
    pub fn n_phi(&self) -> usize {
        self.holonomic.nrows()
    }

    /// `H = [I_{n_u} 0]`, the selection expressing `f_u = 0`.
    pub fn unactuated_selection(&self) -> Matrix {
        let mut h = Matrix::zeros(self.n_u, self.n());
        h.view_mut((0, 0), (self.n_u, self.n_u)).fill_with_identity();
        h
    }
}

/// Affine force constraints on `[λ; f]`: `Λ·[λ; f] ≤ b_Λ`, `Γ·[λ; f] = b_Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GuardConditions {
    pub inequality: Matrix,
    pub inequality_rhs: Vector,
    pub equality: Matrix,
    pub equality_rhs: Vector,
}

impl GuardConditions {
    /// No guard rows at all, for `cols = n_Φ + n` force variables.
    pub fn empty(cols: usize) -> Self {
        Self {
            inequality: Matrix::zeros(0, cols),
            inequality_rhs: Vector::zeros(0),
            equality: Matrix::zeros(0, cols),
            equality_rhs: Vector::zeros(0),
        }
    }

    pub fn inequalities_only(inequality: Matrix, inequality_rhs: Vector) -> Self {
        let cols = inequality.ncols();
        Self {
            inequality,
            inequality_rhs,
            equality: Matrix::zeros(0, cols),
            equality_rhs: Vector::zeros(0),
        }
    }

    /// Margins `b_Λ − Λ·x` for a stacked force vector `x = [λ; f]`.
    pub fn margins(&self, stacked: &Vector) -> Vector {
        &self.inequality_rhs - &self.inequality * stacked
    }
}

/// Solver output: dimensions, axes and magnitudes of a hybrid action.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridAction {
    pub n_av: usize,
    pub n_af: usize,
    /// `T = diag(I_u, R_a)`.
    pub transform: Matrix,
    pub r_a: Matrix,
    /// Velocity command magnitudes `w_av`.
    pub w_av: Vector,
    /// Force command magnitudes `η_af`.
    pub eta_af: Vector,
    /// Solved reaction forces.
    pub lambda: Vector,
    /// Solved transformed generalized force `η = [η_u; η_af; η_av]`.
    pub eta: Vector,
}

impl HybridAction {
    /// Actuated generalized force `f_a = R_a⁻¹ η_a` in the original coordinates.
    pub fn actuated_force(&self, n_u: usize) -> Option<Vector> {
        let eta_a = self.eta.rows(n_u, self.eta.len() - n_u).into_owned();
        self.r_a.clone().lu().solve(&eta_a)
    }

    /// Type invariants; an empty list means the action is well formed.
    pub fn check_invariants(&self, n_u: usize, n_a: usize) -> Vec<String> {
        let mut issues = Vec::new();
        let n = n_u + n_a;
        if self.n_av + self.n_af != n_a {
            issues.push(format!("n_av + n_af = {} != n_a = {}", self.n_av + self.n_af, n_a));
        }
        if self.transform.shape() != (n, n) || self.r_a.shape() != (n_a, n_a) {
            issues.push("transform has wrong shape".into());
            return issues;
        }
        if self.w_av.len() != self.n_av || self.eta_af.len() != self.n_af || self.eta.len() != n {
            issues.push("command vectors have wrong length".into());
            return issues;
        }
        let mut expected = Matrix::identity(n, n);
        expected.view_mut((n_u, n_u), (n_a, n_a)).copy_from(&self.r_a);
        if max_abs(&(&self.transform - expected)) > 1e-12 {
            issues.push("transform is not diag(I_u, R_a)".into());
        }
        let sigma = crate::linalg::singular_values(&self.transform);
        if let (Some(max), Some(min)) = (sigma.first(), sigma.last()) {
            if *min <= 0.0 || max / min >= 1e10 {
                issues.push(format!("transform is ill-conditioned ({:.3e})", max / min));
            }
        }
        let eta_u = self.eta.rows(0, n_u).amax();
        if n_u > 0 && eta_u > 1e-8 {
            issues.push(format!("unactuated force block is {eta_u:.3e}, expected 0"));
        }
        let eta_af = self.eta.rows(n_u, self.n_af);
        if (eta_af - &self.eta_af).amax() > 1e-9 {
            issues.push("eta_af disagrees with the af block of eta".into());
        }
        if self.eta.iter().chain(self.lambda.iter()).any(|x| !x.is_finite()) {
            issues.push("non-finite force".into());
        }
        issues
    }
}

/// `T = diag(I_{n_u}, R_a)`.
pub fn transform_matrix(n_u: usize, r_a: &Matrix) -> Matrix {
    let n_a = r_a.nrows();
    let mut t = Matrix::identity(n_u + n_a, n_u + n_a);
    t.view_mut((n_u, n_u), (n_a, n_a)).copy_from(r_a);
    t
}

/// `N = J_Φ·Ω`.
pub fn assemble_n(jacobian: &Matrix, omega: &Matrix) -> Result<Matrix> {
    if jacobian.ncols() != omega.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "J_phi is {}x{}, Omega is {}x{}",
            jacobian.nrows(),
            jacobian.ncols(),
            omega.nrows(),
            omega.ncols()
        )));
    }
    Ok(jacobian * omega)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DimensionMismatch(String),
    NonFinite(String),
    ProductMismatch { max_error: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DimensionMismatch(s) => write!(f, "dimension mismatch: {s}"),
            Violation::NonFinite(s) => write!(f, "non-finite entries in {s}"),
            Violation::ProductMismatch { max_error } => write!(f, "N differs from J_phi*Omega by {max_error:.3e}"),
        }
    }
}

/// Check an instance and its guards for well-formedness.
pub fn validate(instance: &SystemInstance, guard: &GuardConditions) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = instance.n();
    let n_phi = instance.n_phi();
    let mut dim = |ok: bool, msg: String| {
        if !ok {
            out.push(Violation::DimensionMismatch(msg));
        }
    };

    dim(
        instance.holonomic.ncols() == n,
        format!("N has {} columns, n = {n}", instance.holonomic.ncols()),
    );
    dim(
        instance.goal.ncols() == n,
        format!("G has {} columns, n = {n}", instance.goal.ncols()),
    );
    dim(
        instance.goal_rhs.len() == instance.goal.nrows(),
        format!(
            "b_G has length {}, G has {} rows",
            instance.goal_rhs.len(),
            instance.goal.nrows()
        ),
    );
    dim(
        instance.external_force.len() == n,
        format!("F has length {}, n = {n}", instance.external_force.len()),
    );
    dim(
        guard.inequality.ncols() == n_phi + n,
        format!("Lambda has {} columns, expected {}", guard.inequality.ncols(), n_phi + n),
    );
    dim(
        guard.inequality_rhs.len() == guard.inequality.nrows(),
        "b_Lambda length differs from Lambda rows".to_string(),
    );
    dim(
        guard.equality.ncols() == n_phi + n,
        format!("Gamma has {} columns, expected {}", guard.equality.ncols(), n_phi + n),
    );
    dim(
        guard.equality_rhs.len() == guard.equality.nrows(),
        "b_Gamma length differs from Gamma rows".to_string(),
    );

    let matrices: [(&str, &Matrix); 4] = [
        ("N", &instance.holonomic),
        ("G", &instance.goal),
        ("Lambda", &guard.inequality),
        ("Gamma", &guard.equality),
    ];
    for (name, m) in matrices {
        if m.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite(name.to_string()));
        }
    }
    let vectors: [(&str, &Vector); 4] = [
        ("b_G", &instance.goal_rhs),
        ("F", &instance.external_force),
        ("b_Lambda", &guard.inequality_rhs),
        ("b_Gamma", &guard.equality_rhs),
    ];
    for (name, v) in vectors {
        if v.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite(name.to_string()));
        }
    }

    match (&instance.jacobian, &instance.omega) {
        (Some(j), Some(o)) => {
            if j.ncols() != o.nrows() || j.nrows() != n_phi || o.ncols() != n {
                out.push(Violation::DimensionMismatch(
                    "J_phi / Omega shapes inconsistent with N".into(),
                ));
            } else if j.iter().chain(o.iter()).any(|x| !x.is_finite()) {
                out.push(Violation::NonFinite("J_phi/Omega".into()));
            } else {
                let err = max_abs(&(j * o - &instance.holonomic));
                if err > PRODUCT_TOL {
                    out.push(Violation::ProductMismatch { max_error: err });
                }
            }
        }
        (None, None) => {}
        _ => out.push(Violation::DimensionMismatch("only one of J_phi / Omega supplied".into())),
    }
    out
}

/// Turn a non-empty validation report into an error.
pub fn ensure_valid(instance: &SystemInstance, guard: &GuardConditions) -> Result<()> {
    let report = validate(instance, guard);
    if report.is_empty() {
        return Ok(());
    }
    let text = report.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
    if report.iter().all(|v| matches!(v, Violation::NonFinite(_))) {
        Err(Error::NonFinite("instance"))
    } else {
        Err(Error::DimensionMismatch(text))
    }
}
