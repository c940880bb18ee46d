//! Rank, null-space and least-squares primitives with explicit tolerances.
//!
//! Every rank decision in the solvers goes through [`numerical_rank`] and
//! [`null_space_basis`], so the relative singular-value threshold used here
//! is the single knob that decides dimensions downstream.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold used when the caller does not supply one.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Residual tolerance factor for [`min_norm_solution`] and [`solve_square`]:
/// a solution is accepted when `‖Av − b‖ ≤ RESIDUAL_TOL · (1 + ‖b‖)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

const MAX_CONDITION: f64 = 1e12;

/// Orthonormal basis of a null space, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    pub basis: Matrix,
    pub source_rank: usize,
    pub tolerance_used: f64,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.ncols() == 0
    }
}

pub fn ensure_finite(m: &Matrix, name: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if rel_tol > 0.0 && rel_tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "rank tolerance must be positive, got {rel_tol}"
        )))
    }
}

/// Singular values (descending) and the full `n×n` right singular basis.
///
/// Wide matrices are padded with zero rows so the SVD returns a complete `V`.
fn full_svd(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.ncols();
    if n == 0 {
        return (Vec::new(), Matrix::zeros(0, 0));
    }
    let rows = m.nrows().max(n);
    let mut padded = Matrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);

    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &v_t.row(i).transpose());
    }
    (sigma, v)
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn rank_from_sigma(sigma: &[f64], rel_tol: f64) -> usize {
    let max = sigma.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> Result<usize> {
    check_tol(rel_tol)?;
    ensure_finite(m, "rank input")?;
    Ok(rank_from_sigma(&singular_values(m), rel_tol))
}

/// Orthonormal basis of `null(M)`; empty when `M` has full column rank.
pub fn null_space_basis(m: &Matrix, rel_tol: f64) -> Result<SubspaceBasis> {
    check_tol(rel_tol)?;
    ensure_finite(m, "null-space input")?;
    let (sigma, v) = full_svd(m);
    let rank = rank_from_sigma(&sigma, rel_tol);
    let n = m.ncols();
    Ok(SubspaceBasis {
        basis: v.columns(rank, n - rank).into_owned(),
        source_rank: rank,
        tolerance_used: rel_tol,
    })
}

/// Orthonormal basis of the row space of `M`, stored column-wise
/// (the orthogonal complement of [`null_space_basis`]).
pub fn row_space_basis(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    check_tol(rel_tol)?;
    ensure_finite(m, "row-space input")?;
    let (sigma, v) = full_svd(m);
    let rank = rank_from_sigma(&sigma, rel_tol);
    Ok(v.columns(0, rank).into_owned())
}

/// Minimum-norm solution of `A v = b`.
///
/// Fails with [`Error::InconsistentSystem`] when no `v` reaches the residual
/// tolerance.
pub fn min_norm_solution(a: &Matrix, b: &Vector) -> Result<Vector> {
    min_norm_solution_with_tol(a, b, DEFAULT_RANK_TOL)
}

pub fn min_norm_solution_with_tol(a: &Matrix, b: &Vector, rel_tol: f64) -> Result<Vector> {
    check_tol(rel_tol)?;
    ensure_finite(a, "least-squares matrix")?;
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            a.nrows()
        )));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("least-squares rhs"));
    }

    let n = a.ncols();
    let mut v = Vector::zeros(n);
    if a.nrows() > 0 && n > 0 {
        let svd = a.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let max = svd.singular_values.max();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if max > 0.0 && s > rel_tol * max {
                let coeff = u.column(i).dot(b) / s;
                v += v_t.row(i).transpose() * coeff;
            }
        }
    }

    let residual = (a * &v - b).norm();
    let tolerance = RESIDUAL_TOL * (1.0 + b.norm());
    if residual > tolerance {
        return Err(Error::InconsistentSystem { residual, tolerance });
    }
    Ok(v)
}

/// Solve a square, well-conditioned system.
pub fn solve_square(a: &Matrix, b: &Vector) -> Result<Vector> {
    if !a.is_square() || b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve_square expects a square matrix and matching rhs, got {}x{} and {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    ensure_finite(a, "square system")?;
    if a.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }

    let sigma = singular_values(a);
    let max = sigma[0];
    let min = *sigma.last().unwrap();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }

    let v = a.clone().lu().solve(b).ok_or(Error::SingularSystem { condition })?;
    let residual = (a * &v - b).norm();
    let tolerance = RESIDUAL_TOL * (1.0 + b.norm());
    if residual > tolerance {
        return Err(Error::InconsistentSystem { residual, tolerance });
    }
    Ok(v)
}

/// Stack two matrices with equal column counts.
pub fn vstack(top: &Matrix, bottom: &Matrix) -> Matrix {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

pub fn vstack_vec(top: &Vector, bottom: &Vector) -> Vector {
    Vector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

/// Largest absolute entry, 0 for empty matrices.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Canonical orthonormal basis for the column span of `basis`.
///
/// The standard basis vectors are projected onto the subspace and
/// orthonormalized by column-pivoted Gram–Schmidt (largest residual first,
/// lowest index on ties), so the result depends only on the subspace and not
/// on which orthonormal basis of it the caller holds.
pub fn canonical_basis(basis: &Matrix) -> Matrix {
    let dim = basis.nrows();
    let target = basis.ncols();
    let projector = basis * basis.transpose();
    let mut candidates: Vec<Vector> = (0..dim).map(|j| projector.column(j).into_owned()).collect();
    let mut out = Matrix::zeros(dim, target);
    for col in 0..target {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (j, c) in candidates.iter().enumerate() {
            let norm = c.norm();
            if norm > best_norm + 1e-12 {
                best = j;
                best_norm = norm;
            }
        }
        let q = &candidates[best] / best_norm;
        for c in candidates.iter_mut() {
            let proj = q.dot(c);
            *c -= &q * proj;
        }
        out.set_column(col, &q);
    }
    out
}
