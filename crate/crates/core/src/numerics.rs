//! Complex-matrix subspace arithmetic.
//!
//! Every routine here is built on a single SVD and follows the same rank rule:
//! a singular value counts when `σ > relative_rank_eps · σ_max · max(rows, cols)`.
//! Degenerate results (trivial null spaces, empty intersections) come back as
//! matrices with zero columns (or zero rows for row-space routines).

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type ComplexMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy {
    pub relative_rank_eps: f64,
    pub residual_eps: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            relative_rank_eps: 1e-10,
            residual_eps: 1e-9,
        }
    }
}

impl TolerancePolicy {
    pub fn new(relative_rank_eps: f64, residual_eps: f64) -> Option<Self> {
        let ok = |e: f64| e > 0.0 && e < 1.0;
        (ok(relative_rank_eps) && ok(residual_eps)).then_some(Self {
            relative_rank_eps,
            residual_eps,
        })
    }
}

/// SVD with singular values in descending order.
///
/// `v` is always cols×cols. Wide inputs are padded with zero rows before
/// factorizing so the thin factorization still yields a complete right basis;
/// `u` keeps the leading `min(rows, cols)` left vectors.
struct FullSvd {
    u: ComplexMatrix,
    sigma: Vec<f64>,
    v: ComplexMatrix,
}

fn full_svd(a: &ComplexMatrix) -> FullSvd {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut sq = ComplexMatrix::zeros(cols, cols);
        sq.view_mut((0, 0), (rows, cols)).copy_from(a);
        sq
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").adjoint();

    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    // Left vectors with nonzero σ vanish on the padding rows.
    let u = ComplexMatrix::from_fn(rows, k, |r, c| u[(r, order[c])]);
    let v = ComplexMatrix::from_fn(cols, k, |r, c| v[(r, order[c])]);
    FullSvd { u, sigma, v }
}

fn rank_of_sigma(sigma: &[f64], rows: usize, cols: usize, tol: &TolerancePolicy) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let threshold = tol.relative_rank_eps * smax * rows.max(cols) as f64;
    sigma.iter().filter(|&&s| s > threshold).count()
}

pub fn numerical_rank(a: &ComplexMatrix, tol: &TolerancePolicy) -> usize {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let sigma = a.clone().singular_values();
    let mut sigma: Vec<f64> = sigma.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    rank_of_sigma(&sigma, rows, cols, tol)
}

/// Orthonormal columns spanning `{x : A x = 0}`.
pub fn null_space_basis(a: &ComplexMatrix, tol: &TolerancePolicy) -> ComplexMatrix {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return ComplexMatrix::identity(cols, cols);
    }
    let svd = full_svd(a);
    let rank = rank_of_sigma(&svd.sigma, rows, cols, tol);
    svd.v.columns(rank, cols - rank).into_owned()
}

/// Orthonormal rows spanning `{y : y A = 0}` (plain transpose, no conjugation).
pub fn left_null_space_basis(a: &ComplexMatrix, tol: &TolerancePolicy) -> ComplexMatrix {
    null_space_basis(&a.transpose(), tol).transpose()
}

/// Orthonormal basis of the column space of `a` (leading left singular vectors).
pub fn column_space_basis(a: &ComplexMatrix, tol: &TolerancePolicy) -> ComplexMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return ComplexMatrix::zeros(rows, 0);
    }
    let svd = full_svd(a);
    let rank = rank_of_sigma(&svd.sigma, rows, cols, tol);
    svd.u.columns(0, rank).into_owned()
}

/// Basis of `span(A) ∩ span(B)` together with the coefficients that realize it.
#[derive(Debug, Clone)]
pub struct Intersection {
    /// Orthonormal columns of the intersection.
    pub basis: ComplexMatrix,
    /// `A · from_a = basis`, least-norm solution.
    pub from_a: ComplexMatrix,
    /// `B · from_b = basis`, least-norm solution.
    pub from_b: ComplexMatrix,
}

/// Constructive intersection of two column spaces.
///
/// Null vectors `(x_a; x_b)` of `[A | −B]` give `A x_a = B x_b`; the images
/// `A x_a` are then orthonormalized, ordered by the SVD of that image.
pub fn column_space_intersection_with_coefficients(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    tol: &TolerancePolicy,
) -> Intersection {
    assert_eq!(a.nrows(), b.nrows(), "intersection needs equal row counts");
    let rows = a.nrows();
    let (ca, cb) = (a.ncols(), b.ncols());
    let empty = || Intersection {
        basis: ComplexMatrix::zeros(rows, 0),
        from_a: ComplexMatrix::zeros(ca, 0),
        from_b: ComplexMatrix::zeros(cb, 0),
    };
    if rows == 0 || ca == 0 || cb == 0 {
        return empty();
    }

    let mut stacked = ComplexMatrix::zeros(rows, ca + cb);
    stacked.view_mut((0, 0), (rows, ca)).copy_from(a);
    stacked.view_mut((0, ca), (rows, cb)).copy_from(&(-b));
    let null = null_space_basis(&stacked, tol);
    if null.ncols() == 0 {
        return empty();
    }
    let image = a * null.rows(0, ca);
    // Scale-aware: a null vector with x_a in Null(A) maps to ~0 and is dropped here.
    let basis = column_space_basis(&image, tol);
    if basis.ncols() == 0 {
        return empty();
    }
    let from_a = pseudo_inverse(a, tol) * &basis;
    let from_b = pseudo_inverse(b, tol) * &basis;
    Intersection {
        basis,
        from_a,
        from_b,
    }
}

pub fn column_space_intersection(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    tol: &TolerancePolicy,
) -> ComplexMatrix {
    column_space_intersection_with_coefficients(a, b, tol).basis
}

/// Orthonormal rows spanning `rowspace(A) ∩ rowspace(B)`.
pub fn row_space_intersection(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    tol: &TolerancePolicy,
) -> ComplexMatrix {
    assert_eq!(
        a.ncols(),
        b.ncols(),
        "row intersection needs equal column counts"
    );
    column_space_intersection(&a.transpose(), &b.transpose(), tol).transpose()
}

/// Moore–Penrose pseudo-inverse, truncating singular values under the rank rule.
pub fn pseudo_inverse(a: &ComplexMatrix, tol: &TolerancePolicy) -> ComplexMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return ComplexMatrix::zeros(cols, rows);
    }
    let svd = full_svd(a);
    let rank = rank_of_sigma(&svd.sigma, rows, cols, tol);
    let mut out = ComplexMatrix::zeros(cols, rows);
    for k in 0..rank {
        let inv = 1.0 / svd.sigma[k];
        let vk = svd.v.column(k);
        let uk = svd.u.column(k);
        out += (vk * uk.adjoint()).scale(inv);
    }
    out
}

/// Frobenius norm.
pub fn fro(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖QᴴQ − I‖_F` for a column-orthonormal candidate.
pub fn orthonormality_error(q: &ComplexMatrix) -> f64 {
    let gram = q.adjoint() * q;
    fro(&(gram - ComplexMatrix::identity(q.ncols(), q.ncols())))
}

/// Horizontal concatenation. All blocks must share a row count.
pub fn hstack(blocks: &[&ComplexMatrix], rows: usize) -> ComplexMatrix {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows);
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Vertical concatenation. All blocks must share a column count.
pub fn vstack(blocks: &[&ComplexMatrix], cols: usize) -> ComplexMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols);
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(*b);
        at += b.nrows();
    }
    out
}
