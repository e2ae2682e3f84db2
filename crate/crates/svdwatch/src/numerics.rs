//! Dense-matrix primitives shared by the rest of the crate: largest singular
//! value, spectral norm, and the weighted pseudo-inverse behind the
//! least-squares estimator.
//!
//! Matrices here are small (at most a few hundred entries per side), so the
//! implementation favors accuracy over speed and validates inputs eagerly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Relative cutoff below which a triangular factor is treated as rank-deficient.
const RANK_TOL: f64 = 1e-12;

pub(crate) fn check_matrix(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{what} must be non-empty")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains a non-finite entry"
        )));
    }
    Ok(())
}

pub(crate) fn check_vector(v: &Vector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must be non-empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains a non-finite entry"
        )));
    }
    Ok(())
}

/// Largest singular value of `a`.
pub fn largest_singular_value(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?[0])
}

/// All singular values of `a`, sorted in descending order.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    check_matrix(a, "matrix")?;
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).expect("singular values are finite"));
    Ok(sv)
}

/// Spectral norm (operator 2-norm) of `a`; identical to
/// [`largest_singular_value`].
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    largest_singular_value(a)
}

/// Weighted pseudo-inverse `K = (Hᵀ Λ⁻¹ H)⁻¹ Hᵀ Λ⁻¹` for a diagonal
/// covariance `Λ` given as its vector of variances.
///
/// Computed from the QR factors of `Λ^{-1/2} H` rather than the normal
/// equations, so `K · H = I` holds to well below the 1e-9 contract for
/// reasonably conditioned inputs. Rank deficiency surfaces as
/// [`Error::SingularMatrix`].
pub fn weighted_pinv(h: &Matrix, variances: &Vector) -> Result<Matrix> {
    check_matrix(h, "H")?;
    check_vector(variances, "variance vector")?;
    let (m, n) = (h.nrows(), h.ncols());
    if variances.len() != m {
        return Err(Error::InvalidInput(format!(
            "variance vector has {} entries, expected {m}",
            variances.len()
        )));
    }
    if variances.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput(
            "variances must be strictly positive".into(),
        ));
    }
    if m < n {
        return Err(Error::SingularMatrix(format!(
            "H is {m}x{n}; full column rank needs at least as many rows as columns"
        )));
    }

    // B = Λ^{-1/2} H, K = R⁻¹ Qᵀ Λ^{-1/2} from the thin QR of B.
    let w_inv_sqrt: Vec<f64> = variances.iter().map(|v| 1.0 / v.sqrt()).collect();
    let b = Matrix::from_fn(m, n, |i, j| h[(i, j)] * w_inv_sqrt[i]);
    let qr = b.qr();
    let r = qr.r();

    let diag_max = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let diag_min = (0..n)
        .map(|i| r[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if diag_max == 0.0 || diag_min < RANK_TOL * diag_max {
        return Err(Error::SingularMatrix("HᵀΛ⁻¹H is rank-deficient".into()));
    }

    let mut qt = qr.q().transpose();
    for (j, &scale) in w_inv_sqrt.iter().enumerate() {
        let mut col = qt.column_mut(j);
        col *= scale;
    }
    r.solve_upper_triangular(&qt)
        .ok_or_else(|| Error::SingularMatrix("triangular solve failed".into()))
}
