use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition number threshold below which a local design is
/// treated as degenerate.
pub(crate) const RCOND_MIN: f64 = 1e-12;

/// Scale factors, eigen-decomposition and reciprocal condition number.
type Equilibrated = (Vec<f64>, SymmetricEigen<f64, Dyn>, f64);

/// Unit-diagonal scaling of the symmetric positive semidefinite `k × k`
/// matrix `a` (row-major), its eigen-decomposition and reciprocal condition
/// number. `None` if a diagonal entry is not positive.
fn equilibrated_eigen(a: &[f64], k: usize) -> Option<Equilibrated> {
    debug_assert_eq!(a.len(), k * k);
    let mut s = vec![0.0; k];
    for q in 0..k {
        let diag = a[q * k + q];
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        s[q] = 1.0 / diag.sqrt();
    }
    let scaled = DMatrix::from_fn(k, k, |r, c| a[r * k + c] * s[r] * s[c]);
    let eig = SymmetricEigen::new(scaled);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l.abs());
    }
    let rcond = if hi > 0.0 { (lo / hi).max(0.0) } else { 0.0 };
    Some((s, eig, rcond))
}

/// Reciprocal condition number of `a` after scaling to unit diagonal; 0 when
/// a diagonal entry is not positive.
pub(crate) fn rcond_equilibrated(a: &[f64], k: usize) -> f64 {
    equilibrated_eigen(a, k).map_or(0.0, |e| e.2)
}

/// Solves the symmetric positive semidefinite system `A β = b` (row-major `k × k`)
/// after scaling to unit diagonal. Returns the reciprocal condition number of
/// the scaled matrix and the solution when that number is at least
/// [`RCOND_MIN`].
pub(crate) fn solve_spd_equilibrated(a: &[f64], b: &[f64], k: usize) -> (f64, Option<Vec<f64>>) {
    let Some((s, eig, rcond)) = equilibrated_eigen(a, k) else {
        return (0.0, None);
    };
    if !(rcond >= RCOND_MIN) {
        return (rcond, None);
    }
    let rhs = DVector::from_fn(k, |q, _| b[q] * s[q]);
    let proj = eig.eigenvectors.transpose() * rhs;
    let inv = DVector::from_fn(k, |q, _| proj[q] / eig.eigenvalues[q]);
    let sol = &eig.eigenvectors * inv;
    (rcond, Some((0..k).map(|q| sol[q] * s[q]).collect()))
}

/// Ordinary least squares by Householder QR with a rank check on the
/// diagonal of `R`.
pub(crate) fn least_squares(design: DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = design.shape();
    if n < p {
        return Err(Error::Singular(format!(
            "least squares needs at least {p} observations, got {n}"
        )));
    }
    // Column scaling keeps the rank test meaningful for polynomial designs.
    let mut scale = vec![0.0; p];
    let mut design = design;
    for c in 0..p {
        let norm = design.column(c).norm();
        if !(norm > 0.0) {
            return Err(Error::Singular(format!("design column {c} is identically zero")));
        }
        scale[c] = norm;
        design.column_mut(c).scale_mut(1.0 / norm);
    }
    let qr = design.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min / max < 1e-10 {
        return Err(Error::Singular("rank-deficient least-squares design".into()));
    }
    let mut rhs = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut rhs);
    let top = rhs.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok((0..p).map(|c| beta[c] / scale[c]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let b = [1.0, 2.0];
        let (rcond, sol) = solve_spd_equilibrated(&a, &b, 2);
        let sol = sol.unwrap();
        assert!(rcond > 0.1);
        assert!((sol[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((sol[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_flagged() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let (rcond, sol) = solve_spd_equilibrated(&a, &[1.0, 2.0], 2);
        assert!(sol.is_none());
        assert!(rcond < RCOND_MIN);
        assert!(solve_spd_equilibrated(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0], 2).1.is_none());
    }

    #[test]
    fn least_squares_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design = DMatrix::from_fn(4, 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
        let beta = least_squares(design, &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12 && (beta[1] - 2.0).abs() < 1e-12);
        let flat = DMatrix::from_fn(3, 2, |_, _| 1.0);
        assert!(least_squares(flat, &[1.0, 2.0, 3.0]).is_err());
    }
}
