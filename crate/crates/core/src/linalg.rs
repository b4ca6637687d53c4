//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Frobenius norm of a complex matrix.
pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = fro(m).max(1.0);
    fro(&(m - m.adjoint())) <= tol * scale
}

/// Real trace of a product of two Hermitian matrices, `Re Tr(A B)`.
pub fn trace_prod(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

/// Real trace of a Hermitian matrix.
pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Largest eigenvalue and a unit-norm principal eigenvector.
pub fn principal_eig(m: &CMat) -> (f64, CVec) {
    let (vals, vecs) = herm_eig(m);
    (vals[0], vecs.column(0).into_owned())
}

pub fn min_eig(m: &CMat) -> f64 {
    let (vals, _) = herm_eig(m);
    vals.last().copied().unwrap_or(0.0)
}

/// `lambda_max / Tr`, 1 for a zero matrix.
pub fn rank_one_ratio(m: &CMat) -> f64 {
    let tr = trace_re(m);
    if tr <= 1e-300 {
        return 1.0;
    }
    (principal_eig(m).0 / tr).clamp(0.0, 1.0)
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Natural log-determinant of a Hermitian positive definite matrix.
pub fn ln_det_hpd(m: &CMat) -> Option<f64> {
    let ch = hermitian_part(m).cholesky()?;
    let l = ch.l();
    Some((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Stack two matrices vertically.
pub fn vstack(top: &CMat, bottom: &CMat) -> CMat {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Stack two matrices horizontally.
pub fn hstack(left: &CMat, right: &CMat) -> CMat {
    assert_eq!(left.nrows(), right.nrows());
    let mut out = CMat::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

/// Real symmetric eigenvalues, ascending.
pub fn sym_eigvals(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Relative Frobenius distance `||a - b|| / max(||b||, floor)`.
pub fn rel_err(a: &CMat, b: &CMat, floor: f64) -> f64 {
    fro(&(a - b)) / fro(b).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_sorted_descending_and_reconstructs() {
        let m = CMat::from_row_slice(2, 2, &[cr(2.0), c(0.0, 1.0), c(0.0, -1.0), cr(2.0)]);
        let (vals, vecs) = herm_eig(&m);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let d = CMat::from_diagonal(&DVector::from_iterator(2, vals.iter().map(|&v| cr(v))));
        let rec = &vecs * d * vecs.adjoint();
        assert!(fro(&(rec - m)) < 1e-12);
    }

    #[test]
    fn log_det_matches_product_of_eigs() {
        let m = CMat::from_row_slice(2, 2, &[cr(3.0), c(1.0, 1.0), c(1.0, -1.0), cr(2.0)]);
        let ld = ln_det_hpd(&m).unwrap();
        assert!((ld - (6.0f64 - 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn rank_ratio_of_outer_product_is_one() {
        let u = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.1)]);
        assert!((rank_one_ratio(&outer(&u, &u)) - 1.0).abs() < 1e-12);
        assert_eq!(rank_one_ratio(&CMat::zeros(3, 3)), 1.0);
    }
}
