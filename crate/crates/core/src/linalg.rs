//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Reciprocal 2-norm condition number, `sigma_min / sigma_max`.
pub fn rcond(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max <= 0.0 || !max.is_finite() {
        return 0.0;
    }
    sv.min() / max
}

/// Principal square root of a real symmetric positive semi-definite matrix.
///
/// Eigenvalues in `[-tol, 0)` are clamped; anything more negative is rejected.
pub fn sqrtm_symmetric(m: &Mat) -> Option<Mat> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let mut roots = DVector::zeros(eig.eigenvalues.len());
    for (r, &v) in roots.iter_mut().zip(eig.eigenvalues.iter()) {
        if v < -1e-12 * scale {
            return None;
        }
        *r = v.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Some(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// `I_per ⊗ block`.
pub fn block_diagonal(per: usize, block: &Mat) -> Mat {
    let (r, c) = block.shape();
    let mut out = Mat::zeros(per * r, per * c);
    for p in 0..per {
        out.view_mut((p * r, p * c), (r, c)).copy_from(block);
    }
    out
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `a + b·e^{-jω}` for real taps `a`, `b`.
pub fn two_tap_response(a: &Mat, b: &Mat, omega: f64) -> CMat {
    let z = Complex64::from_polar(1.0, -omega);
    a.zip_map(b, |x, y| Complex64::new(x, 0.0) + z * y)
}

/// Eigenvalues of a Hermitian matrix (only the lower triangle is read).
pub fn hermitian_eigenvalues(m: &CMat) -> DVector<f64> {
    m.clone().symmetric_eigenvalues()
}

/// Largest column 2-norm, the reference scale for [`log2_abs_det`].
pub fn max_column_norm(m: &CMat) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max)
}

/// `log2 |det m|` via partial-pivot LU, or `None` when a pivot is below
/// `1e-12 · scale`. Pass a scale shared by a whole field of matrices so that
/// a matrix that is small everywhere still counts as singular.
pub fn log2_abs_det(m: &CMat, scale: f64) -> Option<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return None;
    }
    if n == 0 {
        return Some(0.0);
    }
    let scale = scale.max(max_column_norm(m));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..n {
        let d = u[(i, i)].norm();
        if !(d > 1e-12 * scale) {
            return None;
        }
        acc += d.log2();
    }
    Some(acc)
}
