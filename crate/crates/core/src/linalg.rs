//! Dense complex linear-algebra helpers shared by the frame modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{FrameError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative cut-off below which eigenvalues are reported as zero.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// Column `j` of the returned matrix is the unit eigenvector belonging to the
/// `j`-th eigenvalue.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = hermitize(h);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues only, sorted ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let mut values: Vec<f64> = hermitize(h).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `(H + H*) / 2`.
pub fn hermitize(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// `∑_i v_i v_i*` where `v_i` is row `i` of `rows` read as a column vector.
pub fn outer_gram(rows: &CMatrix) -> CMatrix {
    // (Yᵀ conj(Y)) is the transpose of Y*Y.
    rows.ad_mul(rows).transpose()
}

/// `∑_i w_i v_i v_i*` over the selected rows.
pub fn weighted_outer_gram(rows: &CMatrix, indices: &[usize], weights: &[f64]) -> CMatrix {
    let m = rows.ncols();
    let mut g = CMatrix::zeros(m, m);
    for (&i, &w) in indices.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let v = rows.row(i).transpose();
        g.ger(C64::new(w, 0.0), &v, &v.conjugate(), C64::new(1.0, 0.0));
    }
    g
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a Hermitian matrix, with `λ_min`
/// clamped to zero when it is below `EIGEN_CLAMP · λ_max`.
pub fn extreme_eigenvalues(h: &CMatrix) -> (f64, f64) {
    let values = hermitian_eigenvalues(h);
    let lo = values[0];
    let hi = *values.last().unwrap();
    (clamp_small(lo, hi), hi)
}

pub(crate) fn clamp_small(lo: f64, hi: f64) -> f64 {
    if lo < EIGEN_CLAMP * hi.abs().max(f64::MIN_POSITIVE) {
        0.0
    } else {
        lo
    }
}

/// Extreme eigenvalues of the pencil `(num, den)`, i.e. the best constants
/// `c, C` with `c·den ⪯ num ⪯ C·den` on the range of `den`.
///
/// Directions in the null space of `den` (eigenvalues below `1e-12·λ_max`)
/// are ignored.
pub fn pencil_extremes(num: &CMatrix, den: &CMatrix) -> Result<(f64, f64)> {
    if num.shape() != den.shape() || !num.is_square() {
        return Err(FrameError::InvalidInput("pencil matrices must be square and of equal size".into()));
    }
    let (values, vectors) = hermitian_eigen(den);
    let top = *values.last().unwrap();
    if top <= 0.0 {
        return Err(FrameError::InvalidInput("pencil denominator is zero".into()));
    }
    let keep: Vec<usize> = (0..values.len()).filter(|&j| values[j] > EIGEN_CLAMP * top).collect();
    let n = num.nrows();
    let w = CMatrix::from_fn(n, keep.len(), |i, c| vectors[(i, keep[c])] / values[keep[c]].sqrt());
    let reduced = w.adjoint() * num * &w;
    let ev = hermitian_eigenvalues(&reduced);
    Ok((ev[0], *ev.last().unwrap()))
}

/// `⌈x⌉` tolerant to round-off just above an integer.
///
/// Products such as `(5/3)·120` evaluate to `200.00000000000003`; the
/// iteration budgets must treat them as the integer they represent.
pub fn ceil_tol(x: f64) -> usize {
    let slack = 1e-9 * x.abs().max(1.0);
    (x - slack).ceil().max(0.0) as usize
}

/// `⌊x⌋` tolerant to round-off just below an integer.
pub fn floor_tol(x: f64) -> usize {
    let slack = 1e-9 * x.abs().max(1.0);
    (x + slack).floor().max(0.0) as usize
}

/// Largest singular value of a dense complex matrix.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let g = if a.nrows() >= a.ncols() { a.ad_mul(a) } else { a * a.adjoint() };
    hermitian_eigenvalues(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[c(3.0), C64::new(1.0, 1.0), c(0.0), C64::new(1.0, -1.0), c(2.0), c(0.5), c(0.0), c(0.5), c(1.0)],
        );
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::from_diagonal(&DVector::from_iterator(3, vals.iter().map(|&v| c(v))));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - h).norm() < 1e-12);
    }

    #[test]
    fn outer_gram_matches_explicit_sum() {
        let y = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 2.0), c(0.5), C64::new(0.0, -1.0), c(3.0)]);
        let g = outer_gram(&y);
        let mut explicit = CMatrix::zeros(2, 2);
        for i in 0..2 {
            let v = y.row(i).transpose();
            explicit += &v * v.adjoint();
        }
        assert!((g - explicit).norm() < 1e-14);
    }

    #[test]
    fn ceil_tol_absorbs_round_off() {
        assert_eq!(ceil_tol(5.0 / 3.0 * 120.0), 200);
        assert_eq!(ceil_tol(1.5 * 189.0), 284);
        assert_eq!(ceil_tol(200.2), 201);
        assert_eq!(floor_tol(0.2 * 100.0), 20);
        assert_eq!(floor_tol(19.5), 19);
    }

    #[test]
    fn pencil_of_scaled_identity() {
        let den = CMatrix::identity(3, 3).scale(2.0);
        let num = CMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(4.0), c(8.0)]));
        let (lo, hi) = pencil_extremes(&num, &den).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
    }
}
