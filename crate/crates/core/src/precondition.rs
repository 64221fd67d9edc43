//! Column orthonormalization that turns a vector system into a tight frame.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::frame::FrameMatrix;
use crate::linalg::{ceil_tol, CMatrix, CVector, C64};

/// Relative norm below which a column counts as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Seed for completion vectors when the caller does not pick one.
pub const DEFAULT_COMPLETION_SEED: u64 = 0x5eed_0fc0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnOrigin {
    /// Orthonormalized column `j` of the input.
    Input(usize),
    /// Block indicator column `k`.
    Block(usize),
    /// Random completion of a rank-deficient input.
    Completion,
}

/// Frame with orthonormal columns (hence tight with bound 1).
#[derive(Debug, Clone)]
pub struct PreconditionedFrame {
    pub ytilde: FrameMatrix,
    pub m_prime: usize,
    pub origin: Vec<ColumnOrigin>,
}

/// Incremental modified Gram-Schmidt basis with one reorthogonalization pass.
struct Basis {
    cols: Vec<CVector>,
}

impl Basis {
    fn new() -> Self {
        Basis { cols: Vec::new() }
    }

    /// Orthogonalize `v` against the basis and append it if it is not
    /// dependent. Returns whether it was appended.
    fn push(&mut self, mut v: CVector, tol: f64) -> bool {
        let original = v.norm();
        if original == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for q in &self.cols {
                let c = q.dotc(&v);
                v.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        let rest = v.norm();
        if rest <= tol * original {
            return false;
        }
        self.cols.push(v.unscale(rest));
        true
    }

    fn into_matrix(self, rows: usize) -> CMatrix {
        if self.cols.is_empty() {
            return CMatrix::zeros(rows, 0);
        }
        CMatrix::from_columns(&self.cols)
    }
}

fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Orthonormalize the columns of `y`, completing a rank-deficient input with
/// seeded random orthogonal columns so that exactly `m` columns result.
pub fn orthonormalize_columns(y: &FrameMatrix) -> Result<PreconditionedFrame> {
    orthonormalize_columns_seeded(y, DEFAULT_COMPLETION_SEED)
}

pub fn orthonormalize_columns_seeded(y: &FrameMatrix, seed: u64) -> Result<PreconditionedFrame> {
    let (rows, m) = (y.len(), y.dim());
    if rows < m {
        return Err(FrameError::InvalidInput(format!(
            "column orthonormalization needs M >= m, got M={rows}, m={m}"
        )));
    }
    let mut basis = Basis::new();
    let mut origin = Vec::with_capacity(m);
    let mut missing = 0;
    for j in 0..m {
        if basis.push(y.matrix().column(j).into_owned(), DEPENDENCE_TOL) {
            origin.push(ColumnOrigin::Input(j));
        } else {
            missing += 1;
        }
    }
    if missing > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while missing > 0 {
            if basis.push(gaussian_vector(rows, &mut rng), DEPENDENCE_TOL) {
                origin.push(ColumnOrigin::Completion);
                missing -= 1;
            }
        }
    }
    let ytilde = FrameMatrix::new(basis.into_matrix(rows))?;
    Ok(PreconditionedFrame { ytilde, m_prime: m, origin })
}

/// Number of block columns `⌈αm⌉`.
pub fn block_count(alpha: f64, m: usize) -> usize {
    ceil_tol(alpha * m as f64).max(1)
}

/// Prepend `⌈αm⌉` normalized block-indicator columns and extend them with the
/// columns of `y` to an orthonormal basis of their joint span.
///
/// Every row of the result has squared norm at least `⌈αm⌉/M`.
pub fn extend_with_blocks(y: &FrameMatrix, alpha: f64) -> Result<PreconditionedFrame> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FrameError::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    extend_with_block_count(y, block_count(alpha, y.dim()))
}

/// [`extend_with_blocks`] with the number of block columns given directly.
pub fn extend_with_block_count(y: &FrameMatrix, q: usize) -> Result<PreconditionedFrame> {
    let (rows, m) = (y.len(), y.dim());
    if q == 0 || q > rows || rows % q != 0 {
        return Err(FrameError::InvalidInput(format!(
            "M = {rows} is not a multiple of ceil(alpha m) = {q}; zero_pad the frame first"
        )));
    }
    let block = rows / q;
    let height = (q as f64 / rows as f64).sqrt();
    let mut basis = Basis::new();
    let mut origin = Vec::new();
    for k in 0..q {
        let d = CVector::from_fn(rows, |i, _| if i / block == k { C64::new(height, 0.0) } else { C64::new(0.0, 0.0) });
        basis.cols.push(d);
        origin.push(ColumnOrigin::Block(k));
    }
    for j in 0..m {
        if basis.push(y.matrix().column(j).into_owned(), DEPENDENCE_TOL) {
            origin.push(ColumnOrigin::Input(j));
        }
    }
    let m_prime = basis.cols.len();
    let ytilde = FrameMatrix::new(basis.into_matrix(rows))?;
    Ok(PreconditionedFrame { ytilde, m_prime, origin })
}

/// Smallest multiple of `q` that is at least `len`.
pub fn padded_len(len: usize, q: usize) -> usize {
    len.div_ceil(q) * q
}

/// Append zero rows up to `target_len`.
pub fn zero_pad(y: &FrameMatrix, target_len: usize) -> Result<FrameMatrix> {
    if target_len < y.len() {
        return Err(FrameError::InvalidInput(format!(
            "padding target {target_len} is smaller than M = {}",
            y.len()
        )));
    }
    FrameMatrix::new(y.matrix().clone().resize_vertically(target_len, C64::new(0.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn orthonormality_error(y: &FrameMatrix) -> f64 {
        let g = y.matrix().ad_mul(y.matrix());
        (g - CMatrix::identity(y.dim(), y.dim())).norm()
    }

    #[test]
    fn normalizes_single_column() {
        let y = FrameMatrix::from_real(2, 1, &[1.0, 1.0]).unwrap();
        let p = orthonormalize_columns(&y).unwrap();
        let h = 0.5f64.sqrt();
        assert_relative_eq!(p.ytilde.matrix()[(0, 0)].re, h, epsilon = 1e-15);
        assert_relative_eq!(p.ytilde.matrix()[(1, 0)].re, h, epsilon = 1e-15);
    }

    #[test]
    fn completes_rank_deficient_input() {
        let y = FrameMatrix::from_real(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]).unwrap();
        let p = orthonormalize_columns(&y).unwrap();
        assert_eq!(p.m_prime, 2);
        assert_eq!(p.origin, vec![ColumnOrigin::Input(0), ColumnOrigin::Completion]);
        assert!(orthonormality_error(&p.ytilde) < 1e-12);
        assert!(orthonormalize_columns(&FrameMatrix::from_real(1, 2, &[1.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn blocks_only_for_zero_input() {
        let y = FrameMatrix::new(CMatrix::zeros(12, 5)).unwrap();
        let p = extend_with_blocks(&y, 0.5).unwrap();
        assert_eq!(p.m_prime, 3);
        for i in 0..12 {
            assert_relative_eq!(p.ytilde.row_norm_sq(i), 3.0 / 12.0, epsilon = 1e-15);
        }
        assert!(extend_with_blocks(&FrameMatrix::new(CMatrix::zeros(10, 5)).unwrap(), 0.5).is_err());
    }

    #[test]
    fn padding() {
        assert_eq!(padded_len(10, 4), 12);
        assert_eq!(padded_len(12, 4), 12);
        let y = FrameMatrix::from_real(2, 1, &[1.0, 2.0]).unwrap();
        let p = zero_pad(&y, 4).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.matrix()[(1, 0)].re, 2.0);
        assert_eq!(p.row_norm_sq(3), 0.0);
        assert_eq!(zero_pad(&y, 2).unwrap(), y);
    }
}
