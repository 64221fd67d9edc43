#![allow(dead_code)]

use framesub_core::linalg::{CMatrix, CVector, C64};
use framesub_core::FrameMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_vector(len: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(len, |_, _| gaussian(rng))
}

pub fn random_hermitian(m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = random_matrix(m, m, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_psd(m: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = random_matrix(m, rank, rng);
    &g * g.adjoint()
}

/// Unitary factor of a Gaussian matrix.
pub fn random_unitary(m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    random_matrix(m, m, rng).qr().q()
}

/// `Q·D·U` with orthonormal `Q` (M×m), singular values in `[1, cond]`
/// and unitary `U`; its frame bounds are the squared singular values.
pub fn conditioned_frame(big_m: usize, m: usize, cond: f64, rng: &mut ChaCha8Rng) -> FrameMatrix {
    let q = random_matrix(big_m, m, rng).qr().q();
    let u = random_unitary(m, rng);
    let d = CMatrix::from_diagonal(&CVector::from_fn(m, |i, _| {
        let s = if i == 0 { 1.0 } else if i == 1 { cond } else { rng.random_range(1.0..=cond) };
        C64::new(s.sqrt(), 0.0)
    }));
    FrameMatrix::new(q * d * u).unwrap()
}

/// Rows with widely varying norms.
pub fn uneven_rows(big_m: usize, m: usize, rng: &mut ChaCha8Rng) -> FrameMatrix {
    let mut y = random_matrix(big_m, m, rng);
    for i in 0..big_m {
        let s = 10f64.powf(rng.random_range(-1.5..1.5));
        y.row_mut(i).scale_mut(s);
    }
    FrameMatrix::new(y).unwrap()
}
