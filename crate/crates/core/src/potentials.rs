//! Barrier potentials and the rank-one gate quantities that drive BSS.
//!
//! All resolvent quadratic forms are evaluated through the cached
//! eigendecomposition as `∑_j |⟨u_j, v⟩|² / (λ_j − c)^p`.

use crate::error::{FrameError, Result};
use crate::linalg::{hermitian_eigen, hermitize, CMatrix, CVector, C64};

/// Relative slack used when checking that a barrier stays off the spectrum.
pub const BARRIER_SLACK: f64 = 1e-12;

/// Hermitian matrix with a cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianAccumulator {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl HermitianAccumulator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(FrameError::InvalidInput("accumulator must be a nonempty square matrix".into()));
        }
        let scale = matrix.norm().max(1.0);
        if (&matrix - matrix.adjoint()).norm() > 1e-12 * scale {
            return Err(FrameError::InvalidInput("accumulator matrix is not Hermitian".into()));
        }
        let matrix = hermitize(&matrix);
        let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix);
        Ok(HermitianAccumulator { matrix, eigenvalues, eigenvectors })
    }

    pub fn zeros(m: usize) -> Self {
        HermitianAccumulator {
            matrix: CMatrix::zeros(m, m),
            eigenvalues: vec![0.0; m],
            eigenvectors: CMatrix::identity(m, m),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Squared moduli `|⟨u_j, v⟩|²` of `v` in the eigenbasis.
    pub fn spectral_weights(&self, v: &CVector) -> Vec<f64> {
        self.eigenvectors.ad_mul(v).iter().map(|z| z.norm_sqr()).collect()
    }

    fn check_below(&self, l: f64) -> Result<()> {
        let lo = self.lambda_min();
        if lo - l <= BARRIER_SLACK * lo.abs().max(1.0) {
            return Err(FrameError::BarrierViolation(format!("lower barrier {l} not below λ_min = {lo}")));
        }
        Ok(())
    }

    fn check_above(&self, u: f64) -> Result<()> {
        let hi = self.lambda_max();
        if u - hi <= BARRIER_SLACK * hi.abs().max(1.0) {
            return Err(FrameError::BarrierViolation(format!("upper barrier {u} not above λ_max = {hi}")));
        }
        Ok(())
    }
}

/// Lower and upper barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierPair {
    pub l: f64,
    pub u: f64,
}

impl BarrierPair {
    pub fn new(l: f64, u: f64) -> Result<Self> {
        if !(l < u) {
            return Err(FrameError::InvalidInput(format!("barriers must satisfy l < u, got l={l}, u={u}")));
        }
        Ok(BarrierPair { l, u })
    }

    pub fn contains(&self, acc: &HermitianAccumulator) -> bool {
        acc.check_below(self.l).is_ok() && acc.check_above(self.u).is_ok()
    }
}

/// Value of a gate `L_A` or `U_A`; a zero shift yields the infinite gate,
/// whose reciprocal is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Finite(f64),
    Infinite,
}

impl Gate {
    pub fn recip(self) -> f64 {
        match self {
            Gate::Finite(g) => 1.0 / g,
            Gate::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Gate::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Gate::Finite(g) => Some(g),
            Gate::Infinite => None,
        }
    }
}

/// `Φ_l(A) = tr((A − l I)^{-1}) = ∑_j 1/(λ_j − l)`.
pub fn lower_potential(acc: &HermitianAccumulator, l: f64) -> Result<f64> {
    acc.check_below(l)?;
    Ok(acc.eigenvalues.iter().map(|&lam| 1.0 / (lam - l)).sum())
}

/// `Φ^u(A) = tr((u I − A)^{-1}) = ∑_j 1/(u − λ_j)`.
pub fn upper_potential(acc: &HermitianAccumulator, u: f64) -> Result<f64> {
    acc.check_above(u)?;
    Ok(acc.eigenvalues.iter().map(|&lam| 1.0 / (u - lam)).sum())
}

/// `L_A(v; l, δ_L)`.
pub fn lower_gate(acc: &HermitianAccumulator, v: &CVector, l: f64, delta_l: f64) -> Result<Gate> {
    check_shift(delta_l, "lower")?;
    if delta_l == 0.0 {
        return Ok(Gate::Infinite);
    }
    let l_new = l + delta_l;
    let step = lower_potential(acc, l_new)? - lower_potential(acc, l)?;
    let w = acc.spectral_weights(v);
    let (q1, q2) = resolvent_forms(&acc.eigenvalues, &w, |lam| lam - l_new);
    Ok(Gate::Finite(q2 / step - q1))
}

/// `U_A(v; u, δ_U)`.
pub fn upper_gate(acc: &HermitianAccumulator, v: &CVector, u: f64, delta_u: f64) -> Result<Gate> {
    check_shift(delta_u, "upper")?;
    if delta_u == 0.0 {
        return Ok(Gate::Infinite);
    }
    let u_new = u + delta_u;
    let step = upper_potential(acc, u)? - upper_potential(acc, u_new)?;
    let w = acc.spectral_weights(v);
    let (q1, q2) = resolvent_forms(&acc.eigenvalues, &w, |lam| u_new - lam);
    Ok(Gate::Finite(q2 / step + q1))
}

fn check_shift(delta: f64, which: &str) -> Result<()> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(FrameError::InvalidInput(format!("{which} shift must be finite and nonnegative, got {delta}")));
    }
    Ok(())
}

/// `(∑ w_j / d_j, ∑ w_j / d_j²)` with `d_j = dist(λ_j)`.
fn resolvent_forms(eigenvalues: &[f64], weights: &[f64], dist: impl Fn(f64) -> f64) -> (f64, f64) {
    eigenvalues.iter().zip(weights).fold((0.0, 0.0), |(q1, q2), (&lam, &w)| {
        let r = 1.0 / dist(lam);
        (q1 + w * r, q2 + w * r * r)
    })
}

/// `A + t v v*` with a fresh eigendecomposition.
pub fn rank1_update(acc: &HermitianAccumulator, v: &CVector, t: f64) -> HermitianAccumulator {
    if t == 0.0 {
        return acc.clone();
    }
    let mut matrix = acc.matrix.clone();
    matrix.ger(C64::new(t, 0.0), v, &v.conjugate(), C64::new(1.0, 0.0));
    let matrix = hermitize(&matrix);
    let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix);
    HermitianAccumulator { matrix, eigenvalues, eigenvectors }
}

/// Per-iteration precomputation that evaluates both gates of many candidates
/// against one accumulator.
///
/// Holds the shifted barriers `l' = l + δ_L`, `u' = u + δ_U` and the potential
/// differences that normalize the squared resolvent terms.
#[derive(Debug, Clone)]
pub struct GatePair<'a> {
    acc: &'a HermitianAccumulator,
    inv_lower: Vec<f64>,
    inv_upper: Vec<f64>,
    lower_step: f64,
    upper_step: f64,
    lower_infinite: bool,
    upper_infinite: bool,
}

impl<'a> GatePair<'a> {
    pub fn new(acc: &'a HermitianAccumulator, barriers: BarrierPair, delta_l: f64, delta_u: f64) -> Result<Self> {
        check_shift(delta_l, "lower")?;
        check_shift(delta_u, "upper")?;
        let l_new = barriers.l + delta_l;
        let u_new = barriers.u + delta_u;
        let lower_step = lower_potential(acc, l_new)? - lower_potential(acc, barriers.l)?;
        let upper_step = upper_potential(acc, barriers.u)? - upper_potential(acc, u_new)?;
        Ok(GatePair {
            acc,
            inv_lower: acc.eigenvalues.iter().map(|&lam| 1.0 / (lam - l_new)).collect(),
            inv_upper: acc.eigenvalues.iter().map(|&lam| 1.0 / (u_new - lam)).collect(),
            lower_step,
            upper_step,
            lower_infinite: delta_l == 0.0,
            upper_infinite: delta_u == 0.0,
        })
    }

    /// `(L_A(v), U_A(v))` from a single pass over the eigencomponents.
    pub fn evaluate(&self, v: &CVector) -> (Gate, Gate) {
        let coeffs = self.acc.eigenvectors.ad_mul(v);
        self.evaluate_coefficients(coeffs.as_slice())
    }

    /// Same as [`GatePair::evaluate`] for a candidate already expressed in
    /// the eigenbasis.
    pub fn evaluate_coefficients(&self, coeffs: &[C64]) -> (Gate, Gate) {
        let (mut l1, mut l2, mut u1, mut u2) = (0.0, 0.0, 0.0, 0.0);
        for ((c, &a), &b) in coeffs.iter().zip(&self.inv_lower).zip(&self.inv_upper) {
            let w = c.norm_sqr();
            l1 += w * a;
            l2 += w * a * a;
            u1 += w * b;
            u2 += w * b * b;
        }
        let lower = if self.lower_infinite { Gate::Infinite } else { Gate::Finite(l2 / self.lower_step - l1) };
        let upper = if self.upper_infinite { Gate::Infinite } else { Gate::Finite(u2 / self.upper_step + u1) };
        (lower, upper)
    }
}
