//! Deterministic weighted subsampling with moving spectral barriers.
//!
//! Starting from the zero matrix, each of the `n = ⌈bm⌉` iterations adds one
//! rank-one term `t·y yᵀ` chosen so that the spectrum stays strictly between a
//! lower and an upper barrier, both of which advance every step. After the
//! last step the weights are rescaled so that the selected subframe has lower
//! bound `A` and upper bound at most `γB(1+Δ)`.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::frame::{weighted_frame_bounds, FrameBounds, FrameMatrix, WeightedSubframe};
use crate::linalg::{ceil_tol, CVector};
use crate::potentials::{
    lower_potential, rank1_update, upper_potential, BarrierPair, Gate, GatePair, HermitianAccumulator,
};

/// Order in which candidates are offered to the selection test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Traversal {
    /// Rows `0, 1, …, M−1` every iteration.
    Sequential,
    /// A fresh seeded permutation every iteration.
    RandomPermutation,
    /// One seeded permutation for the whole run, read cyclically: each
    /// iteration resumes right after the previously selected candidate.
    RandomCyclic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssConfig {
    /// Oversampling factor; must exceed `κ²`.
    pub b: f64,
    /// Stability factor `Δ ≥ 0`.
    pub delta: f64,
    pub traversal: Traversal,
    pub seed: u64,
    /// Keep the initial barrier shifts instead of the variable ones.
    pub fixed_shifts: bool,
    /// Record per-iteration diagnostics.
    pub record_trace: bool,
    /// Number of candidates whose gates are evaluated together (in parallel
    /// when larger than one). The selected index does not depend on it.
    pub scan_chunk: usize,
}

impl BssConfig {
    pub fn new(b: f64) -> Self {
        BssConfig {
            b,
            delta: 0.0,
            traversal: Traversal::RandomPermutation,
            seed: 0,
            fixed_shifts: false,
            record_trace: false,
            scan_chunk: 1,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_traversal(mut self, traversal: Traversal) -> Self {
        self.traversal = traversal;
        self
    }

    pub fn with_fixed_shifts(mut self, fixed: bool) -> Self {
        self.fixed_shifts = fixed;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn with_scan_chunk(mut self, chunk: usize) -> Self {
        self.scan_chunk = chunk.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 1.0) {
            return Err(FrameError::InvalidConfig(format!("oversampling factor b must exceed 1, got {}", self.b)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(FrameError::InvalidConfig(format!("stability factor must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// `κ = (B/2A + 1/2) + √((B/2A + 1/2)² − 1)`.
pub fn kappa(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b >= a && b.is_finite()) {
        return Err(FrameError::InvalidInput(format!("kappa needs 0 < A <= B, got A={a}, B={b}")));
    }
    let x = b / (2.0 * a) + 0.5;
    Ok(x + (x * x - 1.0).max(0.0).sqrt())
}

/// `γ = (√b+1)² / ((√b−1)(√b−κ))`.
pub fn gamma(b: f64, kappa: f64) -> Result<f64> {
    if !(kappa >= 1.0 && b > kappa * kappa && b.is_finite()) {
        return Err(FrameError::InvalidInput(format!("gamma needs b > kappa^2 >= 1, got b={b}, kappa={kappa}")));
    }
    let r = b.sqrt();
    Ok((r + 1.0).powi(2) / ((r - 1.0) * (r - kappa)))
}

/// Source of candidate vectors for the selection scan.
pub trait CandidateScanner {
    type Id: Clone + Eq + Hash + Send + Sync;

    fn dim(&self) -> usize;

    /// Number of candidates `M` entering the selection threshold.
    fn population(&self) -> f64;

    /// Restart the traversal for iteration `k` (1-based).
    fn begin_iteration(&mut self, k: usize);

    /// Next candidate in traversal order, `None` once exhausted.
    fn next_candidate(&mut self) -> Option<(Self::Id, CVector)>;

    /// The `consumed`-th candidate of the current iteration was selected.
    fn accept(&mut self, _consumed: usize) {}
}

/// Scanner over the rows of a dense frame.
pub struct DenseScanner<'a> {
    frame: &'a FrameMatrix,
    allowed: Option<&'a [bool]>,
    traversal: Traversal,
    seed: u64,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    swaps: Vec<(usize, usize)>,
    pos: usize,
    cursor: usize,
    /// Scan position after each candidate handed out in this iteration.
    handed: Vec<usize>,
}

impl<'a> DenseScanner<'a> {
    pub fn new(frame: &'a FrameMatrix, traversal: Traversal, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..frame.len()).collect();
        if traversal == Traversal::RandomCyclic {
            perm.shuffle(&mut rng);
        }
        DenseScanner { frame, allowed: None, traversal, seed, rng, perm, swaps: Vec::new(), pos: 0, cursor: 0, handed: Vec::new() }
    }

    /// Skip rows whose mask entry is `false`.
    pub fn with_mask(mut self, allowed: &'a [bool]) -> Self {
        self.allowed = Some(allowed);
        self
    }

    fn next_position(&mut self) -> Option<usize> {
        let len = self.perm.len();
        if self.pos >= len {
            return None;
        }
        let idx = match self.traversal {
            Traversal::Sequential => self.pos,
            Traversal::RandomPermutation => {
                // Lazy Fisher-Yates: only the prefix actually scanned is shuffled.
                let r = self.rng.random_range(self.pos..len);
                self.perm.swap(self.pos, r);
                self.swaps.push((self.pos, r));
                self.perm[self.pos]
            }
            Traversal::RandomCyclic => self.perm[(self.cursor + self.pos) % len],
        };
        self.pos += 1;
        Some(idx)
    }
}

impl CandidateScanner for DenseScanner<'_> {
    type Id = usize;

    fn dim(&self) -> usize {
        self.frame.dim()
    }

    fn population(&self) -> f64 {
        self.frame.len() as f64
    }

    fn begin_iteration(&mut self, k: usize) {
        while let Some((a, b)) = self.swaps.pop() {
            self.perm.swap(a, b);
        }
        self.pos = 0;
        self.handed.clear();
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.rng.set_stream(k as u64);
    }

    fn next_candidate(&mut self) -> Option<(usize, CVector)> {
        loop {
            let i = self.next_position()?;
            if self.allowed.is_none_or(|mask| mask[i]) {
                self.handed.push(self.pos);
                return Some((i, self.frame.element(i)));
            }
        }
    }

    fn accept(&mut self, consumed: usize) {
        if let Some(&pos) = consumed.checked_sub(1).and_then(|c| self.handed.get(c)) {
            self.cursor = (self.cursor + pos) % self.perm.len();
        }
    }
}

/// Diagnostics of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub l_prev: f64,
    pub u_prev: f64,
    pub eps_l: f64,
    pub eps_u: f64,
    pub delta_l: f64,
    pub delta_u: f64,
    pub l: f64,
    pub u: f64,
    pub lower_gate: f64,
    pub upper_gate: f64,
    pub t: f64,
    pub scans: usize,
    /// Extreme eigenvalues of the accumulator after the update.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `1/δ_L − κε_L − (B/A)(1/δ_U + ε_U) − Δ(1 − 1/√b)`.
    pub conservation_residual: f64,
}

/// Everything a run produces before the result is attached to a frame.
#[derive(Debug, Clone)]
pub struct BssOutcome<Id> {
    /// Selected candidates in order of first selection with their final,
    /// rescaled weights.
    pub selected: Vec<(Id, f64)>,
    /// Accumulated step sizes `ŝ` aligned with `selected`.
    pub raw_weights: Vec<f64>,
    pub kappa: f64,
    pub gamma: f64,
    pub n_iterations: usize,
    pub l_final: f64,
    pub u_final: f64,
    pub scale: f64,
    pub avg_scans: f64,
    pub trace: Vec<IterationRecord>,
}

/// Run the barrier iteration against an arbitrary candidate source.
///
/// `bounds` must be valid frame bounds (`A > 0`) for the candidate family.
pub fn bss_run<S: CandidateScanner>(
    scanner: &mut S,
    bounds: FrameBounds,
    cfg: &BssConfig,
) -> Result<BssOutcome<S::Id>> {
    cfg.validate()?;
    if !(bounds.a > 0.0) {
        return Err(FrameError::InvalidInput("BSS needs a lower frame bound A > 0".into()));
    }
    let m = scanner.dim();
    let kap = kappa(bounds.a, bounds.b)?;
    if cfg.b <= kap * kap {
        return Err(FrameError::InvalidConfig(format!(
            "oversampling factor b = {} must exceed kappa^2 = {}",
            cfg.b,
            kap * kap
        )));
    }
    let gam = gamma(cfg.b, kap)?;
    let ratio = bounds.b / bounds.a;
    let sb = cfg.b.sqrt();
    let mf = m as f64;
    let n = ceil_tol(cfg.b * mf);
    let threshold = cfg.delta / (2.0 * scanner.population()) * (1.0 - 1.0 / sb);
    let target = cfg.delta * (1.0 - 1.0 / sb);

    let mut barriers = BarrierPair { l: -mf * sb * kap / (1.0 + cfg.delta), u: mf * (cfg.b + sb) / (sb - 1.0) * ratio };
    let delta_l0 = 1.0 / (1.0 + cfg.delta);
    let delta_u0 = (sb + 1.0) / (sb - 1.0) * ratio;
    let mut acc = HermitianAccumulator::zeros(m);
    let eps_l0 = lower_potential(&acc, barriers.l)?;
    let eps_u0 = upper_potential(&acc, barriers.u)?;

    let mut slot: HashMap<S::Id, usize> = HashMap::new();
    let mut selected: Vec<S::Id> = Vec::new();
    let mut raw: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut total_scans = 0usize;
    let chunk = cfg.scan_chunk.max(1);

    for k in 1..=n {
        let invariant = |e: FrameError| FrameError::InternalInvariant(format!("iteration {k}: {e}"));
        let eps_l = lower_potential(&acc, barriers.l).map_err(invariant)?;
        let eps_u = upper_potential(&acc, barriers.u).map_err(invariant)?;
        let (delta_l, delta_u) = if cfg.fixed_shifts {
            (delta_l0, delta_u0)
        } else {
            (
                1.0 / (1.0 / delta_l0 - kap * eps_l0 + kap * eps_l),
                1.0 / (1.0 / delta_u0 + eps_u0 - eps_u),
            )
        };
        if !(delta_l > 0.0 && delta_l.is_finite() && delta_u > 0.0 && delta_u.is_finite()) {
            return Err(FrameError::InternalInvariant(format!(
                "iteration {k}: barrier shifts left the positive range (δ_L={delta_l}, δ_U={delta_u})"
            )));
        }
        let conservation_residual = 1.0 / delta_l - kap * eps_l - ratio * (1.0 / delta_u + eps_u) - target;
        let gates = GatePair::new(&acc, barriers, delta_l, delta_u).map_err(invariant)?;

        scanner.begin_iteration(k);
        let mut scans = 0usize;
        let mut choice = None;
        'scan: loop {
            let batch: Vec<(S::Id, CVector)> = std::iter::from_fn(|| scanner.next_candidate()).take(chunk).collect();
            if batch.is_empty() {
                break;
            }
            let evaluated: Vec<(Gate, Gate)> = if batch.len() > 1 {
                batch.par_iter().map(|(_, v)| gates.evaluate(v)).collect()
            } else {
                batch.iter().map(|(_, v)| gates.evaluate(v)).collect()
            };
            for ((id, v), (lg, ug)) in batch.into_iter().zip(evaluated) {
                scans += 1;
                let (Some(lv), Some(uv)) = (lg.finite(), ug.finite()) else { continue };
                // A zero vector has L = U = 0 and cannot move the spectrum.
                if uv <= 0.0 || !(lv - uv >= threshold) {
                    continue;
                }
                choice = Some((id, v, lv, uv));
                break 'scan;
            }
        }
        total_scans += scans;
        let Some((id, v, lv, uv)) = choice else {
            return Err(FrameError::SelectionFailure { iteration: k, scanned: scans });
        };
        scanner.accept(scans);
        let t = 2.0 / (lv + uv);
        let at = *slot.entry(id.clone()).or_insert_with(|| {
            selected.push(id);
            raw.push(0.0);
            raw.len() - 1
        });
        raw[at] += t;
        acc = rank1_update(&acc, &v, t);
        let prev = barriers;
        barriers = BarrierPair { l: prev.l + delta_l, u: prev.u + delta_u };
        if !barriers.contains(&acc) {
            return Err(FrameError::InternalInvariant(format!(
                "iteration {k}: spectrum [{}, {}] escaped barriers ({}, {})",
                acc.lambda_min(),
                acc.lambda_max(),
                barriers.l,
                barriers.u
            )));
        }
        if cfg.record_trace {
            trace.push(IterationRecord {
                k,
                l_prev: prev.l,
                u_prev: prev.u,
                eps_l,
                eps_u,
                delta_l,
                delta_u,
                l: barriers.l,
                u: barriers.u,
                lower_gate: lv,
                upper_gate: uv,
                t,
                scans,
                lambda_min: acc.lambda_min(),
                lambda_max: acc.lambda_max(),
                conservation_residual,
            });
        }
    }

    if !(barriers.l > 0.0) {
        return Err(FrameError::InternalInvariant(format!("final lower barrier {} is not positive", barriers.l)));
    }
    let scale = 0.5 * (bounds.a / barriers.l + bounds.b * gam * (1.0 + cfg.delta) / barriers.u);
    let selected = selected.into_iter().zip(raw.iter().map(|&r| scale * r)).collect();
    Ok(BssOutcome {
        selected,
        raw_weights: raw,
        kappa: kap,
        gamma: gam,
        n_iterations: n,
        l_final: barriers.l,
        u_final: barriers.u,
        scale,
        avg_scans: if n > 0 { total_scans as f64 / n as f64 } else { 0.0 },
        trace,
    })
}

/// Turn an outcome over dense rows into a subframe sorted by row index.
pub fn outcome_to_subframe(outcome: &BssOutcome<usize>, parent_len: usize) -> Result<WeightedSubframe> {
    let mut pairs = outcome.selected.clone();
    pairs.sort_by_key(|&(i, _)| i);
    let (indices, weights) = pairs.into_iter().unzip();
    WeightedSubframe::new(indices, weights, parent_len)
}

/// Weighted subframe of `y` with at most `⌈bm⌉` elements and bounds in
/// `[A, γB(1+Δ)]`.
pub fn bss_subsample(y: &FrameMatrix, bounds: FrameBounds, cfg: &BssConfig) -> Result<WeightedSubframe> {
    let outcome = bss_run(&mut DenseScanner::new(y, cfg.traversal, cfg.seed), bounds, cfg)?;
    outcome_to_subframe(&outcome, y.len())
}

/// Serializable summary of a run on a dense frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssReport {
    pub m: usize,
    #[serde(rename = "M")]
    pub len: usize,
    pub b: f64,
    pub delta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub n_iterations: usize,
    #[serde(rename = "J")]
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub bounds_in: FrameBounds,
    pub bounds_out: FrameBounds,
    pub avg_inner_scans: f64,
}

impl BssReport {
    pub fn new(
        y: &FrameMatrix,
        bounds_in: FrameBounds,
        cfg: &BssConfig,
        outcome: &BssOutcome<usize>,
        sub: &WeightedSubframe,
    ) -> Result<Self> {
        Ok(BssReport {
            m: y.dim(),
            len: y.len(),
            b: cfg.b,
            delta: cfg.delta,
            kappa: outcome.kappa,
            gamma: outcome.gamma,
            n_iterations: outcome.n_iterations,
            indices: sub.indices.clone(),
            weights: sub.weights.clone(),
            bounds_in,
            bounds_out: weighted_frame_bounds(y, sub)?,
            avg_inner_scans: outcome.avg_scans,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::frame_bounds;
    use crate::linalg::{CMatrix, C64};
    use approx::assert_relative_eq;

    #[test]
    fn kappa_values() {
        assert_relative_eq!(kappa(2.0, 2.0).unwrap(), 1.0);
        assert_relative_eq!(kappa(1.0, 3.0).unwrap(), 2.0 + 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(kappa(1.0, 2.0).unwrap(), 1.5 + 1.25f64.sqrt(), epsilon = 1e-14);
        assert!(kappa(0.0, 1.0).is_err());
        assert!(kappa(2.0, 1.0).is_err());
    }

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(4.0, 1.0).unwrap(), 9.0, epsilon = 1e-14);
        assert_relative_eq!(gamma(9.0, 1.0).unwrap(), 4.0, epsilon = 1e-14);
        let b: f64 = 2.5;
        assert_relative_eq!(gamma(b, 1.0).unwrap(), ((b.sqrt() + 1.0) / (b.sqrt() - 1.0)).powi(2), epsilon = 1e-13);
        assert!(gamma(4.0, 2.0).is_err());
    }

    fn duplicated_identity(m: usize) -> FrameMatrix {
        let s = C64::new(0.5f64.sqrt(), 0.0);
        FrameMatrix::new(CMatrix::from_fn(2 * m, m, |i, j| if i % m == j { s } else { C64::new(0.0, 0.0) })).unwrap()
    }

    #[test]
    fn duplicated_identity_rows() {
        let m = 5;
        let y = duplicated_identity(m);
        let fb = frame_bounds(&y);
        assert_relative_eq!(fb.a, 1.0, epsilon = 1e-12);
        for traversal in [Traversal::Sequential, Traversal::RandomPermutation] {
            let cfg = BssConfig::new(4.0).with_traversal(traversal).with_seed(3);
            let sub = bss_subsample(&y, fb, &cfg).unwrap();
            assert!(sub.len() <= 4 * m);
            let out = weighted_frame_bounds(&y, &sub).unwrap();
            assert!(out.a >= 1.0 - 1e-8 && out.b <= 9.0 + 1e-8, "{out:?}");
            assert!(sub.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn rejects_small_oversampling() {
        let y = FrameMatrix::from_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let fb = frame_bounds(&y);
        let err = bss_subsample(&y, fb, &BssConfig::new(5.0)).unwrap_err();
        assert!(matches!(err, FrameError::InvalidConfig(_)));
    }

    #[test]
    fn chunked_scan_is_identical() {
        let y = duplicated_identity(4);
        let fb = frame_bounds(&y);
        for traversal in [Traversal::Sequential, Traversal::RandomPermutation, Traversal::RandomCyclic] {
            let cfg = BssConfig::new(3.0).with_seed(11).with_traversal(traversal);
            let a = bss_subsample(&y, fb, &cfg).unwrap();
            let b = bss_subsample(&y, fb, &cfg.clone().with_scan_chunk(7)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trace_satisfies_identity() {
        let y = duplicated_identity(3);
        let fb = frame_bounds(&y);
        let cfg = BssConfig::new(2.0).with_trace(true).with_delta(0.1);
        let out = bss_run(&mut DenseScanner::new(&y, cfg.traversal, cfg.seed), fb, &cfg).unwrap();
        assert_eq!(out.trace.len(), 6);
        for rec in &out.trace {
            assert!(rec.conservation_residual.abs() < 1e-9);
            assert!(rec.lambda_min > rec.l && rec.lambda_max < rec.u);
            assert!(rec.lower_gate >= rec.upper_gate);
        }
    }
}
