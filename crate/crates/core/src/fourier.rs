//! Fourier frames on the torus: frequency sets, node grids and the frame
//! matrix `exp(2πi⟨k,x⟩)/√M`.

use std::collections::HashSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::frame::FrameMatrix;
use crate::linalg::{CMatrix, CVector, C64};
use crate::recovery::{BasisSpec, Domain, NodeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IndexKind {
    HyperbolicCross { r: u64 },
    FullGrid { lo: i64, hi: i64 },
    Random { count: usize, half_width: i64, seed: u64 },
}

/// Distinct integer frequencies `k ∈ ℤ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyIndexSet {
    pub d: usize,
    pub indices: Vec<Vec<i64>>,
    pub kind: IndexKind,
}

impl FrequencyIndexSet {
    /// Wrap an explicit list after checking dimensions and distinctness.
    pub fn new(d: usize, indices: Vec<Vec<i64>>, kind: IndexKind) -> Result<Self> {
        if indices.iter().any(|k| k.len() != d) {
            return Err(FrameError::InvalidInput(format!("every frequency must have {d} components")));
        }
        let distinct: HashSet<&Vec<i64>> = indices.iter().collect();
        if distinct.len() != indices.len() {
            return Err(FrameError::InvalidInput("frequencies must be distinct".into()));
        }
        Ok(FrequencyIndexSet { d, indices, kind })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// All `k ∈ ℤ^d` with `∏_j max{1,|k_j|} ≤ R`, in lexicographic order.
pub fn hyperbolic_cross(d: usize, r: u64) -> Result<FrequencyIndexSet> {
    if d == 0 || r == 0 {
        return Err(FrameError::InvalidInput(format!("hyperbolic cross needs d >= 1 and R >= 1, got d={d}, R={r}")));
    }
    fn fill(d: usize, budget: u64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        let reach = budget as i64;
        for k in -reach..=reach {
            let cost = k.unsigned_abs().max(1);
            prefix.push(k);
            fill(d, budget / cost, prefix, out);
            prefix.pop();
        }
    }
    let mut indices = Vec::new();
    fill(d, r, &mut Vec::with_capacity(d), &mut indices);
    Ok(FrequencyIndexSet { d, indices, kind: IndexKind::HyperbolicCross { r } })
}

/// The full grid `{lo, …, hi}^d`.
pub fn full_grid(d: usize, lo: i64, hi: i64) -> Result<FrequencyIndexSet> {
    if d == 0 || lo > hi {
        return Err(FrameError::InvalidInput(format!("full grid needs d >= 1 and lo <= hi, got d={d}, [{lo}, {hi}]")));
    }
    let width = (hi - lo + 1) as usize;
    let total = width.checked_pow(d as u32).ok_or_else(|| FrameError::InvalidInput("full grid too large".into()))?;
    let indices = (0..total)
        .map(|mut idx| {
            let mut k = vec![0; d];
            for slot in k.iter_mut().rev() {
                *slot = lo + (idx % width) as i64;
                idx /= width;
            }
            k
        })
        .collect();
    Ok(FrequencyIndexSet { d, indices, kind: IndexKind::FullGrid { lo, hi } })
}

/// `count` distinct frequencies drawn uniformly from `[−h, h]^d ∩ ℤ^d`.
pub fn random_frequencies(d: usize, count: usize, half_width: i64, seed: u64) -> Result<FrequencyIndexSet> {
    if d == 0 || half_width < 0 {
        return Err(FrameError::InvalidInput("random frequencies need d >= 1 and a nonnegative box".into()));
    }
    let side = (2 * half_width + 1) as f64;
    if side.powi(d as i32) < count as f64 {
        return Err(FrameError::InvalidInput(format!("box holds fewer than {count} frequencies")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count);
    let mut indices = Vec::with_capacity(count);
    while indices.len() < count {
        let k: Vec<i64> = (0..d).map(|_| rng.random_range(-half_width..=half_width)).collect();
        if seen.insert(k.clone()) {
            indices.push(k);
        }
    }
    Ok(FrequencyIndexSet { d, indices, kind: IndexKind::Random { count, half_width, seed } })
}

/// `2π·frac(⟨k,x⟩)`; reducing before scaling keeps large frequencies accurate.
pub fn phase(k: &[i64], x: &[f64]) -> f64 {
    let s: f64 = k.iter().zip(x).map(|(&kj, &xj)| kj as f64 * xj).sum();
    TAU * (s - s.floor())
}

/// `exp(2πi⟨k,x⟩)`.
pub fn character(k: &[i64], x: &[f64]) -> C64 {
    C64::from_polar(1.0, phase(k, x))
}

/// Row `(exp(2πi⟨k,x⟩))_{k∈I}` without normalization.
pub fn character_row(freqs: &FrequencyIndexSet, x: &[f64]) -> CVector {
    CVector::from_iterator(freqs.len(), freqs.indices.iter().map(|k| character(k, x)))
}

/// Frame with rows `y^i = (exp(2πi⟨k,x^i⟩)/√M)_{k∈I}`.
pub fn fourier_frame(freqs: &FrequencyIndexSet, nodes: &NodeSet) -> Result<FrameMatrix> {
    if nodes.dim() != freqs.d {
        return Err(FrameError::InvalidInput(format!(
            "nodes have dimension {}, frequencies {}",
            nodes.dim(),
            freqs.d
        )));
    }
    let big_m = nodes.len();
    let scale = 1.0 / (big_m as f64).sqrt();
    let rows = CMatrix::from_fn(big_m, freqs.len(), |i, j| character(&freqs.indices[j], &nodes.nodes[i]) * scale);
    FrameMatrix::new(rows)
}

/// `per_axis^d` nodes `i/per_axis`, `i ∈ {0, …, per_axis−1}^d`.
pub fn equispaced_grid(d: usize, per_axis: usize) -> NodeSet {
    let total = per_axis.pow(d as u32);
    let nodes = (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for slot in x.iter_mut().rev() {
                *slot = (idx % per_axis) as f64 / per_axis as f64;
                idx /= per_axis;
            }
            x
        })
        .collect();
    NodeSet { nodes, weights: None }
}

/// Copy of `nodes` translated by `shift`.
pub fn shifted(nodes: &NodeSet, shift: &[f64]) -> NodeSet {
    let moved = nodes.nodes.iter().map(|x| x.iter().zip(shift).map(|(a, s)| a + s).collect()).collect();
    NodeSet { nodes: moved, weights: None }
}

/// Union of a grid and its translate, in that order.
pub fn doubled_grid(d: usize, per_axis: usize, shift: &[f64]) -> NodeSet {
    let base = equispaced_grid(d, per_axis);
    let mut nodes = base.nodes.clone();
    nodes.extend(shifted(&base, shift).nodes);
    NodeSet { nodes, weights: None }
}

/// Characters `exp(2πi⟨k,·⟩)`, orthonormal in `L_2([0,1)^d)`.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    pub freqs: FrequencyIndexSet,
}

impl BasisSpec for FourierBasis {
    fn dim(&self) -> usize {
        self.freqs.len()
    }

    fn domain(&self) -> Domain {
        Domain::unit_cube(self.freqs.d)
    }

    fn evaluate(&self, k: usize, x: &[f64]) -> C64 {
        character(&self.freqs.indices[k], x)
    }

    fn evaluate_all(&self, x: &[f64]) -> CVector {
        character_row(&self.freqs, x)
    }

    fn sup_norm_sq(&self) -> Option<f64> {
        Some(1.0)
    }
}
