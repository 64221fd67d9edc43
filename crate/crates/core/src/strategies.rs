//! User-facing subsampling strategies.
//!
//! Random norm sampling (weighted and unweighted), BSS on the column
//! orthonormalized frame, the unweighted PlainBSS construction and the
//! two-step pipeline that combines random sampling with PlainBSS.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bss::{bss_run, outcome_to_subframe, BssConfig, BssOutcome, DenseScanner, Traversal};
use crate::error::{FrameError, Result};
use crate::frame::{frobenius_norm_sq, FrameBounds, FrameMatrix, WeightedSubframe};
use crate::linalg::{ceil_tol, floor_tol, pencil_extremes, weighted_outer_gram, CMatrix, C64};
use crate::precondition::{extend_with_block_count, orthonormalize_columns_seeded, padded_len, zero_pad};

/// Parameters of the random sampling strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDrawConfig {
    /// Failure probability.
    pub p: f64,
    /// Relative deviation of the frame bounds.
    pub t: f64,
    /// Mixing weight between uniform and leverage density (unweighted only).
    pub c: f64,
    pub seed: u64,
    /// Explicit number of draws instead of the theorem's count.
    pub n_override: Option<usize>,
}

impl RandomDrawConfig {
    pub fn new(p: f64, t: f64) -> Self {
        RandomDrawConfig { p, t, c: 0.5, seed: 0, n_override: None }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_draws(mut self, n: usize) -> Self {
        self.n_override = Some(n);
        self
    }

    fn validate(&self, needs_c: bool) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.p) || !open(self.t) {
            return Err(FrameError::InvalidConfig(format!(
                "p and t must lie in (0,1), got p={}, t={}",
                self.p, self.t
            )));
        }
        if needs_c && !open(self.c) {
            return Err(FrameError::InvalidConfig(format!("c must lie in (0,1), got {}", self.c)));
        }
        if self.n_override == Some(0) {
            return Err(FrameError::InvalidConfig("number of draws must be positive".into()));
        }
        Ok(())
    }
}

/// Draw count `⌈3B/(At²)·m·log(2m/p)⌉` for weighted random sampling.
pub fn weighted_draw_count(m: usize, bounds: FrameBounds, p: f64, t: f64) -> usize {
    let mf = m as f64;
    ceil_tol(3.0 * bounds.ratio() / (t * t) * mf * (2.0 * mf / p).ln()).max(1)
}

/// Draw count `⌈3/(ct²)·m·log(m/p)⌉` for unweighted random sampling.
pub fn unweighted_draw_count(m: usize, c: f64, p: f64, t: f64) -> usize {
    let mf = m as f64;
    ceil_tol(3.0 / (c * t * t) * mf * (mf / p).ln()).max(1)
}

fn draw_indices(density: &[f64], n: usize, seed: u64) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(density)
        .map_err(|e| FrameError::InvalidInput(format!("sampling density is degenerate: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// `ϱ_i = ‖y^i‖² / ‖Y‖_F²`; zero rows get probability zero.
pub fn norm_density(y: &FrameMatrix) -> Result<Vec<f64>> {
    let total = frobenius_norm_sq(y);
    if !(total > 0.0) {
        return Err(FrameError::InvalidInput("frame has no nonzero row".into()));
    }
    Ok(y.row_norms_sq().into_iter().map(|r| r / total).collect())
}

/// Random weighted subframe: `n` i.i.d. draws by squared row norm, each
/// carrying weight `1/(nϱ_i)`; duplicate draws add up.
pub fn random_weighted_subsample(
    y: &FrameMatrix,
    bounds: FrameBounds,
    cfg: &RandomDrawConfig,
) -> Result<WeightedSubframe> {
    cfg.validate(false)?;
    if !bounds.is_frame() {
        return Err(FrameError::InvalidInput("random weighted sampling needs A > 0".into()));
    }
    let n = cfg.n_override.unwrap_or_else(|| weighted_draw_count(y.dim(), bounds, cfg.p, cfg.t));
    let rho = norm_density(y)?;
    let mut acc = vec![0.0; y.len()];
    for i in draw_indices(&rho, n, cfg.seed)? {
        acc[i] += 1.0 / (n as f64 * rho[i]);
    }
    let (indices, weights) = acc.into_iter().enumerate().filter(|&(_, w)| w > 0.0).unzip();
    WeightedSubframe::new(indices, weights, y.len())
}

/// Mixed density `(1−c)/M + c‖ỹ^i‖²/m` on the column-orthonormalized frame.
pub fn mixed_density(y: &FrameMatrix, c: f64, seed: u64) -> Result<Vec<f64>> {
    let pre = orthonormalize_columns_seeded(y, seed)?;
    let (len, m) = (y.len() as f64, y.dim() as f64);
    Ok(pre.ytilde.row_norms_sq().into_iter().map(|r| (1.0 - c) / len + c * r / m).collect())
}

/// Random unweighted selection: `n` i.i.d. draws from the mixed density,
/// returned in draw order (a multiset).
pub fn random_unweighted_subsample(y: &FrameMatrix, cfg: &RandomDrawConfig) -> Result<Vec<usize>> {
    cfg.validate(true)?;
    if y.len() < y.dim() {
        return Err(FrameError::InvalidInput(format!(
            "unweighted sampling needs M >= m, got M={}, m={}",
            y.len(),
            y.dim()
        )));
    }
    let n = cfg.n_override.unwrap_or_else(|| unweighted_draw_count(y.dim(), cfg.c, cfg.p, cfg.t));
    let rho = mixed_density(y, cfg.c, cfg.seed)?;
    draw_indices(&rho, n, cfg.seed.wrapping_add(1))
}

/// Extreme eigenvalues of the pencil
/// `(sub_scale·∑_{i∈J} y^i(y^i)*, all_scale·∑_i y^i(y^i)*)`; `J` may repeat.
pub fn subset_pencil_bounds(y: &FrameMatrix, subset: &[usize], sub_scale: f64, all_scale: f64) -> Result<(f64, f64)> {
    if let Some(i) = subset.iter().find(|&&i| i >= y.len()) {
        return Err(FrameError::InvalidInput(format!("index {i} out of range")));
    }
    let weights = vec![sub_scale; subset.len()];
    let num = weighted_outer_gram(y.matrix(), subset, &weights);
    let den = y.gram().scale(all_scale);
    pencil_extremes(&num, &den)
}

/// Same pencil for a weighted subframe against the full frame.
pub fn weighted_pencil_bounds(y: &FrameMatrix, sub: &WeightedSubframe) -> Result<(f64, f64)> {
    let num = weighted_outer_gram(y.matrix(), &sub.indices, &sub.weights);
    pencil_extremes(&num, &y.gram())
}

/// Result of BSS run on the column-orthonormalized frame.
#[derive(Debug, Clone)]
pub struct BssPerpResult {
    pub subframe: WeightedSubframe,
    pub outcome: BssOutcome<usize>,
}

/// BSS on the orthonormalized columns of `y` with bounds `(1, 1)`; the
/// weights apply to the original rows and satisfy
/// `Y*Y ⪯ ∑_J s_i y^i(y^i)* ⪯ γ(1+Δ)·Y*Y` with `γ = (√b+1)²/(√b−1)²`.
pub fn bss_perp(y: &FrameMatrix, cfg: &BssConfig) -> Result<BssPerpResult> {
    let pre = orthonormalize_columns_seeded(y, cfg.seed)?;
    let tight = FrameBounds { a: 1.0, b: 1.0 };
    let mut scanner = DenseScanner::new(&pre.ytilde, cfg.traversal, cfg.seed);
    let outcome = bss_run(&mut scanner, tight, cfg)?;
    let subframe = outcome_to_subframe(&outcome, y.len())?;
    Ok(BssPerpResult { subframe, outcome })
}

/// Constant `(B/β)(√b+1)²/(√b−1)²` with
/// `(1/M)∑_i |⟨a,y^i⟩|² ≤ const·(1/m)∑_{i∈J}|⟨a,y^i⟩|²` when every row
/// satisfies `‖y^i‖² ≥ βm/M`.
pub fn unweighted_lower_certificate(beta: f64, upper: f64, b: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(FrameError::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if !(b > 1.0) {
        return Err(FrameError::InvalidInput(format!("b must exceed 1, got {b}")));
    }
    let r = b.sqrt();
    Ok(upper / beta * ((r + 1.0) / (r - 1.0)).powi(2))
}

/// Parameters derived from the target oversampling `b′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlainBssPlan {
    pub b_prime: f64,
    /// Oversampling handed to BSS, `(2b′+1)/3`.
    pub b: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    /// Number of block columns `⌈αm⌉`.
    pub blocks: usize,
    /// Upper bound `⌈(1+α)m⌉` on the extended dimension.
    pub m_prime_bound: usize,
    /// `⌈b′m⌉`.
    pub budget: usize,
}

pub fn plan_plain_bss(m: usize, b_prime: f64) -> Result<PlainBssPlan> {
    if m < 10 {
        return Err(FrameError::InvalidConfig(format!("PlainBSS needs m >= 10, got {m}")));
    }
    let mf = m as f64;
    if !(b_prime.is_finite() && b_prime >= 1.0 + 10.0 / mf - 1e-12) {
        return Err(FrameError::InvalidConfig(format!(
            "PlainBSS needs b' >= 1 + 10/m = {}, got {b_prime}",
            1.0 + 10.0 / mf
        )));
    }
    let b = (2.0 * b_prime + 1.0) / 3.0;
    let alpha_prime = (b_prime - 1.0) / (2.0 * b_prime + 1.0);
    let blocks = floor_tol(alpha_prime * mf);
    if blocks == 0 {
        return Err(FrameError::InvalidConfig(format!("b' = {b_prime} leaves no room for block columns at m = {m}")));
    }
    let alpha = blocks as f64 / mf;
    Ok(PlainBssPlan {
        b_prime,
        b,
        alpha,
        alpha_prime,
        blocks,
        m_prime_bound: blocks + m,
        budget: ceil_tol(b_prime * mf),
    })
}

/// Traversal and stability settings shared by the unweighted strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub delta: f64,
    pub traversal: Traversal,
    pub seed: u64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions { delta: 0.0, traversal: Traversal::RandomPermutation, seed: 0 }
    }
}

impl SelectionOptions {
    pub fn config(&self, b: f64) -> BssConfig {
        BssConfig::new(b).with_delta(self.delta).with_traversal(self.traversal).with_seed(self.seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlainBssResult {
    /// Distinct selected rows of the input, ascending.
    #[serde(rename = "J")]
    pub indices: Vec<usize>,
    pub plan: PlainBssPlan,
    /// Row count after zero padding.
    pub padded_len: usize,
    pub m_prime: usize,
    pub n_iterations: usize,
    /// Selected rows that were padding and therefore left out of `J`.
    pub dropped_padding: usize,
    pub avg_inner_scans: f64,
}

impl PlainBssResult {
    /// Guaranteed constant `432b′³/(b′−1)³·(1+Δ)`.
    pub fn certified_constant(&self, delta: f64) -> f64 {
        plain_bss_constant(self.plan.b_prime, delta)
    }
}

/// `432b′³/(b′−1)³·(1+Δ)`.
pub fn plain_bss_constant(b_prime: f64, delta: f64) -> f64 {
    432.0 * b_prime.powi(3) / (b_prime - 1.0).powi(3) * (1.0 + delta)
}

/// Unweighted subset `J` with `|J| ≤ ⌈b′m⌉` and
/// `(1/M)∑_i |⟨a,y^i⟩|² ≤ 432b′³/(b′−1)³·((1+Δ)/m)·∑_{i∈J} |⟨a,y^i⟩|²`.
pub fn plain_bss(y: &FrameMatrix, b_prime: f64, opts: &SelectionOptions) -> Result<PlainBssResult> {
    let (len, m) = (y.len(), y.dim());
    let plan = plan_plain_bss(m, b_prime)?;
    if len < m + 10 {
        return Err(FrameError::InvalidInput(format!("PlainBSS needs M >= m + 10, got M={len}, m={m}")));
    }
    if plan.budget < m + 10 || plan.budget > len {
        return Err(FrameError::InvalidConfig(format!(
            "PlainBSS needs m + 10 <= ceil(b'm) <= M, got ceil(b'm)={}, m={m}, M={len}",
            plan.budget
        )));
    }
    let padded = padded_len(len, plan.blocks);
    let pre = extend_with_block_count(&zero_pad(y, padded)?, plan.blocks)?;
    let cfg = opts.config(plan.b);
    let tight = FrameBounds { a: 1.0, b: 1.0 };
    let mut scanner = DenseScanner::new(&pre.ytilde, cfg.traversal, cfg.seed);
    let outcome = bss_run(&mut scanner, tight, &cfg)?;
    let mut indices: Vec<usize> = outcome.selected.iter().filter(|&&(_, w)| w != 0.0).map(|&(i, _)| i).collect();
    let total = indices.len();
    indices.retain(|&i| i < len);
    indices.sort_unstable();
    Ok(PlainBssResult {
        dropped_padding: total - indices.len(),
        indices,
        plan,
        padded_len: padded,
        m_prime: pre.m_prime,
        n_iterations: outcome.n_iterations,
        avg_inner_scans: outcome.avg_scans,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoStepResult {
    /// Original row indices of the selected draws; the same row appears more
    /// than once only if it was drawn repeatedly and kept each time.
    #[serde(rename = "J")]
    pub indices: Vec<usize>,
    /// Number of random draws in the first step.
    pub draws: usize,
    pub plain: PlainBssResult,
}

/// Draw count `⌈(3/t²)·m·log(2m/p)⌉` of the first step.
pub fn two_step_draw_count(m: usize, p: f64, t: f64) -> usize {
    let mf = m as f64;
    ceil_tol(3.0 / (t * t) * mf * (2.0 * mf / p).ln())
}

/// Rows `y^i/‖y^i‖` for the given indices.
pub fn normalized_rows(y: &FrameMatrix, indices: &[usize]) -> Result<FrameMatrix> {
    let m = y.dim();
    let norms: Vec<f64> = indices.iter().map(|&i| y.row_norm_sq(i).sqrt()).collect();
    if norms.contains(&0.0) {
        return Err(FrameError::InvalidInput("cannot normalize a zero row".into()));
    }
    FrameMatrix::new(CMatrix::from_fn(indices.len(), m, |r, c| y.matrix()[(indices[r], c)] / C64::new(norms[r], 0.0)))
}

/// Random norm sampling followed by PlainBSS on the normalized draws.
pub fn two_step_unitnorm(
    y: &FrameMatrix,
    b_prime: f64,
    p: f64,
    t: f64,
    opts: &SelectionOptions,
) -> Result<TwoStepResult> {
    let m = y.dim();
    let plan = plan_plain_bss(m, b_prime)?;
    if y.len() < plan.budget {
        return Err(FrameError::InvalidInput(format!("two-step needs M >= ceil(b'm) = {}", plan.budget)));
    }
    RandomDrawConfig::new(p, t).validate(false)?;
    let draws = two_step_draw_count(m, p, t);
    let rho = norm_density(y)?;
    let drawn = draw_indices(&rho, draws, opts.seed)?;
    let z = normalized_rows(y, &drawn)?;
    let plain = plain_bss(&z, b_prime, opts)?;
    let indices = plain.indices.iter().map(|&pos| drawn[pos]).collect();
    Ok(TwoStepResult { indices, draws, plain })
}
