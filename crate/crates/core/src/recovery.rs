//! Sampling densities, Marcinkiewicz-Zygmund node generation and
//! least-squares recovery on finite-dimensional function spaces.

use std::io::{Read, Write};

use nalgebra::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::frame::{csv_err, FrameMatrix};
use crate::linalg::{hermitian_eigenvalues, outer_gram, CMatrix, CVector, C64};
use crate::strategies::{plain_bss, PlainBssResult, SelectionOptions};
use crate::bss::Traversal;

/// Domain `D` together with its probability measure `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Axis-parallel box with normalized Lebesgue measure.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Finite set with uniform counting measure.
    Discrete { points: Vec<Vec<f64>> },
}

impl Domain {
    pub fn unit_cube(d: usize) -> Self {
        Domain::Box { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Discrete { points } => points.first().map_or(0, Vec::len),
        }
    }

    /// One draw from `ν`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(&a, &b)| a + (b - a) * rng.random::<f64>()).collect(),
            Domain::Discrete { points } => points[rng.random_range(0..points.len())].clone(),
        }
    }

    /// Points on which envelopes are estimated: a tensor grid for boxes,
    /// the whole set otherwise.
    pub fn probe_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        match self {
            Domain::Discrete { points } => points.clone(),
            Domain::Box { lo, hi } => {
                let d = lo.len();
                let total = per_axis.pow(d as u32);
                (0..total)
                    .map(|mut idx| {
                        (0..d)
                            .map(|j| {
                                let i = idx % per_axis;
                                idx /= per_axis;
                                lo[j] + (hi[j] - lo[j]) * (i as f64 + 0.5) / per_axis as f64
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// Orthonormal system `η_1, …, η_m` in `L_2(D, ν)`.
pub trait BasisSpec: Sync {
    /// Number of functions `m`.
    fn dim(&self) -> usize;

    fn domain(&self) -> Domain;

    /// `η_k(x)` for `k < m`.
    fn evaluate(&self, k: usize, x: &[f64]) -> C64;

    /// `(η_1(x), …, η_m(x))`.
    fn evaluate_all(&self, x: &[f64]) -> CVector {
        CVector::from_fn(self.dim(), |k, _| self.evaluate(k, x))
    }

    /// Known bound on `max_k sup_x |η_k(x)|²`, if any.
    fn sup_norm_sq(&self) -> Option<f64> {
        None
    }
}

/// Basis given by a closure.
pub struct FnBasis<F> {
    pub m: usize,
    pub domain: Domain,
    pub f: F,
    pub sup_norm_sq: Option<f64>,
}

impl<F: Fn(usize, &[f64]) -> C64 + Sync> BasisSpec for FnBasis<F> {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> Domain {
        self.domain.clone()
    }

    fn evaluate(&self, k: usize, x: &[f64]) -> C64 {
        (self.f)(k, x)
    }

    fn sup_norm_sq(&self) -> Option<f64> {
        self.sup_norm_sq
    }
}

/// The first `m` functions of a larger basis.
pub struct Truncated<'a> {
    pub inner: &'a dyn BasisSpec,
    pub m: usize,
}

impl BasisSpec for Truncated<'_> {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> Domain {
        self.inner.domain()
    }

    fn evaluate(&self, k: usize, x: &[f64]) -> C64 {
        self.inner.evaluate(k, x)
    }

    fn sup_norm_sq(&self) -> Option<f64> {
        self.inner.sup_norm_sq()
    }
}

/// Monte-Carlo estimate of the Gram matrix `(⟨η_j, η_k⟩)` from `samples`
/// draws of `ν`; close to the identity for an orthonormal system.
pub fn empirical_gram(basis: &dyn BasisSpec, samples: usize, seed: u64) -> CMatrix {
    let domain = basis.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = CMatrix::zeros(samples, basis.dim());
    for i in 0..samples {
        let v = basis.evaluate_all(&domain.sample(&mut rng));
        rows.set_row(i, &v.transpose());
    }
    // Entry (j, k) is the sample mean of η_j conj(η_k).
    outer_gram(&rows).unscale(samples as f64)
}

/// Density with respect to `ν` from which candidate nodes are drawn.
pub trait NodeDensity: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Upper bound of the density on `D`, used as rejection envelope.
    fn envelope(&self) -> f64;
}

/// `φ(x) = 1/2 + (1/2m)·∑_k |η_k(x)|²`.
pub fn density_finite(basis: &dyn BasisSpec, x: &[f64]) -> f64 {
    let s: f64 = (0..basis.dim()).map(|k| basis.evaluate(k, x).norm_sqr()).sum();
    0.5 + 0.5 * s / basis.dim() as f64
}

/// `φ` of a basis as a sampling density.
pub struct FiniteDensity<'a> {
    basis: &'a dyn BasisSpec,
    envelope: f64,
}

impl<'a> FiniteDensity<'a> {
    /// The envelope is `(1 + max_k sup|η_k|²)/2` when the basis knows that
    /// bound, otherwise the maximum of `φ` on a probe grid with 25% margin.
    pub fn new(basis: &'a dyn BasisSpec) -> Self {
        let envelope = match basis.sup_norm_sq() {
            Some(s) => 0.5 * (1.0 + s),
            None => {
                let per_axis = probe_resolution(basis.domain().dim());
                let top = basis
                    .domain()
                    .probe_points(per_axis)
                    .iter()
                    .map(|x| density_finite(basis, x))
                    .fold(0.5, f64::max);
                1.25 * top
            }
        };
        FiniteDensity { basis, envelope }
    }
}

fn probe_resolution(d: usize) -> usize {
    ((4096f64).powf(1.0 / d.max(1) as f64).floor() as usize).max(2)
}

impl NodeDensity for FiniteDensity<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(density_finite(self.basis, x))
    }

    fn envelope(&self) -> f64 {
        self.envelope
    }
}

/// Truncated singular system of an embedding `H(K) → L_2`.
///
/// `basis` holds the left singular functions `η_k`; the right ones are
/// `e_k = σ_k η_k`.
pub struct SpectralModel<'a> {
    pub sigmas: Vec<f64>,
    pub basis: &'a dyn BasisSpec,
    pub kernel_diag: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// `∫ K(x,x) dν(x)`.
    pub trace: f64,
}

impl SpectralModel<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.len() != self.basis.dim() {
            return Err(FrameError::InvalidModel("one singular value per basis function is required".into()));
        }
        if self.sigmas.iter().any(|&s| !(s > 0.0)) || self.sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(FrameError::InvalidModel("singular values must be positive and nonincreasing".into()));
        }
        Ok(())
    }

    fn tail_mass(&self, m: usize) -> Result<f64> {
        self.validate()?;
        if m == 0 || m >= self.sigmas.len() {
            return Err(FrameError::InvalidModel(format!(
                "m = {m} must lie in 1..{} (the truncation length)",
                self.sigmas.len()
            )));
        }
        let head: f64 = self.sigmas[..m].iter().map(|s| s * s).sum();
        let tail = self.trace - head;
        if !(tail > 0.0) {
            return Err(FrameError::InvalidModel(format!(
                "trace {} does not exceed the partial sum {head}",
                self.trace
            )));
        }
        Ok(tail)
    }
}

/// Tolerance below zero for `K(x,x) − ∑_{k≤m} |e_k(x)|²` before the model is
/// rejected.
pub const TAIL_CLAMP: f64 = 1e-10;

/// `ϱ_m(x) = ½((1/m)∑_{k≤m}|η_k(x)|² + (K(x,x) − ∑_{k≤m}|e_k(x)|²)/(∫K dν − ∑_{k≤m}σ_k²))`.
pub fn rkhs_density(model: &SpectralModel<'_>, m: usize, x: &[f64]) -> Result<f64> {
    let tail = model.tail_mass(m)?;
    let mut head = 0.0;
    let mut energy = 0.0;
    for k in 0..m {
        let e = model.basis.evaluate(k, x).norm_sqr();
        head += e;
        energy += model.sigmas[k] * model.sigmas[k] * e;
    }
    let kxx = (model.kernel_diag)(x);
    let mut rest = kxx - energy;
    if rest < 0.0 {
        if rest < -TAIL_CLAMP * kxx.abs().max(1.0) {
            return Err(FrameError::InvalidModel(format!(
                "K(x,x) = {kxx} is smaller than the truncated sum {energy}"
            )));
        }
        rest = 0.0;
    }
    Ok(0.5 * (head / m as f64 + rest / tail))
}

/// `w_m(x) = ϱ_m(x)^{-1/2}`, zero where the density vanishes.
pub fn rkhs_weight(model: &SpectralModel<'_>, m: usize, x: &[f64]) -> Result<f64> {
    let rho = rkhs_density(model, m, x)?;
    Ok(if rho > 0.0 { rho.powf(-0.5) } else { 0.0 })
}

/// `ϱ_m` as a sampling density; its envelope is the maximum on a probe grid
/// with 25% margin.
pub struct RkhsDensity<'a, 'b> {
    model: &'b SpectralModel<'a>,
    m: usize,
    envelope: f64,
}

impl<'a, 'b> RkhsDensity<'a, 'b> {
    pub fn new(model: &'b SpectralModel<'a>, m: usize) -> Result<Self> {
        model.tail_mass(m)?;
        let domain = model.basis.domain();
        let mut top: f64 = 0.0;
        for x in domain.probe_points(probe_resolution(domain.dim())) {
            top = top.max(rkhs_density(model, m, &x)?);
        }
        Ok(RkhsDensity { model, m, envelope: 1.25 * top })
    }
}

impl NodeDensity for RkhsDensity<'_, '_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        rkhs_density(self.model, self.m, x)
    }

    fn envelope(&self) -> f64 {
        self.envelope
    }
}

/// Sampling nodes with optional per-node weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

impl NodeSet {
    pub fn new(nodes: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let set = NodeSet { nodes, weights };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.nodes.first() else {
            return Err(FrameError::InvalidInput("node set is empty".into()));
        };
        let d = first.len();
        if self.nodes.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return Err(FrameError::InvalidInput("nodes must share one dimension and be finite".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.nodes.len() || w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(FrameError::InvalidInput("weights must be nonnegative, one per node".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }

    /// CSV with header `x1,…,xd[,w]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        if self.weights.is_some() {
            header.push("w".into());
        }
        w.write_record(&header).map_err(csv_err)?;
        for (i, x) in self.nodes.iter().enumerate() {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
            if let Some(ws) = &self.weights {
                rec.push(format!("{:e}", ws[i]));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let weighted = header.iter().next_back() == Some("w");
        let d = header.len() - usize::from(weighted);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| FrameError::Parse(format!("'{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != header.len() {
                return Err(FrameError::Parse(format!("expected {} values per row, got {}", header.len(), vals.len())));
            }
            if weighted {
                weights.push(vals[d]);
            }
            nodes.push(vals[..d].to_vec());
        }
        NodeSet::new(nodes, weighted.then_some(weights))
    }
}

/// Read samples `re,im` per row (an optional header line is skipped).
pub fn read_samples_csv<R: Read>(input: R) -> Result<CVector> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if i == 0 && rec.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
            continue;
        }
        let parse = |j: usize| -> Result<f64> {
            let s = rec.get(j).ok_or_else(|| FrameError::Parse(format!("row {i}: expected re,im")))?;
            s.parse().map_err(|e| FrameError::Parse(format!("'{s}': {e}")))
        };
        out.push(C64::new(parse(0)?, parse(1)?));
    }
    Ok(CVector::from_vec(out))
}

pub fn write_samples_csv<W: Write>(samples: &CVector, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re", "im"]).map_err(csv_err)?;
    for z in samples.iter() {
        w.write_record([format!("{:e}", z.re), format!("{:e}", z.im)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Draw `count` i.i.d. nodes from `density·dν` by rejection sampling.
pub fn sample_nodes<R: Rng>(
    domain: &Domain,
    density: &dyn NodeDensity,
    count: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let env = density.envelope();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(FrameError::SamplerExhausted { attempts });
        }
        attempts += 1;
        let x = domain.sample(rng);
        let value = density.value(&x)?;
        if value > env * (1.0 + 1e-12) {
            log::warn!("density {value} exceeds rejection envelope {env}; samples are biased");
        }
        if rng.random::<f64>() * env < value {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MzConfig {
    pub p: f64,
    pub t: f64,
    /// Oversampling passed to PlainBSS.
    pub b: f64,
    pub delta: f64,
    pub traversal: Traversal,
    pub seed: u64,
    /// Redraw the candidate nodes until `λ_min((1/M)L̃*L̃) ≥ 1 − t`.
    pub redraw: bool,
    pub max_redraws: usize,
    /// Cap on rejection-sampling proposals per candidate batch.
    pub max_attempts: usize,
}

impl MzConfig {
    pub fn new(b: f64) -> Self {
        MzConfig {
            p: 0.1,
            t: 2.0 / 3.0,
            b,
            delta: 0.0,
            traversal: Traversal::RandomPermutation,
            seed: 0,
            redraw: false,
            max_redraws: 20,
            max_attempts: 100_000_000,
        }
    }
}

/// Candidate count `⌈(4/t²)·m·log(m/p)⌉`.
pub fn mz_candidate_count(m: usize, p: f64, t: f64) -> usize {
    let mf = m as f64;
    crate::linalg::ceil_tol(4.0 / (t * t) * mf * (mf / p).ln())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MzNodes {
    /// Selected nodes with weights `density^{-1/2}`.
    pub nodes: NodeSet,
    /// Number of random candidates `M`.
    pub candidates: usize,
    /// Candidate batches drawn (more than one only in redraw mode).
    pub batches: usize,
    /// `λ_min((1/M)L̃*L̃)` of the accepted batch.
    pub candidate_lambda_min: f64,
    pub plain: PlainBssResult,
}

/// Random candidates from `density·dν`, then PlainBSS on the rows
/// `η_k(x)/√density(x)`.
pub fn generate_mz_nodes(basis: &dyn BasisSpec, density: &dyn NodeDensity, cfg: &MzConfig) -> Result<MzNodes> {
    let m = basis.dim();
    let open = |x: f64| x > 0.0 && x < 1.0;
    if !open(cfg.p) || !open(cfg.t) {
        return Err(FrameError::InvalidConfig(format!("p and t must lie in (0,1), got p={}, t={}", cfg.p, cfg.t)));
    }
    crate::strategies::plan_plain_bss(m, cfg.b)?;
    let count = mz_candidate_count(m, cfg.p, cfg.t);
    let domain = basis.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut batches = 0;
    let (cands, rows, weights, lam) = loop {
        batches += 1;
        let cands = sample_nodes(&domain, density, count, cfg.max_attempts, &mut rng)?;
        let weights = cands
            .iter()
            .map(|x| density.value(x).map(|v| if v > 0.0 { v.powf(-0.5) } else { 0.0 }))
            .collect::<Result<Vec<f64>>>()?;
        let rows = design_matrix_weighted(basis, &cands, Some(&weights));
        let lam = hermitian_eigenvalues(&outer_gram(&rows).unscale(count as f64))[0];
        if !cfg.redraw || lam >= 1.0 - cfg.t {
            break (cands, rows, weights, lam);
        }
        log::info!("candidate batch {batches} has lambda_min {lam:.4} < 1 - t; redrawing");
        if batches > cfg.max_redraws {
            return Err(FrameError::SamplerExhausted { attempts: batches });
        }
    };
    let frame = FrameMatrix::new(rows)?;
    let opts = SelectionOptions { delta: cfg.delta, traversal: cfg.traversal, seed: cfg.seed };
    let plain = plain_bss(&frame, cfg.b, &opts)?;
    let nodes = plain.indices.iter().map(|&i| cands[i].clone()).collect();
    let node_weights = plain.indices.iter().map(|&i| weights[i]).collect();
    Ok(MzNodes {
        nodes: NodeSet::new(nodes, Some(node_weights))?,
        candidates: count,
        batches,
        candidate_lambda_min: lam,
        plain,
    })
}

/// Matrix `(η_k(x^i))_{i,k}`, rows scaled by `weights` when given.
pub fn design_matrix_weighted(basis: &dyn BasisSpec, nodes: &[Vec<f64>], weights: Option<&[f64]>) -> CMatrix {
    let m = basis.dim();
    let mut mat = CMatrix::zeros(nodes.len(), m);
    for (i, x) in nodes.iter().enumerate() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        for k in 0..m {
            mat[(i, k)] = basis.evaluate(k, x) * w;
        }
    }
    mat
}

/// Design matrix of a node set; weighted mode uses the stored weights.
pub fn design_matrix(basis: &dyn BasisSpec, nodes: &NodeSet, weighted: bool) -> Result<CMatrix> {
    nodes.validate()?;
    if nodes.dim() != basis.domain().dim() {
        return Err(FrameError::InvalidInput(format!(
            "nodes have dimension {} but the basis lives in dimension {}",
            nodes.dim(),
            basis.domain().dim()
        )));
    }
    let weights = if weighted {
        Some(
            nodes
                .weights
                .as_deref()
                .ok_or_else(|| FrameError::InvalidInput("weighted recovery needs node weights".into()))?,
        )
    } else {
        None
    };
    Ok(design_matrix_weighted(basis, &nodes.nodes, weights))
}

/// `λ_min((1/n)∑_i v(x^i)v(x^i)*)` with `v(x) = (η_k(x))_k`.
pub fn mz_lambda_min(basis: &dyn BasisSpec, nodes: &NodeSet) -> Result<f64> {
    let l = design_matrix(basis, nodes, false)?;
    Ok(hermitian_eigenvalues(&outer_gram(&l).unscale(nodes.len() as f64))[0])
}

/// Relative singular-value cut-off for the least-squares rank test.
pub const RANK_TOL: f64 = 1e-12;

/// Least-squares solution of `L c ≈ f` through the SVD of `L`.
#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    pub coefficients: CVector,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl LeastSquaresSolution {
    /// `‖L†‖ = 1/σ_min`.
    pub fn pseudo_inverse_norm(&self) -> f64 {
        1.0 / self.sigma_min
    }
}

pub fn solve_least_squares(l: &CMatrix, rhs: &CVector) -> Result<LeastSquaresSolution> {
    let (n, m) = l.shape();
    if rhs.len() != n {
        return Err(FrameError::InvalidInput(format!("{} samples for {n} nodes", rhs.len())));
    }
    if n < m {
        return Err(FrameError::RankDeficient { sigma_min: 0.0 });
    }
    let svd = SVD::new(l.clone(), true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if !(sigma_min > RANK_TOL * sigma_max) {
        return Err(FrameError::RankDeficient { sigma_min });
    }
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut y = u.ad_mul(rhs);
    for (yi, s) in y.iter_mut().zip(svd.singular_values.iter()) {
        *yi /= C64::new(*s, 0.0);
    }
    let coefficients = v_t.ad_mul(&y);
    Ok(LeastSquaresSolution { coefficients, sigma_min, sigma_max })
}

/// Coefficients of the least-squares fit from `V_m` to the samples; weighted
/// mode scales rows and samples by the node weights.
pub fn least_squares_recover(
    basis: &dyn BasisSpec,
    nodes: &NodeSet,
    samples: &CVector,
    weighted: bool,
) -> Result<CVector> {
    Ok(least_squares_solution(basis, nodes, samples, weighted)?.coefficients)
}

pub fn least_squares_solution(
    basis: &dyn BasisSpec,
    nodes: &NodeSet,
    samples: &CVector,
    weighted: bool,
) -> Result<LeastSquaresSolution> {
    if samples.len() != nodes.len() {
        return Err(FrameError::InvalidInput(format!("{} samples for {} nodes", samples.len(), nodes.len())));
    }
    let l = design_matrix(basis, nodes, weighted)?;
    let rhs = match (weighted, &nodes.weights) {
        (true, Some(w)) => CVector::from_fn(samples.len(), |i, _| samples[i] * w[i]),
        _ => samples.clone(),
    };
    solve_least_squares(&l, &rhs)
}

/// `∑_k c_k η_k(x)`.
pub fn evaluate_expansion(basis: &dyn BasisSpec, coefficients: &CVector, x: &[f64]) -> C64 {
    (0..basis.dim()).map(|k| coefficients[k] * basis.evaluate(k, x)).sum()
}

/// Quadrature rule for `ν`: weights sum to `ν(D) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Equal-weight tensor grid `i/per_axis` on `[0,1)^d`; exact for
    /// trigonometric polynomials with frequencies below `per_axis` in modulus.
    pub fn torus_grid(d: usize, per_axis: usize) -> Self {
        let points = crate::fourier::equispaced_grid(d, per_axis).nodes;
        let w = 1.0 / points.len() as f64;
        Quadrature { weights: vec![w; points.len()], points }
    }

    pub fn l2_norm_sq(&self, f: impl Fn(&[f64]) -> C64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x).norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n: usize,
    pub m: usize,
    pub b: Option<f64>,
    pub weighted: bool,
    pub mz_lambda_min: f64,
    /// `‖f − Sf‖_{L_2}` by quadrature.
    pub l2_error: f64,
    /// `sup` over the quadrature grid of `|f − P f|`, `P` the discrete
    /// `L_2` projection onto `V_m`.
    pub linf_best_proxy: f64,
    pub ratio: f64,
    /// `‖f − P f‖²`.
    pub projection_error_sq: f64,
    /// `‖S(f − P f)‖²`.
    pub aliasing_sq: f64,
    /// `‖f − Sf‖² − ‖f − P f‖² − ‖S(f − P f)‖²`.
    pub decomposition_gap: f64,
    pub quadrature_points: usize,
}

/// Errors of the least-squares operator `S` for one function `f`.
pub fn recovery_error_report(
    basis: &dyn BasisSpec,
    nodes: &NodeSet,
    f: &dyn Fn(&[f64]) -> C64,
    quadrature: &Quadrature,
    weighted: bool,
    b: Option<f64>,
) -> Result<RecoveryReport> {
    let samples = CVector::from_iterator(nodes.len(), nodes.nodes.iter().map(|x| f(x)));
    let s_coeffs = least_squares_recover(basis, nodes, &samples, weighted)?;

    let qw_sqrt: Vec<f64> = quadrature.weights.iter().map(|w| w.sqrt()).collect();
    let lq = design_matrix_weighted(basis, &quadrature.points, Some(&qw_sqrt));
    let fq = CVector::from_iterator(quadrature.points.len(), quadrature.points.iter().zip(&qw_sqrt).map(|(x, w)| f(x) * *w));
    let p_coeffs = solve_least_squares(&lq, &fq)?.coefficients;

    let residual = |x: &[f64]| f(x) - evaluate_expansion(basis, &p_coeffs, x);
    let r_samples = CVector::from_iterator(nodes.len(), nodes.nodes.iter().map(|x| residual(x)));
    let sr_coeffs = least_squares_recover(basis, nodes, &r_samples, weighted)?;

    let l2_error_sq = quadrature.l2_norm_sq(|x| f(x) - evaluate_expansion(basis, &s_coeffs, x));
    let projection_error_sq = quadrature.l2_norm_sq(residual);
    let aliasing_sq = quadrature.l2_norm_sq(|x| evaluate_expansion(basis, &sr_coeffs, x));
    let linf_best_proxy = quadrature.points.iter().map(|x| residual(x).norm()).fold(0.0, f64::max);
    let l2_error = l2_error_sq.sqrt();
    log::debug!("recovery report on {} quadrature points", quadrature.points.len());
    Ok(RecoveryReport {
        n: nodes.len(),
        m: basis.dim(),
        b,
        weighted,
        mz_lambda_min: mz_lambda_min(basis, nodes)?,
        l2_error,
        linf_best_proxy,
        ratio: if linf_best_proxy > 0.0 { l2_error / linf_best_proxy } else { f64::NAN },
        projection_error_sq,
        aliasing_sq,
        decomposition_gap: l2_error_sq - projection_error_sq - aliasing_sq,
        quadrature_points: quadrature.points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cosine_basis() -> FnBasis<impl Fn(usize, &[f64]) -> C64 + Sync> {
        FnBasis {
            m: 1,
            domain: Domain::unit_cube(1),
            f: |_k: usize, x: &[f64]| C64::new(2f64.sqrt() * (2.0 * PI * x[0]).cos(), 0.0),
            sup_norm_sq: Some(2.0),
        }
    }

    #[test]
    fn finite_density_of_cosine() {
        let basis = cosine_basis();
        for x in [0.0, 0.1, 0.37, 0.5] {
            let expected = 0.5 + (2.0 * PI * x).cos().powi(2);
            assert_relative_eq!(density_finite(&basis, &[x]), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn square_interpolation() {
        let basis = FnBasis {
            m: 3,
            domain: Domain::unit_cube(1),
            f: |k: usize, x: &[f64]| C64::from_polar(1.0, 2.0 * PI * (k as f64 - 1.0) * x[0]),
            sup_norm_sq: Some(1.0),
        };
        let nodes = NodeSet::new(vec![vec![0.0], vec![0.3], vec![0.7]], None).unwrap();
        let samples = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-2.0, 0.5), C64::new(0.25, 3.0)]);
        let c = least_squares_recover(&basis, &nodes, &samples, false).unwrap();
        let l = design_matrix(&basis, &nodes, false).unwrap();
        assert!((l * c - samples).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_design() {
        let basis = FnBasis {
            m: 2,
            domain: Domain::unit_cube(1),
            f: |k: usize, x: &[f64]| C64::from_polar(1.0, 2.0 * PI * (k as f64) * x[0]),
            sup_norm_sq: Some(1.0),
        };
        let nodes = NodeSet::new(vec![vec![0.25], vec![0.25], vec![0.25]], None).unwrap();
        let samples = CVector::from_element(3, C64::new(1.0, 0.0));
        let err = least_squares_recover(&basis, &nodes, &samples, false).unwrap_err();
        assert!(matches!(err, FrameError::RankDeficient { .. }));
    }

    #[test]
    fn node_csv_round_trip() {
        let set = NodeSet::new(vec![vec![0.5, 0.25], vec![0.125, 1.0]], Some(vec![1.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2,w\n"));
        assert_eq!(NodeSet::read_csv(buf.as_slice()).unwrap(), set);
        let plain = NodeSet::new(vec![vec![0.5]], None).unwrap();
        let mut buf = Vec::new();
        plain.write_csv(&mut buf).unwrap();
        assert_eq!(NodeSet::read_csv(buf.as_slice()).unwrap(), plain);
    }

    #[test]
    fn samples_csv_round_trip() {
        let s = CVector::from_vec(vec![C64::new(1.5, -2.0), C64::new(0.0, 1e-3)]);
        let mut buf = Vec::new();
        write_samples_csv(&s, &mut buf).unwrap();
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), s);
    }
}
