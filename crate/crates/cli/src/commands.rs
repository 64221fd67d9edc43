use std::fs::File;
use std::io::Write;
use std::path::Path;

use framesub_core::bss::{bss_run, outcome_to_subframe, BssConfig, DenseScanner};
use framesub_core::experiments::{run_experiment, write_experiment_csv, HighDimOptions, TABLE_B_VALUES};
use framesub_core::fourier::{full_grid, hyperbolic_cross, random_frequencies, FourierBasis, FrequencyIndexSet};
use framesub_core::recovery::{
    generate_mz_nodes, least_squares_solution, mz_lambda_min, read_samples_csv, FiniteDensity, MzConfig, NodeSet,
};
use framesub_core::strategies::{
    bss_perp, normalized_rows, plain_bss, plan_plain_bss, random_unweighted_subsample, random_weighted_subsample,
    subset_pencil_bounds, two_step_unitnorm, weighted_pencil_bounds, RandomDrawConfig, SelectionOptions,
};
use framesub_core::{frame_bounds, frobenius_norm_sq, weighted_frame_bounds, FrameBounds, FrameError, FrameMatrix, Result};
use serde::Serialize;

use crate::args::{
    BoundsArgs, Command, ExperimentArgs, Format, FrequencyArgs, IndexArg, NodesArgs, RecoverArgs, Strategy,
    SubsampleArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Bounds(a) => bounds(a),
        Command::Subsample(a) => subsample(a),
        Command::Nodes(a) => nodes(a),
        Command::Recover(a) => recover(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => File::create(path)?.write_all(bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn invalid(msg: impl Into<String>) -> FrameError {
    FrameError::InvalidInput(msg.into())
}

#[derive(Serialize)]
struct BoundsReport {
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    frobenius_sq: f64,
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let y = FrameMatrix::load(&args.input)?;
    let FrameBounds { a, b } = frame_bounds(&y);
    emit_json(args.out.as_deref(), &BoundsReport { a, b, frobenius_sq: frobenius_norm_sq(&y) })
}

/// Report of one `subsample` run; fields that do not apply to the strategy are omitted.
#[derive(Serialize, Default)]
struct SubsampleReport {
    strategy: &'static str,
    m: usize,
    #[serde(rename = "M")]
    len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_iterations: Option<usize>,
    /// Selected rows; a multiset for the strategies that keep duplicate draws.
    #[serde(rename = "J")]
    indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    bounds_in: FrameBounds,
    /// Bounds of the (weighted) selection, or of the normalized rows for two-step.
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds_out: Option<FrameBounds>,
    /// Extreme eigenvalues of the selection against the full frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pencil_bounds: Option<FrameBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avg_inner_scans: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified_constant: Option<f64>,
    seed: u64,
}

fn pencil(lo_hi: (f64, f64)) -> Option<FrameBounds> {
    Some(FrameBounds { a: lo_hi.0, b: lo_hi.1 })
}

/// Check the flags a strategy needs before the frame is read.
fn validate_subsample(args: &SubsampleArgs) -> Result<()> {
    let open = |x: f64| x > 0.0 && x < 1.0;
    let name = args.strategy.name();
    if !(args.delta >= 0.0 && args.delta.is_finite()) {
        return Err(FrameError::InvalidConfig(format!("delta must be nonnegative, got {}", args.delta)));
    }
    match args.strategy {
        Strategy::Bss | Strategy::BssPerp => match args.b {
            Some(b) if b > 1.0 && b.is_finite() => {}
            Some(b) => return Err(FrameError::InvalidConfig(format!("--b must exceed 1, got {b}"))),
            None => return Err(FrameError::InvalidConfig(format!("strategy {name} needs --b"))),
        },
        Strategy::PlainBss | Strategy::TwoStep => match args.b_prime {
            Some(bp) if bp > 1.0 && bp.is_finite() => {}
            Some(bp) => return Err(FrameError::InvalidConfig(format!("--b-prime must exceed 1, got {bp}"))),
            None => return Err(FrameError::InvalidConfig(format!("strategy {name} needs --b-prime"))),
        },
        Strategy::RandomWeighted | Strategy::RandomUnweighted => {}
    }
    if matches!(args.strategy, Strategy::RandomWeighted | Strategy::RandomUnweighted | Strategy::TwoStep)
        && !(open(args.p) && open(args.t))
    {
        return Err(FrameError::InvalidConfig(format!("p and t must lie in (0,1), got p={}, t={}", args.p, args.t)));
    }
    if args.strategy == Strategy::RandomUnweighted && !open(args.c) {
        return Err(FrameError::InvalidConfig(format!("c must lie in (0,1), got {}", args.c)));
    }
    if args.draws == Some(0) {
        return Err(FrameError::InvalidConfig("--draws must be positive".into()));
    }
    Ok(())
}

fn subsample(args: SubsampleArgs) -> Result<()> {
    validate_subsample(&args)?;
    let y = FrameMatrix::load(&args.input)?;
    let bounds_in = frame_bounds(&y);
    let opts = SelectionOptions { delta: args.delta, traversal: args.traversal.into(), seed: args.seed };
    let mut draw_cfg = RandomDrawConfig::new(args.p, args.t).with_c(args.c).with_seed(args.seed);
    if let Some(n) = args.draws {
        draw_cfg = draw_cfg.with_draws(n);
    }
    let mut report = SubsampleReport {
        strategy: args.strategy.name(),
        m: y.dim(),
        len: y.len(),
        delta: args.delta,
        bounds_in,
        seed: args.seed,
        ..SubsampleReport::default()
    };
    match args.strategy {
        Strategy::RandomWeighted => {
            let sub = random_weighted_subsample(&y, bounds_in, &draw_cfg)?;
            report.bounds_out = Some(weighted_frame_bounds(&y, &sub)?);
            report.pencil_bounds = pencil(weighted_pencil_bounds(&y, &sub)?);
            report.indices = sub.indices;
            report.weights = Some(sub.weights);
            report.p = Some(args.p);
            report.t = Some(args.t);
        }
        Strategy::RandomUnweighted => {
            let multiset = random_unweighted_subsample(&y, &draw_cfg)?;
            report.pencil_bounds =
                pencil(subset_pencil_bounds(&y, &multiset, 1.0 / multiset.len() as f64, 1.0 / y.len() as f64)?);
            report.draws = Some(multiset.len());
            report.indices = multiset;
            report.p = Some(args.p);
            report.t = Some(args.t);
            report.c = Some(args.c);
        }
        Strategy::Bss => {
            let cfg = opts.config(args.b.expect("validated"));
            let outcome = bss_run(&mut DenseScanner::new(&y, cfg.traversal, cfg.seed), bounds_in, &cfg)?;
            let sub = outcome_to_subframe(&outcome, y.len())?;
            report.b = Some(cfg.b);
            report.kappa = Some(outcome.kappa);
            report.gamma = Some(outcome.gamma);
            report.n_iterations = Some(outcome.n_iterations);
            report.avg_inner_scans = Some(outcome.avg_scans);
            report.bounds_out = Some(weighted_frame_bounds(&y, &sub)?);
            report.indices = sub.indices;
            report.weights = Some(sub.weights);
        }
        Strategy::BssPerp => {
            let cfg: BssConfig = opts.config(args.b.expect("validated"));
            let run = bss_perp(&y, &cfg)?;
            report.b = Some(cfg.b);
            report.kappa = Some(run.outcome.kappa);
            report.gamma = Some(run.outcome.gamma);
            report.n_iterations = Some(run.outcome.n_iterations);
            report.avg_inner_scans = Some(run.outcome.avg_scans);
            report.bounds_out = Some(weighted_frame_bounds(&y, &run.subframe)?);
            report.pencil_bounds = pencil(weighted_pencil_bounds(&y, &run.subframe)?);
            report.indices = run.subframe.indices;
            report.weights = Some(run.subframe.weights);
        }
        Strategy::PlainBss => {
            let bp = args.b_prime.expect("validated");
            plan_plain_bss(y.dim(), bp)?;
            let res = plain_bss(&y, bp, &opts)?;
            report.b = Some(res.plan.b);
            report.n_iterations = Some(res.n_iterations);
            report.avg_inner_scans = Some(res.avg_inner_scans);
            report.pencil_bounds =
                pencil(subset_pencil_bounds(&y, &res.indices, 1.0 / y.dim() as f64, 1.0 / y.len() as f64)?);
            report.b_prime = Some(bp);
            report.alpha = Some(res.plan.alpha);
            report.certified_constant = Some(res.certified_constant(args.delta));
            report.indices = res.indices;
        }
        Strategy::TwoStep => {
            let bp = args.b_prime.expect("validated");
            plan_plain_bss(y.dim(), bp)?;
            let res = two_step_unitnorm(&y, bp, args.p, args.t, &opts)?;
            report.b = Some(res.plain.plan.b);
            report.n_iterations = Some(res.plain.n_iterations);
            report.avg_inner_scans = Some(res.plain.avg_inner_scans);
            report.bounds_out = Some(frame_bounds(&normalized_rows(&y, &res.indices)?));
            report.draws = Some(res.draws);
            report.p = Some(args.p);
            report.t = Some(args.t);
            report.b_prime = Some(bp);
            report.alpha = Some(res.plain.plan.alpha);
            report.certified_constant = Some(res.plain.certified_constant(args.delta));
            report.indices = res.indices;
        }
    }
    match args.format {
        Format::Json => emit_json(args.out.as_deref(), &report),
        Format::Csv => {
            let mut text = String::from("index,weight\n");
            for (k, &i) in report.indices.iter().enumerate() {
                let w = report.weights.as_ref().map_or(1.0, |w| w[k]);
                text.push_str(&format!("{i},{w:e}\n"));
            }
            emit(args.out.as_deref(), text.as_bytes())
        }
    }
}

fn frequencies(args: &FrequencyArgs) -> Result<FrequencyIndexSet> {
    match args.index {
        IndexArg::HyperbolicCross => {
            let r = args.r.ok_or_else(|| invalid("--index hyperbolic-cross needs --r"))?;
            hyperbolic_cross(args.d, r)
        }
        IndexArg::FullGrid => match (args.lo, args.hi) {
            (Some(lo), Some(hi)) => full_grid(args.d, lo, hi),
            _ => Err(invalid("--index full-grid needs --lo and --hi")),
        },
        IndexArg::Random => match (args.count, args.half_width) {
            (Some(count), Some(h)) => random_frequencies(args.d, count, h, args.freq_seed),
            _ => Err(invalid("--index random needs --count and --half-width")),
        },
    }
}

#[derive(Serialize)]
struct NodesReport {
    n: usize,
    m: usize,
    b: f64,
    candidates: usize,
    batches: usize,
    candidate_lambda_min: f64,
    mz_lambda_min: f64,
    certified_constant: f64,
    seed: u64,
}

fn nodes(args: NodesArgs) -> Result<()> {
    let basis = FourierBasis { freqs: frequencies(&args.freqs)? };
    plan_plain_bss(basis.freqs.len(), args.b)?;
    let cfg = MzConfig {
        p: args.p,
        t: args.t,
        delta: args.delta,
        seed: args.seed,
        redraw: args.redraw,
        ..MzConfig::new(args.b)
    };
    let mz = generate_mz_nodes(&basis, &FiniteDensity::new(&basis), &cfg)?;
    let mut buf = Vec::new();
    mz.nodes.write_csv(&mut buf)?;
    emit(args.out.as_deref(), &buf)?;
    if let Some(path) = args.report.as_deref() {
        let report = NodesReport {
            n: mz.nodes.len(),
            m: basis.freqs.len(),
            b: args.b,
            candidates: mz.candidates,
            batches: mz.batches,
            candidate_lambda_min: mz.candidate_lambda_min,
            mz_lambda_min: mz_lambda_min(&basis, &mz.nodes)?,
            certified_constant: mz.plain.certified_constant(args.delta),
            seed: args.seed,
        };
        emit_json(Some(path), &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RecoverReport {
    n: usize,
    m: usize,
    weighted: bool,
    sigma_min: f64,
    sigma_max: f64,
    frequencies: Vec<Vec<i64>>,
    /// `[re, im]` per frequency.
    coefficients: Vec<[f64; 2]>,
}

fn recover(args: RecoverArgs) -> Result<()> {
    let basis = FourierBasis { freqs: frequencies(&args.freqs)? };
    let nodes = NodeSet::read_csv(File::open(&args.nodes)?)?;
    if nodes.dim() != basis.freqs.d {
        return Err(invalid(format!("nodes have dimension {}, frequencies {}", nodes.dim(), basis.freqs.d)));
    }
    if args.weighted && nodes.weights.is_none() {
        return Err(invalid("--weighted needs a weight column in the node file"));
    }
    let samples = read_samples_csv(File::open(&args.samples)?)?;
    let sol = least_squares_solution(&basis, &nodes, &samples, args.weighted)?;
    let report = RecoverReport {
        n: nodes.len(),
        m: basis.freqs.len(),
        weighted: args.weighted,
        sigma_min: sol.sigma_min,
        sigma_max: sol.sigma_max,
        coefficients: sol.coefficients.iter().map(|z| [z.re, z.im]).collect(),
        frequencies: basis.freqs.indices,
    };
    emit_json(args.out.as_deref(), &report)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let b_values = if args.b.is_empty() {
        match args.id {
            1 => vec![1.5],
            2 => vec![1.1],
            _ => TABLE_B_VALUES.to_vec(),
        }
    } else {
        args.b.clone()
    };
    let mut opts = HighDimOptions { variant: args.variant.into(), streaming: !args.no_streaming, ..HighDimOptions::default() };
    if let Some(m) = args.m {
        if m == 0 {
            return Err(invalid("--m must be positive"));
        }
        opts.m = m;
    }
    let reports = run_experiment(args.id, &b_values, args.seed, &opts)?;
    match args.format {
        Format::Json => emit_json(args.out.as_deref(), &reports),
        Format::Csv => {
            let mut buf = Vec::new();
            write_experiment_csv(&reports, &mut buf)?;
            emit(args.out.as_deref(), &buf)
        }
    }
}
