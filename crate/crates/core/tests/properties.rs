mod common;

use common::*;
use framesub_core::bss::{bss_run, BssConfig, DenseScanner, Traversal};
use framesub_core::fourier::{equispaced_grid, fourier_frame, full_grid, hyperbolic_cross, random_frequencies};
use framesub_core::linalg::{hermitian_eigenvalues, pencil_extremes, CMatrix, CVector, C64};
use framesub_core::potentials::{
    lower_gate, lower_potential, rank1_update, upper_gate, upper_potential, BarrierPair, GatePair, HermitianAccumulator,
};
use framesub_core::precondition::{extend_with_block_count, orthonormalize_columns_seeded, padded_len, zero_pad};
use framesub_core::recovery::{density_finite, least_squares_recover, Domain, FnBasis, NodeSet};
use framesub_core::strategies::{bss_perp, plain_bss, subset_pencil_bounds, SelectionOptions};
use framesub_core::{frame_bounds, frobenius_norm_sq, weighted_frame_bounds, FrameBounds, FrameMatrix, WeightedSubframe};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn frobenius_between_trace_bounds(seed in any::<u64>(), m in 1usize..6, extra in 0usize..8) {
        let y = FrameMatrix::new(random_matrix(m + extra, m, &mut rng(seed))).unwrap();
        let FrameBounds { a, b } = frame_bounds(&y);
        let f = frobenius_norm_sq(&y);
        prop_assert!(m as f64 * a <= f * (1.0 + 1e-9) && f <= m as f64 * b * (1.0 + 1e-9));
    }

    #[test]
    fn bounds_invariant_under_permutation_and_unitary(seed in any::<u64>(), m in 1usize..6, extra in 0usize..8) {
        let mut r = rng(seed);
        let y = FrameMatrix::new(random_matrix(m + extra, m, &mut r)).unwrap();
        let before = frame_bounds(&y);
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.shuffle(&mut r);
        let permuted = frame_bounds(&y.select_rows(&order).unwrap());
        let rotated = frame_bounds(&FrameMatrix::new(y.matrix() * random_unitary(m, &mut r)).unwrap());
        let scale = before.b;
        for other in [permuted, rotated] {
            prop_assert!((other.a - before.a).abs() <= 1e-9 * scale);
            prop_assert!((other.b - before.b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn uniform_weights_scale_bounds(seed in any::<u64>(), c in 0.01f64..100.0) {
        let y = FrameMatrix::new(random_matrix(9, 4, &mut rng(seed))).unwrap();
        let all: Vec<usize> = (0..9).collect();
        let ones = weighted_frame_bounds(&y, &WeightedSubframe::new(all.clone(), vec![1.0; 9], 9).unwrap()).unwrap();
        let scaled = weighted_frame_bounds(&y, &WeightedSubframe::new(all, vec![c; 9], 9).unwrap()).unwrap();
        prop_assert!(rel(scaled.a, c * ones.a) <= 1e-12 && rel(scaled.b, c * ones.b) <= 1e-12);
    }

    #[test]
    fn trace_bound(seed in any::<u64>(), m in 1usize..6, extra in 0usize..8, rank in 1usize..6) {
        let mut r = rng(seed);
        let y = FrameMatrix::new(random_matrix(m + extra, m, &mut r)).unwrap();
        let t = random_psd(m, rank, &mut r);
        let FrameBounds { a, b } = frame_bounds(&y);
        let tr = t.trace().re;
        let sum: f64 = (0..y.len()).map(|i| { let v = y.element(i); v.dotc(&(&t * &v)).re }).sum();
        prop_assert!(a * tr <= sum + 1e-9 * sum.abs().max(1.0));
        prop_assert!(sum <= b * tr + 1e-9 * sum.abs().max(1.0));
    }

    #[test]
    fn potential_shift_identity(seed in any::<u64>(), m in 1usize..7, t in 0.0f64..5.0) {
        let mut r = rng(seed);
        let acc = HermitianAccumulator::new(random_hermitian(m, &mut r)).unwrap();
        let v = random_vector(m, &mut r);
        let l = acc.lambda_min() - r.random_range(0.1..2.0);
        let u = acc.lambda_max() + r.random_range(0.1..2.0);
        let inv_l = (acc.matrix() - CMatrix::identity(m, m) * C64::new(l, 0.0)).try_inverse().unwrap();
        let inv_u = (CMatrix::identity(m, m) * C64::new(u, 0.0) - acc.matrix()).try_inverse().unwrap();
        let q = |inv: &CMatrix| (v.dotc(&(inv * &v)).re, v.dotc(&(inv * inv * &v)).re);
        let (l1, l2) = q(&inv_l);
        let (u1, u2) = q(&inv_u);
        let updated = rank1_update(&acc, &v, t);
        let lower = lower_potential(&acc, l).unwrap() - t * l2 / (1.0 + t * l1);
        prop_assert!(rel(lower_potential(&updated, l).unwrap(), lower) <= 1e-10);
        // The upper barrier has to stay above the updated spectrum.
        if t * u1 < 1.0 && updated.lambda_max() < u {
            let upper = upper_potential(&acc, u).unwrap() + t * u2 / (1.0 - t * u1);
            prop_assert!(rel(upper_potential(&updated, u).unwrap(), upper) <= 1e-9);
        }
    }

    #[test]
    fn determinant_lemma(seed in any::<u64>(), m in 1usize..7) {
        let mut r = rng(seed);
        let a = random_hermitian(m, &mut r) + CMatrix::identity(m, m) * C64::new(0.5, 0.0);
        prop_assume!(hermitian_eigenvalues(&a).iter().all(|l| l.abs() > 1e-3));
        let v = random_vector(m, &mut r);
        let lhs = (&a + &v * v.adjoint()).determinant();
        let rhs = a.determinant() * (C64::new(1.0, 0.0) + v.dotc(&(a.clone().try_inverse().unwrap() * &v)));
        prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1e-12));
    }

    #[test]
    fn rank_one_update_interlaces(seed in any::<u64>(), m in 1usize..7, t in 0.0f64..10.0) {
        let mut r = rng(seed);
        let acc = HermitianAccumulator::new(random_hermitian(m, &mut r)).unwrap();
        let v = random_vector(m, &mut r);
        let next = rank1_update(&acc, &v, t);
        let (old, new) = (acc.eigenvalues(), next.eigenvalues());
        let tol = 1e-9 * (1.0 + t * v.norm_squared() + old[m - 1].abs());
        for j in 0..m {
            prop_assert!(new[j] >= old[j] - tol);
            if j + 1 < m {
                prop_assert!(new[j] <= old[j + 1] + tol);
            }
        }
    }

    #[test]
    fn potentials_are_monotone(seed in any::<u64>(), m in 1usize..7, gap in 0.05f64..3.0, step in 1e-3f64..1.0) {
        let mut r = rng(seed);
        let acc = HermitianAccumulator::new(random_hermitian(m, &mut r)).unwrap();
        let l = acc.lambda_min() - gap - step;
        prop_assert!(lower_potential(&acc, l + step).unwrap() > lower_potential(&acc, l).unwrap());
        let u = acc.lambda_max() + gap;
        prop_assert!(upper_potential(&acc, u + step).unwrap() < upper_potential(&acc, u).unwrap());
    }

    #[test]
    fn gate_pair_matches_single_gates(seed in any::<u64>(), m in 1usize..7) {
        let mut r = rng(seed);
        let acc = HermitianAccumulator::new(random_psd(m, m, &mut r)).unwrap();
        let barriers = BarrierPair::new(acc.lambda_min() - 1.0, acc.lambda_max() + 1.0).unwrap();
        let (dl, du) = (r.random_range(0.01..0.9), r.random_range(0.01..3.0));
        let v = random_vector(m, &mut r);
        let (lg, ug) = GatePair::new(&acc, barriers, dl, du).unwrap().evaluate(&v);
        let l_single = lower_gate(&acc, &v, barriers.l, dl).unwrap().finite().unwrap();
        let u_single = upper_gate(&acc, &v, barriers.u, du).unwrap().finite().unwrap();
        prop_assert!((lg.finite().unwrap() - l_single).abs() <= 1e-10 * l_single.abs().max(1.0));
        prop_assert!((ug.finite().unwrap() - u_single).abs() <= 1e-10 * u_single.abs().max(1.0));
    }

    #[test]
    fn gate_interval_is_admissible(seed in any::<u64>(), m in 1usize..7, frac in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let acc = HermitianAccumulator::new(random_psd(m, m, &mut r)).unwrap();
        let (l, u) = (acc.lambda_min() - 1.0, acc.lambda_max() + 2.0);
        let (dl, du) = (r.random_range(0.01..0.9), r.random_range(0.01..3.0));
        let v = random_vector(m, &mut r);
        let lg = lower_gate(&acc, &v, l, dl).unwrap().finite().unwrap();
        let ug = upper_gate(&acc, &v, u, du).unwrap().finite().unwrap();
        prop_assume!(lg >= ug && ug > 0.0);
        let t = 1.0 / lg + frac * (1.0 / ug - 1.0 / lg);
        let next = rank1_update(&acc, &v, t);
        let slack = 1e-9 * (1.0 + acc.lambda_max().abs());
        prop_assert!(next.lambda_min() > l + dl - slack && next.lambda_max() < u + du + slack);
        if next.lambda_min() > l + dl && next.lambda_max() < u + du {
            let tol = 1e-8 * lower_potential(&acc, l).unwrap().max(upper_potential(&acc, u).unwrap());
            prop_assert!(lower_potential(&next, l + dl).unwrap() <= lower_potential(&acc, l).unwrap() + tol);
            prop_assert!(upper_potential(&next, u + du).unwrap() <= upper_potential(&acc, u).unwrap() + tol);
        }
    }

    #[test]
    fn orthonormalization_spans_input(seed in any::<u64>(), m in 1usize..6, extra in 0usize..8, rank in 1usize..6) {
        let mut r = rng(seed);
        let rank = rank.min(m);
        let y = FrameMatrix::new(random_matrix(m + extra, rank, &mut r) * random_matrix(rank, m, &mut r)).unwrap();
        let p = orthonormalize_columns_seeded(&y, seed).unwrap();
        let q = p.ytilde.matrix();
        prop_assert_eq!(q.ncols(), m);
        prop_assert!((q.ad_mul(q) - CMatrix::identity(m, m)).norm() <= 1e-10);
        let residual = y.matrix() - q * q.ad_mul(y.matrix());
        prop_assert!(residual.norm() <= 1e-8 * y.matrix().norm());
    }

    #[test]
    fn block_extension_row_norms(seed in any::<u64>(), m in 1usize..6, q in 1usize..5, per in 2usize..6) {
        let mut r = rng(seed);
        let rows = (m + 1).max(q * per);
        let y = FrameMatrix::new(random_matrix(rows, m, &mut r)).unwrap();
        let padded = zero_pad(&y, padded_len(rows, q)).unwrap();
        let p = extend_with_block_count(&padded, q).unwrap();
        let t = p.ytilde.matrix();
        prop_assert!((t.ad_mul(t) - CMatrix::identity(p.m_prime, p.m_prime)).norm() <= 1e-10);
        let floor = q as f64 / padded.len() as f64;
        for i in 0..padded.len() {
            prop_assert!(p.ytilde.row_norm_sq(i) >= floor * (1.0 - 1e-12));
        }
        let residual = padded.matrix() - t * t.ad_mul(padded.matrix());
        prop_assert!(residual.norm() <= 1e-8 * padded.matrix().norm());
    }

    #[test]
    fn fourier_frames_are_equal_norm(seed in any::<u64>(), d in 1usize..3, count in 2usize..12, big_m in 1usize..30) {
        let mut r = rng(seed);
        let freqs = random_frequencies(d, count, 6, seed).unwrap();
        let nodes = NodeSet::new((0..big_m).map(|_| (0..d).map(|_| r.random::<f64>()).collect()).collect(), None).unwrap();
        let norms = fourier_frame(&freqs, &nodes).unwrap().row_norms_sq();
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        let var = norms.iter().map(|n| (n - mean).powi(2)).sum::<f64>() / norms.len() as f64;
        prop_assert!(var <= 1e-12);
        prop_assert!((mean - count as f64 / big_m as f64).abs() <= 1e-12);
    }

    #[test]
    fn finite_density_at_least_half(seed in any::<u64>(), m in 1usize..8, x in 0.0f64..1.0) {
        let shifts: Vec<f64> = { let mut r = rng(seed); (0..m).map(|_| r.random::<f64>()).collect() };
        let basis = FnBasis {
            m,
            domain: Domain::unit_cube(1),
            f: move |k: usize, x: &[f64]| C64::new(2f64.sqrt() * (std::f64::consts::TAU * ((k + 1) as f64 * x[0] + shifts[k])).cos(), 0.0),
            sup_norm_sq: Some(2.0),
        };
        prop_assert!(density_finite(&basis, &[x]) >= 0.5);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn bss_certified_bounds_and_trace(seed in any::<u64>(), m in 2usize..7, extra in 0usize..20, cond in 1.0f64..3.0, fixed in any::<bool>()) {
        let mut r = rng(seed);
        let y = conditioned_frame(2 * m + extra, m, cond, &mut r);
        let bounds = frame_bounds(&y);
        let kap = framesub_core::bss::kappa(bounds.a, bounds.b).unwrap();
        let b = kap * kap + r.random_range(0.1..5.0);
        let cfg = BssConfig::new(b).with_seed(seed).with_trace(true).with_fixed_shifts(fixed);
        let mut scanner = DenseScanner::new(&y, Traversal::RandomPermutation, seed);
        let out = bss_run(&mut scanner, bounds, &cfg).unwrap();
        prop_assert!(out.selected.len() <= framesub_core::linalg::ceil_tol(b * m as f64));
        let sub = framesub_core::bss::outcome_to_subframe(&out, y.len()).unwrap();
        let got = weighted_frame_bounds(&y, &sub).unwrap();
        prop_assert!(got.a >= bounds.a - 1e-8);
        prop_assert!(got.b <= out.gamma * bounds.b + 1e-8);
        let ratio = bounds.b / bounds.a;
        let mf = m as f64;
        prop_assert!(out.l_final >= -mf * b.sqrt() * kap + b * mf - 1e-8 * b * mf);
        for rec in &out.trace {
            let scale = 1.0 / rec.delta_l + kap * rec.eps_l + ratio * (1.0 / rec.delta_u + rec.eps_u);
            if fixed {
                prop_assert!(rec.conservation_residual >= -1e-8 * scale);
            } else {
                prop_assert!(rec.conservation_residual.abs() <= 1e-8 * scale);
            }
            prop_assert!(rec.lambda_min > rec.l && rec.lambda_max < rec.u);
            prop_assert!(rec.lower_gate >= rec.upper_gate && rec.upper_gate > 0.0);
            prop_assert!(rec.t >= 1.0 / rec.lower_gate * (1.0 - 1e-12) && rec.t <= 1.0 / rec.upper_gate * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bss_selection_is_scale_invariant(seed in any::<u64>(), m in 2usize..6, c in 0.1f64..10.0) {
        let mut r = rng(seed);
        let y = conditioned_frame(3 * m, m, 2.0, &mut r);
        let scaled = FrameMatrix::new(y.matrix() * C64::new(c, 0.0)).unwrap();
        let bounds = frame_bounds(&y);
        let cfg = BssConfig::new(9.0).with_seed(seed);
        let a = bss_run(&mut DenseScanner::new(&y, cfg.traversal, seed), bounds, &cfg).unwrap();
        let sb = FrameBounds { a: bounds.a * c * c, b: bounds.b * c * c };
        let b = bss_run(&mut DenseScanner::new(&scaled, cfg.traversal, seed), sb, &cfg).unwrap();
        let ia: Vec<usize> = a.selected.iter().map(|p| p.0).collect();
        let ib: Vec<usize> = b.selected.iter().map(|p| p.0).collect();
        prop_assert_eq!(ia, ib);
        for (x, y) in a.raw_weights.iter().zip(&b.raw_weights) {
            prop_assert!(rel(y * c * c, *x) <= 1e-8);
        }
        for (x, y) in a.selected.iter().zip(&b.selected) {
            prop_assert!(rel(y.1, x.1) <= 1e-8);
        }
    }

    #[test]
    fn bss_perp_sandwich(seed in any::<u64>(), m in 2usize..7, extra in 0usize..20) {
        let mut r = rng(seed);
        let y = uneven_rows(2 * m + extra, m, &mut r);
        let b = r.random_range(1.5..5.0);
        let run = bss_perp(&y, &BssConfig::new(b).with_seed(seed)).unwrap();
        let num = framesub_core::linalg::weighted_outer_gram(y.matrix(), &run.subframe.indices, &run.subframe.weights);
        let (lo, hi) = pencil_extremes(&num, &y.gram()).unwrap();
        let top = ((b.sqrt() + 1.0) / (b.sqrt() - 1.0)).powi(2);
        prop_assert!(lo >= 1.0 - 1e-8 && hi <= top + 1e-8);
    }

    #[test]
    fn plain_bss_certificate(seed in any::<u64>(), m in 10usize..16, extra in 10usize..60, bp in prop::sample::select(vec![1.5f64, 2.0, 3.0])) {
        let mut r = rng(seed);
        let big_m = m + extra;
        let budget = framesub_core::linalg::ceil_tol(bp * m as f64);
        prop_assume!(budget >= m + 10 && budget <= big_m);
        let y = uneven_rows(big_m, m, &mut r);
        let res = plain_bss(&y, bp, &SelectionOptions { seed, ..SelectionOptions::default() }).unwrap();
        prop_assert!(res.indices.len() <= budget);
        prop_assert!(res.indices.windows(2).all(|w| w[0] < w[1]) && res.indices.iter().all(|&i| i < big_m));
        let (lo, _) = subset_pencil_bounds(&y, &res.indices, 1.0 / m as f64, 1.0 / big_m as f64).unwrap();
        prop_assert!(lo * res.certified_constant(0.0) >= 1.0 - 1e-9);
    }

    #[test]
    fn least_squares_is_idempotent(seed in any::<u64>(), m in 1usize..6, extra in 0usize..10) {
        let mut r = rng(seed);
        let freqs = full_grid(1, -(m as i64), m as i64).unwrap();
        let basis = framesub_core::fourier::FourierBasis { freqs };
        let n = basis_len(&basis) + extra;
        let nodes = NodeSet::new((0..n).map(|_| vec![r.random::<f64>()]).collect(), None).unwrap();
        let samples = random_vector(n, &mut r);
        let Ok(c) = least_squares_recover(&basis, &nodes, &samples, false) else { return Ok(()) };
        let again: CVector = CVector::from_iterator(n, nodes.nodes.iter().map(|x| framesub_core::recovery::evaluate_expansion(&basis, &c, x)));
        let c2 = least_squares_recover(&basis, &nodes, &again, false).unwrap();
        prop_assert!((c2 - &c).norm() <= 1e-10 * c.norm().max(1.0));
    }
}

fn basis_len(b: &framesub_core::fourier::FourierBasis) -> usize {
    b.freqs.len()
}

#[test]
fn exact_grids_give_tight_fourier_frames() {
    for (d, g) in [(1usize, 7usize), (2, 5), (2, 13), (3, 3)] {
        let half = (g as i64 - 1) / 2;
        let y = fourier_frame(&full_grid(d, -half, half).unwrap(), &equispaced_grid(d, g)).unwrap();
        let b = frame_bounds(&y);
        assert!((b.a - 1.0).abs() <= 1e-9 && (b.b - 1.0).abs() <= 1e-9, "d={d} g={g}: {b:?}");
    }
    let y = fourier_frame(&hyperbolic_cross(2, 12).unwrap(), &equispaced_grid(2, 25)).unwrap();
    let b = frame_bounds(&y);
    assert!((b.a - 1.0).abs() <= 1e-9 && (b.b - 1.0).abs() <= 1e-9);
}
