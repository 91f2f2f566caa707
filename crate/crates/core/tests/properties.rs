use proptest::prelude::*;
use rand::SeedableRng;

use quantcons::bounds::{
    eps_consensus_terms, g_factor, mean_propagate, objective, optimize_delta, state_sup_bound,
    sum_alpha_sq, theta_deviation_bound, BoundInputs, SupForm, X0Stats,
};
use quantcons::cli::fmt_num;
use quantcons::consensus::{
    average, qc_step, run_qc, run_qcf, RunConfig, RunRngs, StepOutcome, WeightSequence,
};
use quantcons::graph::{
    laplacian, mean_laplacian, sample_topology, spectral, LaplacianMatrix, LinkFailureModel,
    Topology, SPECTRAL_TOL,
};
use quantcons::quantize::{dithered_quantize, quantize, Quantized, QuantizerSpec};
use quantcons::SimRng;

fn topology() -> impl Strategy<Value = Topology> {
    (2usize..8).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |mask| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if mask[k] {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            Topology::new(n, edges).unwrap()
        })
    })
}

fn connected_topology() -> impl Strategy<Value = Topology> {
    // A spanning path plus random chords is always connected.
    (topology()).prop_map(|t| {
        let n = t.n_nodes();
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|k| (k, k + 1)).collect();
        edges.extend(t.edges().iter().copied().filter(|&(u, v)| v != u + 1));
        Topology::new(n, edges).unwrap()
    })
}

fn model() -> impl Strategy<Value = LinkFailureModel> {
    (connected_topology(), 0usize..3, 0.0f64..0.9).prop_map(|(t, kind, p)| match kind {
        0 => LinkFailureModel::fixed(t),
        1 => LinkFailureModel::erasure(t, p).unwrap(),
        _ => LinkFailureModel::gossip(t),
    })
}

fn is_connected(t: &Topology) -> bool {
    let n = t.n_nodes();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in t.edges() {
            let other = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn assert_laplacian_shape(l: &LaplacianMatrix) {
    let n = l.n();
    for i in 0..n {
        let row: f64 = (0..n).map(|j| l.entry(i, j)).sum();
        assert!(row.abs() < 1e-12);
        for j in 0..n {
            assert_eq!(l.entry(i, j), l.entry(j, i));
            if i != j {
                assert!(l.entry(i, j) == 0.0 || l.entry(i, j) == -1.0);
            }
        }
    }
    let s = spectral(l).unwrap();
    assert!(s.eigenvalues[0] >= -1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_laplacians_are_valid(m in model(), seed in any::<u64>()) {
        let mut rng = SimRng::seed_from_u64(seed);
        for _ in 0..5 {
            assert_laplacian_shape(&sample_topology(&m, &mut rng));
        }
    }

    #[test]
    fn connectivity_matches_lambda2(t in topology()) {
        let s = spectral(&laplacian(&t)).unwrap();
        if is_connected(&t) {
            prop_assert!(s.lambda2 > SPECTRAL_TOL);
        } else {
            prop_assert!(s.lambda2 <= SPECTRAL_TOL);
        }
    }

    #[test]
    fn erasure_scales_spectrum(t in connected_topology(), p in 0.0f64..0.95) {
        let base = spectral(&laplacian(&t)).unwrap();
        let c = 1.0 - p;
        let s = spectral(&mean_laplacian(&LinkFailureModel::erasure(t.clone(), p).unwrap()).unwrap()).unwrap();
        prop_assert!((s.lambda2 - c * base.lambda2).abs() <= 1e-9 * base.lambda_n);
        prop_assert!((s.lambda_n - c * base.lambda_n).abs() <= 1e-9 * base.lambda_n);
        let c = 1.0 / t.n_edges() as f64;
        let g = spectral(&mean_laplacian(&LinkFailureModel::gossip(t)).unwrap()).unwrap();
        prop_assert!((g.lambda2 - c * base.lambda2).abs() <= 1e-9 * base.lambda_n);
        prop_assert!((g.lambda_n - c * base.lambda_n).abs() <= 1e-9 * base.lambda_n);
    }

    #[test]
    fn quantizer_shift_invariance(y in -1e3f64..1e3, k in -1_000_000i64..=1_000_000, d in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])) {
        let shifted = quantize(y + k as f64 * d, d).unwrap();
        let base = quantize(y, d).unwrap() + k as f64 * d;
        prop_assert_eq!(shifted, base);
    }

    #[test]
    fn quantizer_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6, d in 1e-3f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo, d).unwrap() <= quantize(hi, d).unwrap());
    }

    #[test]
    fn finite_alphabet_range(y in -100f64..100.0, u in 0.0f64..1.0, p in 1u64..50, d in 0.05f64..2.0) {
        let spec = QuantizerSpec::finite(d, p).unwrap();
        let nu = (u - 0.5) * d * 0.999;
        match dithered_quantize(y, nu, &spec).unwrap() {
            Quantized::Value(q) => {
                prop_assert!(q.abs() <= p as f64 * d + 1e-9);
                let k = q / d;
                prop_assert!((k - k.round()).abs() < 1e-9);
                prop_assert!((y + nu).abs() < (p as f64 + 0.5) * d);
            }
            Quantized::Saturated => prop_assert!((y + nu).abs() >= (p as f64 + 0.5) * d),
        }
    }

    #[test]
    fn step_identities(m in model(), seed in any::<u64>(), a in 0.01f64..0.3, d in 0.05f64..2.0) {
        let n = m.n_nodes();
        let spec = QuantizerSpec::unbounded(d).unwrap();
        let w = WeightSequence::new(a, 1.0).unwrap();
        let mut rngs = RunRngs::from_seed(seed, &spec);
        let mut x: Vec<f64> = (0..n).map(|k| (k as f64 * 1.7).sin() * 3.0).collect();
        for i in 0..40 {
            let StepOutcome::Advanced { next_state, record } = qc_step(&x, &m, &w, i, &mut rngs, &spec).unwrap() else {
                panic!("unbounded quantizer saturated");
            };
            let lx = record.sampled_laplacian.mul_vec(&x);
            for k in 0..n {
                let v = x[k] - record.alpha * (lx[k] + record.upsilon[k] + record.psi[k]);
                prop_assert!((v - next_state[k]).abs() <= 1e-12 * (1.0 + x[k].abs()));
            }
            let avg_step = average(&x) - record.alpha * (average(&record.upsilon) + average(&record.psi));
            prop_assert!((avg_step - average(&next_state)).abs() <= 1e-12);
            x = next_state;
        }
    }

    #[test]
    fn qcf_tracks_qc_until_saturation(seed in any::<u64>(), p in 1u64..6) {
        let x0 = vec![2.0, -1.0, 0.5, 1.5];
        let model = LinkFailureModel::erasure(Topology::complete(4), 0.2).unwrap();
        let w = WeightSequence::new(0.2, 1.0).unwrap();
        let qc_cfg = RunConfig::new(x0.clone(), model.clone(), w, QuantizerSpec::unbounded(0.5).unwrap(), 60);
        let qcf_cfg = RunConfig::new(x0, model, w, QuantizerSpec::finite(0.5, p).unwrap(), 60).with_initial_bound(2.0);
        let qc = run_qc(&qc_cfg, seed).unwrap().trajectory.unwrap();
        let qcf = run_qcf(&qcf_cfg, seed).unwrap().trajectory.unwrap();
        let stop = qcf.saturated.iter().position(|&s| s).unwrap_or(qcf.len());
        for k in 0..stop {
            prop_assert_eq!(&qc.states[k], &qcf.states[k]);
        }
    }

    #[test]
    fn homogeneity_in_scale(a in 0.01f64..1.0, tau in 0.6f64..1.0, s in 0.01f64..1.0, i in 0usize..100) {
        let inputs = |scale: f64| {
            let w = WeightSequence::new(a, tau).unwrap().with_scale(scale).unwrap();
            BoundInputs::new(5, 10.0, 0.5, 5.0, 5.0, w).unwrap().with_b(1.0).with_p(20).with_epsilon(0.1)
        };
        let (one, scaled) = (inputs(1.0), inputs(s));
        let r = sum_alpha_sq(&scaled.weights).unwrap() / sum_alpha_sq(&one.weights).unwrap();
        prop_assert!((r - s * s).abs() <= 1e-9 * s * s);
        let r = g_factor(i, &scaled) / g_factor(i, &one);
        prop_assert!((r - s * s).abs() <= 1e-9 * s * s);
        let big = eps_consensus_terms(&one).unwrap();
        let small = eps_consensus_terms(&scaled).unwrap();
        for k in 0..3 {
            prop_assert!(small[k] <= big[k] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn upper_probability_bounds_nonnegative(b in 0.1f64..10.0, p in 1u64..1000, d in 0.01f64..2.0, a in 0.01f64..0.5, level in 0.1f64..100.0) {
        let inputs = BoundInputs::new(4, 6.0, d, 4.0, 4.0, WeightSequence::new(a, 1.0).unwrap())
            .unwrap()
            .with_b(b)
            .with_p(p)
            .with_epsilon(0.1)
            .with_x0_stats(X0Stats { x_avg: 0.3, quad_form: 2.0 });
        prop_assert!(theta_deviation_bound(&inputs).unwrap().value >= 0.0);
        for form in [SupForm::Ball, SupForm::Concrete] {
            let r = state_sup_bound(level, &inputs, form).unwrap();
            prop_assert!(r.value >= 0.0);
            let c = r.clamped.unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn mean_propagation_conserves_average(t in connected_topology(), seed in any::<u64>()) {
        let l = laplacian(&t);
        let s = spectral(&l).unwrap();
        let a = 1.0 / (s.lambda2 + s.lambda_n);
        let w = WeightSequence::new(a, 1.0).unwrap();
        let m0: Vec<f64> = (0..t.n_nodes()).map(|k| ((seed >> (k % 60)) & 0xff) as f64 / 16.0).collect();
        let r = average(&m0);
        for m in mean_propagate(&l, &w, &m0, 200).unwrap() {
            prop_assert!((average(&m) - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn fmt_num_round_trips(v in prop::num::f64::NORMAL) {
        let back: f64 = fmt_num(v).parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-8 * v.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimizer_certificate(b in 0.5f64..50.0, p in 1u64..5000, s in 0.001f64..0.2, eps in 0.01f64..0.5) {
        let w = WeightSequence::new(1.0, 1.0).unwrap().with_scale(s).unwrap();
        let inputs = BoundInputs::new(6, 6.0, 1.0, 1.0, 4.0, w).unwrap().with_b(b).with_p(p).with_epsilon(eps);
        let d = optimize_delta(&inputs).unwrap();
        prop_assert!(d.certificate);
        prop_assert!(objective(&inputs, d.delta_star).unwrap() <= d.grid_min + 1e-9);
        prop_assert!((0.0..=1.0).contains(&d.t_star_clamped));
    }
}
