use igl_core::graph::{
    adjacency_to_vector, degree_operator_adjoint, degree_operator_apply, edge_count, laplacian,
    pairwise_distance_vector, smoothness, vector_to_adjacency, EdgeWeightVector, SignalMatrix,
};
use igl_core::learn::{solve_igl, IglParams};
use igl_core::physics::{
    build_prior_graph, rescale_and_threshold, KnowledgePrior, NetworkTopology,
};
use igl_core::reconstruct::{denoise, impute, ObservationMask, ReconstructionParams};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn weights(max_n: usize) -> impl Strategy<Value = EdgeWeightVector> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64], edge_count(n))
            .prop_map(move |w| EdgeWeightVector::new(n, w).unwrap())
    })
}

fn graph_and_signal(max_n: usize) -> impl Strategy<Value = (EdgeWeightVector, DMatrix<f64>)> {
    weights(max_n).prop_flat_map(|w| {
        let n = w.n();
        (Just(w), prop::collection::vec(-5.0..5.0f64, n * 4))
            .prop_map(move |(w, x)| (w, DMatrix::from_vec(n, 4, x)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adjacency_round_trip(w in weights(12)) {
        let g = vector_to_adjacency(&w);
        prop_assert_eq!(adjacency_to_vector(&g), w);
    }

    #[test]
    fn degree_operator_adjoint_identity(w in weights(12), seed in any::<u64>()) {
        let n = w.n();
        let d: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32) % 1000) as f64) / 500.0 - 1.0).collect();
        let lhs: f64 = degree_operator_apply(&w).iter().zip(&d).map(|(a, b)| a * b).sum();
        let rhs: f64 = degree_operator_adjoint(&d).unwrap().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn laplacian_is_psd_with_zero_row_sums(w in weights(12)) {
        let l = laplacian(&vector_to_adjacency(&w));
        let scale = l.matrix().amax().max(1.0);
        for i in 0..w.n() {
            prop_assert!(l.matrix().row(i).sum().abs() <= 1e-12 * scale);
        }
        let eig = l.matrix().clone().symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-10 * scale);
    }

    #[test]
    fn smoothness_is_weights_dot_distances((w, x) in graph_and_signal(10)) {
        let s = SignalMatrix::new(x, true);
        let l = laplacian(&vector_to_adjacency(&w));
        let z = pairwise_distance_vector(&s).unwrap();
        let dot: f64 = w.as_slice().iter().zip(z.as_slice()).map(|(a, b)| a * b).sum();
        let quad = (s.values.transpose() * l.matrix() * &s.values).trace();
        let tr = smoothness(&s, &l).unwrap();
        prop_assert!((tr - dot).abs() <= 1e-9 * dot.abs().max(1.0));
        prop_assert!((tr - quad).abs() <= 1e-9 * quad.abs().max(1.0));

        // Full-matrix form counts every edge twice.
        let n = w.n();
        let wm = vector_to_adjacency(&w);
        let mut hadamard = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dist: f64 = (s.values.row(i) - s.values.row(j)).norm_squared();
                hadamard += wm.weights()[(i, j)] * dist;
            }
        }
        prop_assert!((hadamard - 2.0 * tr).abs() <= 1e-9 * hadamard.abs().max(1.0));
    }

    #[test]
    fn rescale_and_threshold_is_idempotent(
        raw in prop::collection::vec(0.0..100.0f64, 1..20),
        threshold in 0.0..0.9f64,
    ) {
        let once = rescale_and_threshold(&raw, threshold);
        let twice = rescale_and_threshold(&once, threshold);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
        prop_assert!(once.iter().all(|&v| v == 0.0 || (threshold..=1.0).contains(&v)));
    }

    #[test]
    fn prior_is_invariant_to_uniform_pipe_scaling(c in 0.2..5.0f64) {
        let topo = NetworkTopology::default_network();
        let mut scaled = topo.clone();
        for p in scaled.pressure_pipes.iter_mut() {
            p.length_m *= c;
        }
        for p in scaled.temperature_pipes.iter_mut() {
            p.heat_rate_w *= c;
        }
        let a = build_prior_graph(&topo, 0.1).unwrap();
        let b = build_prior_graph(&scaled, 0.1).unwrap();
        prop_assert_eq!(&a.mask, &b.mask);
        prop_assert!((a.graph.weights() - b.graph.weights()).amax() <= 1e-12);
    }

    #[test]
    fn denoise_solves_the_regularized_system((w, y) in graph_and_signal(10), mu in 0.01..20.0f64) {
        let n = w.n();
        let l = laplacian(&vector_to_adjacency(&w));
        let x = denoise(&SignalMatrix::new(y.clone(), true), &l, mu).unwrap();
        let residual = (DMatrix::identity(n, n) + l.matrix() * mu) * &x.values - &y;
        prop_assert!(residual.norm() <= 1e-10 * y.norm().max(1.0));
    }

    #[test]
    fn impute_keeps_observed_entries(
        (w, y) in graph_and_signal(8),
        bits in prop::collection::vec(any::<bool>(), 32),
    ) {
        let n = w.n();
        let observed = DMatrix::from_fn(n, 4, |i, t| bits[(i * 4 + t) % bits.len()]);
        let l = laplacian(&vector_to_adjacency(&w));
        let x = impute(
            &SignalMatrix::new(y.clone(), true),
            &ObservationMask::new(observed.clone()),
            &l,
            &ReconstructionParams::default(),
        ).unwrap();
        for i in 0..n {
            for t in 0..4 {
                if observed[(i, t)] {
                    prop_assert_eq!(x.values[(i, t)].to_bits(), y[(i, t)].to_bits());
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn igl_solution_is_invariant_to_scaling_the_objective(
        z in prop::collection::vec(0.1..2.0f64, edge_count(5)),
        mask_bits in prop::collection::vec(any::<bool>(), edge_count(5)),
        c in 0.5..3.0f64,
    ) {
        let mask: Vec<f64> = mask_bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let w_pi: Vec<f64> = mask.iter().map(|m| 0.5 * m).collect();
        let prior = KnowledgePrior { mask, w_pi };
        let base = IglParams {
            alpha: 1.0,
            beta: 0.3,
            upsilon: 0.3,
            eps0: 1e-12,
            k_max: 200_000,
            normalize_output: false,
            ..IglParams::default()
        };
        let scaled_params = IglParams {
            alpha: c * base.alpha,
            beta: c * base.beta,
            upsilon: c * base.upsilon,
            ..base.clone()
        };
        let zs = EdgeWeightVector::new(5, z.clone()).unwrap();
        let zc = EdgeWeightVector::new(5, z.iter().map(|v| v * c).collect()).unwrap();
        let (a, _) = solve_igl(&zs, Some(&prior), &base).unwrap();
        let (b, _) = solve_igl(&zc, Some(&prior), &scaled_params).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }
}
