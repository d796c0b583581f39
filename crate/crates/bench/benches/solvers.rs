use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use igl_core::dataset::{generate, make_mask, GenerationConfig};
use igl_core::eval::{scaled_distances, DistanceScaling};
use igl_core::graph::{laplacian, vector_to_adjacency};
use igl_core::physics::{build_prior_graph, NetworkTopology};
use igl_core::{
    denoise, impute, solve_igl, solve_lap_smooth, IglParams, LapSmoothParams, ReconstructionParams,
};

fn benches(c: &mut Criterion) {
    let cfg = GenerationConfig {
        n_samples: 2000,
        train_size: 1500,
        ..GenerationConfig::default()
    };
    let data = generate(&cfg).unwrap();
    let prior = build_prior_graph(&NetworkTopology::default_network(), 0.1)
        .unwrap()
        .knowledge();
    let z = scaled_distances(&data.train_noisy, DistanceScaling::Mean).unwrap();
    let params = IglParams::default();
    let (w, _) = solve_igl(&z, Some(&prior), &params).unwrap();
    let graph = vector_to_adjacency(&w);
    let l = laplacian(&graph);

    c.bench_function("distances n=37 m=1500", |b| {
        b.iter(|| scaled_distances(&data.train_noisy, DistanceScaling::Mean).unwrap())
    });
    c.bench_function("solve_igl n=37", |b| {
        b.iter(|| solve_igl(&z, Some(&prior), &params).unwrap())
    });
    c.bench_function("solve_lap_smooth n=37", |b| {
        b.iter(|| solve_lap_smooth(&z, &LapSmoothParams::default()).unwrap())
    });
    c.bench_function("laplacian n=37", |b| b.iter(|| laplacian(&graph)));
    c.bench_function("denoise n=37 m=500", |b| {
        b.iter(|| denoise(&data.test, &l, 1.0).unwrap())
    });

    let mut group = c.benchmark_group("impute n=37 m=500");
    for rho in [0.3, 0.9] {
        let mask = make_mask(37, data.test.n_snapshots(), rho, 7).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(rho), &mask, |b, mask| {
            b.iter(|| impute(&data.test, mask, &l, &ReconstructionParams::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = solvers;
    config = Criterion::default().sample_size(20);
    targets = benches
}
criterion_main!(solvers);
