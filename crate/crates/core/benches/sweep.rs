use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poprank::engine::{alpha_grid, sweep_alpha_with, PopRankConfig};
use poprank::ingest::{aggregate_training, WindowConfig};
use poprank::model::{prune_matrix, BiadjacencyMatrix};
use poprank::par::Execution;
use poprank::rca::{binarize, rca_values_with};
use poprank::synth::{generate, SynthConfig};

fn counts(n_users: usize, n_pages: usize) -> BiadjacencyMatrix {
    let cfg = SynthConfig {
        n_users,
        n_pages,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).expect("valid synth config");
    let window = WindowConfig::new(1..=16, 17..=22, 5).expect("valid window");
    aggregate_training(&data.records, &window).expect("nonempty training window")
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_rca(c: &mut Criterion) {
    let v = counts(4000, 200);
    let mut group = c.benchmark_group("rca_values");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rca_values_with(&v, exec).expect("valid counts"))
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let v = counts(500, 50);
    let rca = rca_values_with(&v, Execution::Sequential).expect("valid counts");
    let (m, _) =
        prune_matrix(&binarize(&rca, 1.0).expect("valid threshold")).expect("nonempty matrix");
    let alphas = alpha_grid(-2.0, 1.0, 0.25).expect("valid grid");
    let cfg = PopRankConfig {
        max_iterations: 2_000,
        ..PopRankConfig::default()
    };
    let mut group = c.benchmark_group("sweep_alpha");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep_alpha_with(&m, &alphas, &cfg, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rca, bench_sweep);
criterion_main!(benches);
