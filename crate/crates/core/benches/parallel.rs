use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lpl_core::metrics::{diag_gaussian_log_density, kl_mc_estimate};
use lpl_core::nn::random::{gaussian_sample, standard_normal};
use lpl_core::nn::{Activation, LayerSpec, MlpNetwork};
use lpl_core::par::Execution;
use lpl_core::reversal::{reverse_batch, ReversalOptions};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [128, 384] {
        let a = gaussian_sample(n, n, 0.0, 1.0, 1);
        let b = gaussian_sample(n, n, 0.0, 1.0, 2);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |bench, _| {
                bench.iter(|| black_box(a.matmul_with(&b, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn reversal(c: &mut Criterion) {
    let generator = MlpNetwork::init(
        &[
            LayerSpec::new(8, 64, Activation::Tanh),
            LayerSpec::new(64, 64, Activation::Tanh),
        ],
        3,
    )
    .unwrap();
    let data = generator
        .predict(&gaussian_sample(64, 8, 0.0, 0.5, 4))
        .unwrap();
    let mut group = c.benchmark_group("reverse_batch");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = ReversalOptions {
            execution,
            ..Default::default()
        };
        group.bench_function(name, |bench| {
            bench.iter(|| black_box(reverse_batch(&generator, &data, &opts, 5, "bench").unwrap()))
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("kl_mc_estimate");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |bench| {
            bench.iter(|| {
                kl_mc_estimate(
                    |r| vec![2f64.sqrt() * standard_normal(r), standard_normal(r)],
                    |x| diag_gaussian_log_density(x, &[0.0, 0.0], &[2.0, 1.0]),
                    |x| diag_gaussian_log_density(x, &[0.0, 0.0], &[1.0, 1.0]),
                    1 << 18,
                    7,
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, reversal, monte_carlo);
criterion_main!(benches);
