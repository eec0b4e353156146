use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ecoforecast::autodiff::{Graph, Tensor};
use ecoforecast::data::{generate_synthetic, prepare_station, SplitRatios, SyntheticSpec};
use ecoforecast::evaluation::ComputeTrace;
use ecoforecast::federated::{partition_by_station, run_federated, RoundConfig};
use ecoforecast::models::{Model, ModelKind, ModelSpec};
use ecoforecast::par::Parallelism;
use ecoforecast::training::{predict, TrainConfig};

const MODES: [Parallelism; 2] = [Parallelism::Sequential, Parallelism::Parallel];

fn label(mode: Parallelism) -> &'static str {
    match mode {
        Parallelism::Sequential => "sequential",
        Parallelism::Parallel => "parallel",
    }
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let data = (0..rows * cols).map(|i| (((i as u64 * 2654435761) ^ seed) % 1000) as f64 / 500.0 - 1.0).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    group.sample_size(20);
    for n in [64usize, 256] {
        let (a, b) = (matrix(n, n, 1), matrix(n, n, 2));
        for mode in MODES {
            group.bench_with_input(BenchmarkId::new(label(mode), n), &n, |bench, _| {
                bench.iter(|| {
                    let mut g = Graph::with_mode(mode);
                    let x = g.constant(a.clone()).unwrap();
                    let y = g.constant(b.clone()).unwrap();
                    black_box(g.matmul(x, y).unwrap());
                })
            });
        }
    }
    group.finish();
}

fn batch_forward(c: &mut Criterion) {
    let series = generate_synthetic(&SyntheticSpec::station_preset("LesCorts", 1, 0)).unwrap();
    let data = prepare_station(&series, 10, SplitRatios::default()).unwrap().train;
    let mut group = c.benchmark_group("predict");
    group.sample_size(10);
    for kind in [ModelKind::Mlp, ModelKind::Leaky, ModelKind::Cnn] {
        let model = Model::new(ModelSpec::default_for(kind), 0).unwrap();
        for mode in MODES {
            group.bench_function(BenchmarkId::new(label(mode), kind.name()), |bench| {
                bench.iter(|| {
                    let mut trace = ComputeTrace::default();
                    black_box(predict(&model, &data, mode, &mut trace).unwrap());
                })
            });
        }
    }
    group.finish();
}

fn federated_round(c: &mut Criterion) {
    let series: Vec<_> = ["LesCorts", "PobleSec", "ElBorn"]
        .iter()
        .enumerate()
        .map(|(i, id)| generate_synthetic(&SyntheticSpec::station_preset(id, 1, i as u64)).unwrap())
        .collect();
    let clients = partition_by_station(&series, 10, SplitRatios::default()).unwrap();
    let spec = ModelSpec::default_for(ModelKind::Leaky);
    let rounds = RoundConfig { rounds: 1, local_epochs: 1, ..RoundConfig::default() };
    let mut group = c.benchmark_group("federated_round");
    group.sample_size(10);
    for mode in MODES {
        let tc = TrainConfig { max_epochs: 1, parallelism: mode, ..TrainConfig::for_spec(&spec, 0) };
        group.bench_function(label(mode), |bench| {
            bench.iter(|| black_box(run_federated(&clients, &spec, &rounds, &tc).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, batch_forward, federated_round);
criterion_main!(benches);
