use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use svs_core::f0lab::{median_filter, MedianEdge};
use svs_core::nnet::{mlpg, Activation, Head, Network, NetworkSpec, WindowSet};
use svs_core::timing::{allocate_ml, RepairMode};
use svs_core::Seq;

fn wave(n: usize, k: f64) -> Vec<f64> {
    (0..n).map(|t| 100.0 * (t as f64 * k).sin() + 7.0 * (t as f64 * 0.37).cos()).collect()
}

fn bench_allocation(c: &mut Criterion) {
    let mu = [6.0, 18.0, 9.0, 4.5];
    let var = [2.0, 30.0, 8.0, 1.5];
    c.bench_function("allocate_ml/4", |b| {
        b.iter(|| allocate_ml(black_box(40), black_box(&mu), black_box(&var), RepairMode::Clamp))
    });
}

fn bench_mlpg(c: &mut Criterion) {
    let windows = WindowSet::standard();
    let mut group = c.benchmark_group("mlpg");
    for frames in [1_000, 10_000] {
        let mut means = Seq::zeros(frames, 6);
        for d in 0..6 {
            means.set_column(d, &wave(frames, 0.01 * (d + 1) as f64));
        }
        let var = [1.0, 2.0, 0.5, 4.0, 8.0, 3.0];
        group.bench_with_input(BenchmarkId::from_parameter(frames), &means, |b, m| {
            b.iter(|| mlpg(black_box(m), &var, &windows).unwrap())
        });
    }
    group.finish();
}

fn bench_median(c: &mut Criterion) {
    let x = wave(20_000, 0.15);
    c.bench_function("median_filter/45", |b| {
        b.iter(|| median_filter(black_box(&x), 45, MedianEdge::Shrink).unwrap())
    });
}

fn bench_forward(c: &mut Criterion) {
    let spec = NetworkSpec {
        input_dim: 64,
        hidden: vec![128, 128],
        activation: Activation::Tanh,
        target_dim: 4,
        head: Head::Plain,
        skip_target: Some(0),
    };
    let net = Network::new(spec, 1).unwrap();
    let frames = 2_000;
    let x = Seq::from_vec(frames, 64, wave(frames * 64, 0.013));
    let pitch = vec![-300.0; frames];
    c.bench_function("network_forward/2000x64", |b| {
        b.iter(|| net.forward_seq(black_box(&x), black_box(&pitch)).unwrap())
    });
}

criterion_group!(benches, bench_allocation, bench_mlpg, bench_median, bench_forward);
criterion_main!(benches);
