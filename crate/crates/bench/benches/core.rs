use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use crowdml_bench::{class_pairs, regression_data, regression_dataset};
use crowdml_core::dataset::{split_dataset, SplitSpec, TaskKind};
use crowdml_core::loss::{differentiate, parse_loss, LossFunction};
use crowdml_core::metrics::{accuracy, macro_precision, mse};
use crowdml_core::pipeline::{fit_linear, fit_tree};

fn metrics(c: &mut Criterion) {
    let mut g = c.benchmark_group("metrics");
    for n in [1_000usize, 100_000] {
        let (yt, yp) = class_pairs(n, 10, 1);
        g.bench_with_input(BenchmarkId::new("accuracy", n), &n, |b, _| b.iter(|| accuracy(black_box(&yt), black_box(&yp))));
        g.bench_with_input(BenchmarkId::new("macro_precision", n), &n, |b, _| {
            b.iter(|| macro_precision(black_box(&yt), black_box(&yp)))
        });
        let (_, y) = regression_data(n, 1, 2);
        let (_, p) = regression_data(n, 1, 3);
        g.bench_with_input(BenchmarkId::new("mse", n), &n, |b, _| b.iter(|| mse(black_box(&y), black_box(&p))));
    }
    g.finish();
}

fn models(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(20);
    let (x, y) = regression_data(2_000, 8, 4);
    g.bench_function("ols_2000x8", |b| b.iter(|| fit_linear(black_box(&x), black_box(&y), 0.0)));
    g.bench_function("tree_2000x8_depth6", |b| {
        b.iter(|| fit_tree(black_box(&x), y.values(), TaskKind::Regression, &[], 6, 5))
    });
    g.finish();
}

fn loss_dsl(c: &mut Criterion) {
    let src = "-(y*log(p)+(1-y)*log(1-p)) + 0.1*(y-p)^2 + abs(y-p)/(1+p^2)";
    let expr = parse_loss(src).unwrap();
    c.bench_function("dsl_parse", |b| b.iter(|| parse_loss(black_box(src))));
    c.bench_function("dsl_differentiate", |b| b.iter(|| differentiate(black_box(&expr))));
    let f = LossFunction::parse(src).unwrap();
    c.bench_function("dsl_gradient_eval", |b| b.iter(|| f.derivative(black_box(0.3), black_box(0.7))));
}

fn split(c: &mut Criterion) {
    let ds = regression_dataset(50_000, 4, 5);
    let spec = SplitSpec {
        test_fraction: 0.25,
        seed: 9,
        shuffle: true,
    };
    c.bench_function("split_50000x4", |b| b.iter(|| split_dataset(black_box(&ds), &spec)));
}

criterion_group!(benches, metrics, models, loss_dsl, split);
criterion_main!(benches);
