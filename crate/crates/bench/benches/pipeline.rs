use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mailrisk_bench::{fitted_group, prebins, sym_matrix, synthetic};
use mailrisk_core::binning::{optimal_merge, MergeConstraints};
use mailrisk_core::evaluate::roc_auc;
use mailrisk_core::experiment::{run_grid, BinningAxis, ExperimentGrid};
use mailrisk_core::learners::{train, Hyperparams, Learner};
use mailrisk_core::linalg::eigen_sym;
use mailrisk_core::resample::{resample, ResamplePlan, Sampling, TrainingSet};

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimal_merge");
    for n in [8, 20, 50] {
        let bins = prebins(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &bins, |b, bins| {
            b.iter(|| optimal_merge(black_box(bins), None, &MergeConstraints::default()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("eigen_sym");
    for n in [10, 50] {
        let m = sym_matrix(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| eigen_sym(black_box(m))));
    }
    g.finish();

    let scores: Vec<f64> = (0..100_000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let y: Vec<u8> = (0..100_000).map(|i| (((i * 104_729) % 1000) < 300) as u8).collect();
    c.bench_function("roc_auc_100k", |b| b.iter(|| roc_auc(black_box(&scores), black_box(&y))));
}

fn models(c: &mut Criterion) {
    let gm = fitted_group(10_000);
    let hyper = Hyperparams::default();
    let mut g = c.benchmark_group("train_8k_rows");
    g.sample_size(10);
    for learner in [Learner::LogReg, Learner::Gbt] {
        g.bench_function(learner.as_str(), |b| b.iter(|| train(learner, black_box(&gm.train), &hyper)));
    }
    g.finish();

    let set = TrainingSet::new(gm.train.clone());
    let mut g = c.benchmark_group("resample_8k_rows");
    g.sample_size(10);
    for s in [Sampling::RandomOver, Sampling::Smote] {
        g.bench_function(s.as_str(), |b| b.iter(|| resample(black_box(&set), &ResamplePlan::new(s, 42))));
    }
    g.finish();
}

fn grid(c: &mut Criterion) {
    let data = synthetic(5000);
    let grid = ExperimentGrid {
        binnings: vec![BinningAxis::Quantile],
        ..Default::default()
    };
    let mut g = c.benchmark_group("grid");
    g.sample_size(10);
    g.bench_function("12_cells_5k_rows", |b| b.iter(|| run_grid(black_box(&grid), &data, None)));
    g.finish();
}

criterion_group!(benches, kernels, models, grid);
criterion_main!(benches);
