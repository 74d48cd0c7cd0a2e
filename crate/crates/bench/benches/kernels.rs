use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use mobprof_bench::{day_trajectory, random_corpus, random_graph, random_matrix};
use mobprof_core::cluster::{kmeans, multiview_kmeans};
use mobprof_core::semantics::{train_cbow, CbowParams};
use mobprof_core::spatial::canonical_code;
use mobprof_core::stays::{detect_stays, StayParams};
use mobprof_core::temporal::{dft_amplitudes, lfer};
use mobprof_core::topics::{train_lda, LdaParams};

fn bench_canonical_code(c: &mut Criterion) {
    let mut group = c.benchmark_group("canonical_code");
    for n in [4usize, 6, 8] {
        let graph = random_graph(n, 0.3, n as u64);
        group.bench_function(format!("n{n}"), |b| {
            b.iter(|| canonical_code(black_box(&graph), 10))
        });
    }
    group.finish();
}

fn bench_spectral(c: &mut Criterion) {
    let series: Vec<f64> = (0..12).map(|j| ((j * 7) % 12) as f64 / 12.0).collect();
    c.bench_function("dft_and_lfer_k12", |b| {
        b.iter(|| {
            let spectrum = dft_amplitudes(black_box(&series));
            black_box(lfer(&spectrum))
        })
    });
}

fn bench_stays(c: &mut Criterion) {
    let traj = day_trajectory(5, 3);
    let params = StayParams::default();
    c.bench_function("detect_stays_day", |b| b.iter(|| detect_stays(black_box(&traj), &params)));
}

fn bench_clustering(c: &mut Criterion) {
    let view_st = random_matrix(1000, 8, 1);
    let view_sem = random_matrix(1000, 82, 2);
    c.bench_function("kmeans_1000x8_k7", |b| {
        b.iter(|| kmeans(black_box(&view_st), 7, 5, 50, 1e-6).unwrap())
    });
    c.bench_function("multiview_1000_k7", |b| {
        b.iter(|| multiview_kmeans(black_box(&view_st), black_box(&view_sem), 7, 5, 30, 0.0).unwrap())
    });
}

fn bench_cbow_epoch(c: &mut Criterion) {
    let corpus = random_corpus(200, 8, 20, 9);
    let params = CbowParams { epochs: 1, ..CbowParams::default() };
    c.bench_function("cbow_epoch_200seq_dim80", |b| {
        b.iter_batched(
            || corpus.clone(),
            |corpus| train_cbow(black_box(&corpus), &params).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_lda(c: &mut Criterion) {
    let corpus = random_corpus(200, 8, 20, 11);
    let params = LdaParams { iters: 20, burn_in: 10, ..LdaParams::default() };
    c.bench_function("lda_20_sweeps_200docs", |b| {
        b.iter(|| train_lda(black_box(&corpus), &params).unwrap())
    });
}

criterion_group!(
    benches,
    bench_canonical_code,
    bench_spectral,
    bench_stays,
    bench_clustering,
    bench_cbow_epoch,
    bench_lda
);
criterion_main!(benches);
