use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dubcorpus_bench::{embeddings, frame_pair, noise_frame, track};
use dubcorpus_core::config::PipelineConfig;
use dubcorpus_core::frames::{frame_pass, ssim};
use dubcorpus_core::matcher::run_matching;
use dubcorpus_core::similarity::build_matrix;
use dubcorpus_core::TrackId;

fn bench_ssim(c: &mut Criterion) {
    let mut group = c.benchmark_group("ssim");
    for side in [64, 256] {
        let (a, b) = (noise_frame(1, side), noise_frame(2, side));
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |bench, _| {
            bench.iter(|| ssim(&a, &b).unwrap())
        });
    }
    group.finish();
}

fn bench_frame_pass(c: &mut Criterion) {
    let (d1, d2) = frame_pair(600);
    let mut group = c.benchmark_group("frame_pass");
    group.sample_size(10);
    for drift in [true, false] {
        let cfg = PipelineConfig {
            drift_compensation: drift,
            search_window_frames: 200,
            ..PipelineConfig::default()
        };
        let name = if drift { "drift" } else { "strict" };
        group.bench_function(name, |bench| {
            bench.iter(|| frame_pass(&d2, &d1, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_matching(c: &mut Criterion) {
    let table = embeddings(3);
    let cfg = PipelineConfig::default();
    let d1 = track(4, TrackId::d1(), 2000);
    let d2 = track(5, TrackId::d2(), 2000);
    c.bench_function("build_matrix/2000x2000", |bench| {
        bench.iter(|| build_matrix(&d1, &d2, &table, &cfg))
    });
    let matrix = build_matrix(&d1, &d2, &table, &cfg);
    let mut group = c.benchmark_group("run_matching");
    group.sample_size(20);
    group.bench_function("2000x2000", |bench| {
        bench.iter(|| run_matching(&d1, &d2, &matrix, &table, &cfg))
    });
    group.finish();
}

criterion_group!(benches, bench_ssim, bench_frame_pass, bench_matching);
criterion_main!(benches);
