//! Compares the `exec` mapping layer against a plain sequential loop on the
//! two batch workloads that dominate training: rasterizing stimuli and
//! extracting recognition features. With the default `parallel` feature the
//! `exec` side runs on rayon; build with `--no-default-features` to confirm
//! the sequential fallback matches the baseline.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use limn_core::dsl::raster::render;
use limn_core::dsl::{RasterImage, RenderConfig};
use limn_core::exec;
use limn_core::geom::Stroke;
use limn_core::recognition::RecognitionModel;
use limn_core::stimuli::{self, SetId, SET1_SEED, TRAIN_SET_SIZE};

fn corpus() -> (Vec<Vec<Stroke>>, Vec<RasterImage>) {
    let cfg = RenderConfig::default();
    let stims = stimuli::train_set(SetId::Train1, SET1_SEED, TRAIN_SET_SIZE, &[]);
    let strokes: Vec<Vec<Stroke>> = stims.iter().map(stimuli::stimulus_strokes).collect();
    let images = strokes.iter().map(|s| render(s, &cfg)).collect();
    (strokes, images)
}

fn bench_render(c: &mut Criterion) {
    let (strokes, _) = corpus();
    let cfg = RenderConfig::default();
    let mut g = c.benchmark_group("render_36_stimuli");
    g.bench_function("exec_map_slice", |b| {
        b.iter_batched(
            || strokes.clone(),
            |s| exec::map_slice(&s, |st| render(st, &cfg)),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("sequential_loop", |b| {
        b.iter_batched(
            || strokes.clone(),
            |s| s.iter().map(|st| render(st, &cfg)).collect::<Vec<_>>(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn bench_features(c: &mut Criterion) {
    let (_, images) = corpus();
    let model = RecognitionModel::new(16, 16);
    let mut g = c.benchmark_group("features_36_images");
    g.bench_function("exec_map_slice", |b| {
        b.iter(|| exec::map_slice(&images, |img| model.features(img)))
    });
    g.bench_function("sequential_loop", |b| {
        b.iter(|| {
            images
                .iter()
                .map(|img| model.features(img))
                .collect::<Vec<_>>()
        })
    });
    g.finish();
}

criterion_group!(benches, bench_render, bench_features);
criterion_main!(benches);
