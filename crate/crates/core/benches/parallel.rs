//! Sequential versus data-parallel batch processing: fixation detection over
//! many gaze streams, and summary image selection over many stories.
//!
//! Without the `parallel` feature only the sequential variants run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use genread_core::batch;
use genread_core::gaze::{detect_fixations, FixationParams, GazePoint};
use genread_core::images::{segment_for_summary, select_from_vectors, ImageEmbeddings, Segment, SentenceImage};
use genread_core::providers::EmbeddingVector;
use genread_core::Story;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn walk(seed: u64, len: usize) -> Vec<GazePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (960.0, 540.0);
    (0..len)
        .map(|i| {
            let t = i as i64 * 11;
            if rng.random_bool(0.05) {
                x = rng.random_range(0.0..1920.0);
                y = rng.random_range(0.0..1080.0);
            } else {
                x += rng.random_range(-8.0..8.0);
                y += rng.random_range(-8.0..8.0);
            }
            if rng.random_bool(0.01) {
                GazePoint::invalid(t)
            } else {
                GazePoint::new(t, x, y)
            }
        })
        .collect()
}

fn bench_fixations(c: &mut Criterion) {
    let params = FixationParams::default();
    let mut group = c.benchmark_group("fixations");
    group.sample_size(20);
    for streams in [8usize, 64, 256] {
        // About one minute of 90 Hz data per stream.
        let data: Vec<Vec<GazePoint>> = (0..streams as u64).map(|s| walk(s, 5_400)).collect();
        group.throughput(Throughput::Elements((streams * 5_400) as u64));
        group.bench_with_input(BenchmarkId::new("sequential", streams), &data, |b, d| {
            b.iter(|| batch::map_sequential(black_box(d), |s| detect_fixations(s, &params)))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", streams), &data, |b, d| {
            b.iter(|| batch::map_parallel(black_box(d), |s| detect_fixations(s, &params)))
        });
    }
    group.finish();
}

struct Instance {
    segments: Vec<Segment>,
    seg_vecs: Vec<EmbeddingVector>,
    images: Vec<SentenceImage>,
    vectors: ImageEmbeddings,
}

fn unit(rng: &mut ChaCha8Rng, dims: usize) -> EmbeddingVector {
    let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingVector::new(v).unwrap()
}

fn instance(seed: u64, dims: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body: Vec<String> = (0..40).map(|i| format!("Sentence number {i} tells more of the tale.")).collect();
    let story = Story::new("Bench", body.join(" "));
    let segments = segment_for_summary(&story.sentences, 5, 77).unwrap();
    let seg_vecs = segments.iter().map(|_| unit(&mut rng, dims)).collect();
    let images: Vec<SentenceImage> = story
        .sentences
        .iter()
        .map(|s| SentenceImage {
            sentence_index: s.index,
            artifact_id: format!("img-{seed}-{}", s.index),
            prompt_text: s.text.clone(),
            reference_artifact_id: None,
            seed,
        })
        .collect();
    let vectors = images.iter().map(|im| (im.artifact_id.clone(), unit(&mut rng, dims))).collect();
    Instance { segments, seg_vecs, images, vectors }
}

fn bench_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("selection");
    group.sample_size(20);
    let select = |i: &Instance| select_from_vectors(&i.segments, &i.seg_vecs, &i.images, &i.vectors, 2.5).unwrap();
    for stories in [16usize, 128] {
        let data: Vec<Instance> = (0..stories as u64).map(|s| instance(s, 512)).collect();
        group.throughput(Throughput::Elements(stories as u64));
        group.bench_with_input(BenchmarkId::new("sequential", stories), &data, |b, d| {
            b.iter(|| batch::map_sequential(black_box(d), select))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", stories), &data, |b, d| {
            b.iter(|| batch::map_parallel(black_box(d), select))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fixations, bench_selection);
criterion_main!(benches);
