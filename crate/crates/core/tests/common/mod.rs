//! Independent reference implementations and seeded input generators shared
//! by the integration tests. The references favour literal transcriptions
//! of each rule over speed.
#![allow(dead_code)]

use genread_core::content::{segment_sentences, Story};
use genread_core::gaze::{Fixation, FixationParams, GazePoint};
use genread_core::images::SentenceImage;
use genread_core::providers::{ArtifactStore, EmbeddingVector, ImageArtifact, RenderedImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- fixations

#[derive(Debug, Clone, PartialEq)]
pub struct RefFixation {
    pub first: usize,
    pub last: usize,
    pub cx: f64,
    pub cy: f64,
}

fn mean(points: &[&GazePoint]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.x_px).sum();
    let sy: f64 = points.iter().map(|p| p.y_px).sum();
    (sx / n, sy / n)
}

/// I-DT by the letter: split at invalid samples; a window of `min_points`
/// consecutive samples opens a fixation iff every sample is within the
/// opening radius of the window mean; each following sample joins iff it is
/// within the extension radius of the mean of the samples accepted so far;
/// the first rejected sample starts the next window. Means are recomputed
/// from scratch at every step.
pub fn reference_fixations(points: &[GazePoint], params: &FixationParams) -> Vec<RefFixation> {
    let m = params.min_points;
    let mut runs: Vec<Vec<usize>> = vec![vec![]];
    for (i, p) in points.iter().enumerate() {
        if p.valid {
            runs.last_mut().unwrap().push(i);
        } else {
            runs.push(vec![]);
        }
    }
    let mut out = Vec::new();
    for run in runs {
        let mut i = 0;
        while i + m <= run.len() {
            let window: Vec<&GazePoint> = run[i..i + m].iter().map(|&k| &points[k]).collect();
            let (cx, cy) = mean(&window);
            let opens = window.iter().all(|p| (p.x_px - cx).hypot(p.y_px - cy) <= params.init_dispersion_px);
            if !opens {
                i += 1;
                continue;
            }
            let mut j = i + m;
            while j < run.len() {
                let members: Vec<&GazePoint> = run[i..j].iter().map(|&k| &points[k]).collect();
                let (cx, cy) = mean(&members);
                let p = &points[run[j]];
                if (p.x_px - cx).hypot(p.y_px - cy) <= params.extend_dispersion_px {
                    j += 1;
                } else {
                    break;
                }
            }
            let members: Vec<&GazePoint> = run[i..j].iter().map(|&k| &points[k]).collect();
            let (cx, cy) = mean(&members);
            out.push(RefFixation { first: run[i], last: run[j - 1], cx, cy });
            i = j;
        }
    }
    out
}

/// Compares implementation output against the reference: identical
/// boundaries and point counts, centroids within `tol`, and nominal
/// durations. Returns a description of the first difference.
pub fn compare_fixations(
    got: &[Fixation],
    want: &[RefFixation],
    params: &FixationParams,
    tol: f64,
) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} fixations, reference has {}", got.len(), want.len()));
    }
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        if (g.first_sample, g.last_sample) != (w.first, w.last) {
            return Err(format!("fixation {k}: samples {}..={} vs {}..={}", g.first_sample, g.last_sample, w.first, w.last));
        }
        let n = w.last - w.first + 1;
        if g.n_points != n {
            return Err(format!("fixation {k}: {} points, expected {n} (contiguous, no invalid samples)", g.n_points));
        }
        if (g.centroid.x - w.cx).abs() > tol || (g.centroid.y - w.cy).abs() > tol {
            return Err(format!("fixation {k}: centroid {:?} vs ({}, {})", g.centroid, w.cx, w.cy));
        }
        let d = 1000.0 * n as f64 / params.sample_rate_hz;
        if (g.duration_ms - d).abs() > 1e-9 {
            return Err(format!("fixation {k}: duration {} vs {d}", g.duration_ms));
        }
    }
    Ok(())
}

/// Gaze-like random walk at 90 Hz: jittery dwell periods broken by saccades,
/// with occasional invalid samples.
pub fn random_walk(seed: u64, len: usize) -> Vec<GazePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0));
    let jitter = rng.random_range(3.0..25.0);
    (0..len)
        .map(|i| {
            let t = (i as f64 * 1000.0 / 90.0).round() as i64;
            if rng.random_bool(0.06) {
                x = rng.random_range(0.0..1920.0);
                y = rng.random_range(0.0..1080.0);
            } else {
                x += rng.random_range(-jitter..jitter);
                y += rng.random_range(-jitter..jitter);
            }
            if rng.random_bool(0.02) {
                GazePoint::invalid(t)
            } else {
                GazePoint::new(t, x, y)
            }
        })
        .collect()
}

// ---------------------------------------------------------------- selection

pub fn ref_clip_s(text: &[f64], image: &[f64], w: f64) -> f64 {
    let dot: f64 = text.iter().zip(image).map(|(a, b)| a * b).sum();
    let nt = text.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ni = image.iter().map(|a| a * a).sum::<f64>().sqrt();
    w * (dot / (nt * ni)).clamp(-1.0, 1.0).max(0.0)
}

/// Balanced contiguous split, earlier segments taking the remainder, as
/// inclusive sentence ranges.
pub fn ref_balanced_ranges(n: usize, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..k {
        let len = n / k + usize::from(i < n % k);
        out.push((start, start + len - 1));
        start += len;
    }
    out
}

/// Brute-force argmax per range: scores every sentence image in range and
/// keeps the maximum, preferring the lower sentence index on ties.
pub fn ref_select(
    ranges: &[(usize, usize)],
    segment_vectors: &[Vec<f64>],
    image_vectors_by_sentence: &[Vec<f64>],
    w: f64,
) -> Vec<(usize, f64)> {
    ranges
        .iter()
        .zip(segment_vectors)
        .map(|(&(first, last), sv)| {
            let scores: Vec<(usize, f64)> =
                (first..=last).map(|s| (s, ref_clip_s(sv, &image_vectors_by_sentence[s], w))).collect();
            let best = scores.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            *scores.iter().find(|(_, v)| *v == best).unwrap()
        })
        .collect()
}

const WORDS: &[&str] = &[
    "fox", "river", "stone", "lantern", "moss", "owl", "bridge", "cloud", "seed", "path", "storm", "apple", "kite",
    "meadow", "shell", "tower", "garden", "wolf", "boat", "honey",
];

/// A story of `n_sentences` short sentences (at most eight tokens each), so
/// five segments never exceed a 77-token budget.
pub fn short_story(rng: &mut ChaCha8Rng, n_sentences: usize) -> Story {
    let body: Vec<String> = (0..n_sentences)
        .map(|_| {
            let len = rng.random_range(2..=6);
            let words: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
            let mut s = words.join(" ");
            s[..1].make_ascii_uppercase();
            s.push('.');
            s
        })
        .collect();
    let story = Story::new("T", body.join(" "));
    assert_eq!(segment_sentences(&story.body).len(), n_sentences);
    story
}

/// Stores one stand-in image per sentence and returns the per-sentence
/// records alongside the stored artifacts.
pub fn fake_images(story: &Story, seed: u64) -> (Vec<SentenceImage>, Vec<(String, ImageArtifact)>) {
    let store = ArtifactStore::new();
    let mut images = Vec::new();
    let mut pairs = Vec::new();
    for s in &story.sentences {
        let bytes = format!("P6\n# caption: {}\n# seed {seed}\n1 1\n255\n\x01\x02\x03", s.text).into_bytes();
        let art = store.insert(RenderedImage { media_type: "image/x-portable-pixmap".into(), bytes, width_px: 1, height_px: 1 });
        images.push(SentenceImage {
            sentence_index: s.index,
            artifact_id: art.id.clone(),
            prompt_text: s.text.clone(),
            reference_artifact_id: images.last().map(|p: &SentenceImage| p.artifact_id.clone()),
            seed,
        });
        pairs.push((art.id.clone(), art));
    }
    (images, pairs)
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, dims: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 {
            return EmbeddingVector::new(v.iter().map(|a| a / n).collect()).unwrap();
        }
    }
}
