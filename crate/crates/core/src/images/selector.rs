//! Five-way story segmentation and per-segment summary image selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::clip::clip_score;
use super::{ImageError, SentenceImage};
use crate::batch;
use crate::content::Sentence;
use crate::providers::{EmbeddingProvider, EmbeddingVector};
use crate::textutil::{count_tokens, truncate_to_tokens};

pub const SUMMARY_SEGMENTS: usize = 5;
pub const DEFAULT_TOKEN_BUDGET: usize = 77;

/// A contiguous run of sentences `first..=last`. `embed_text` is what gets
/// embedded: the full `text`, or its first `token_budget` tokens when no
/// boundary shift could bring the segment under budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub first: usize,
    pub last: usize,
    pub text: String,
    pub embed_text: String,
    pub token_count: usize,
    pub truncated: bool,
}

impl Segment {
    pub fn contains(&self, sentence_index: usize) -> bool {
        (self.first..=self.last).contains(&sentence_index)
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Splits sentences into `k` contiguous runs of near-equal length (earlier
/// runs take the remainder), then shifts boundaries greedily so that
/// over-budget runs hand edge sentences to neighbours with room. Runs still
/// over budget are embedded truncated.
pub fn segment_for_summary(sentences: &[Sentence], k: usize, token_budget: usize) -> Result<Vec<Segment>, ImageError> {
    if k == 0 || token_budget == 0 {
        return Err(ImageError::InvalidArgument("segment count and token budget must be positive".into()));
    }
    let n = sentences.len();
    if n < k {
        return Err(ImageError::TooFewSentences { sentences: n, segments: k });
    }
    let tokens: Vec<usize> = sentences.iter().map(|s| count_tokens(&s.text)).collect();

    let (base, rem) = (n / k, n % k);
    let mut sizes: Vec<usize> = (0..k).map(|i| base + usize::from(i < rem)).collect();
    shift_toward_budget(&mut sizes, &tokens, token_budget);

    let mut out = Vec::with_capacity(k);
    let mut first = 0;
    for (i, &size) in sizes.iter().enumerate() {
        let last = first + size - 1;
        let text = sentences[first..=last].iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
        let (embed, truncated) = truncate_to_tokens(&text, token_budget);
        let embed_text = embed.to_string();
        out.push(Segment {
            index: i + 1,
            first,
            last,
            token_count: count_tokens(&embed_text),
            text,
            embed_text,
            truncated,
        });
        first = last + 1;
    }
    Ok(out)
}

fn shift_toward_budget(sizes: &mut [usize], tokens: &[usize], budget: usize) {
    let k = sizes.len();
    let seg_tokens = |sizes: &[usize]| -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        for &s in sizes {
            out.push(tokens[start..start + s].iter().sum());
            start += s;
        }
        out
    };
    // Every move strictly lowers total overflow, so this terminates.
    loop {
        let totals = seg_tokens(sizes);
        let mut order: Vec<usize> = (0..k).filter(|&i| totals[i] > budget && sizes[i] > 1).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(totals[i]), i));
        let starts: Vec<usize> = sizes.iter().scan(0, |acc, &s| {
            let st = *acc;
            *acc += s;
            Some(st)
        }).collect();

        let mut moved = false;
        for i in order {
            let first_tok = tokens[starts[i]];
            let last_tok = tokens[starts[i] + sizes[i] - 1];
            let left = (i > 0 && totals[i - 1] + first_tok <= budget && first_tok > 0).then(|| totals[i - 1] + first_tok);
            let right =
                (i + 1 < k && totals[i + 1] + last_tok <= budget && last_tok > 0).then(|| totals[i + 1] + last_tok);
            match (left, right) {
                (Some(l), Some(r)) if r < l => {
                    sizes[i] -= 1;
                    sizes[i + 1] += 1;
                }
                (Some(_), _) => {
                    sizes[i] -= 1;
                    sizes[i - 1] += 1;
                }
                (None, Some(_)) => {
                    sizes[i] -= 1;
                    sizes[i + 1] += 1;
                }
                (None, None) => continue,
            }
            moved = true;
            break;
        }
        if !moved {
            return;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub segment_index: usize,
    pub first: usize,
    pub last: usize,
    pub sentence_index: usize,
    pub artifact_id: String,
    pub clip_s: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySelection {
    pub entries: Vec<SelectionEntry>,
}

impl SummarySelection {
    pub fn validate(&self, segments: &[Segment]) -> Result<(), String> {
        if self.entries.len() != segments.len() {
            return Err(format!("{} selections for {} segments", self.entries.len(), segments.len()));
        }
        for (e, s) in self.entries.iter().zip(segments) {
            if e.segment_index != s.index || !s.contains(e.sentence_index) {
                return Err(format!("selection for segment {} lies outside its range", s.index));
            }
            if e.clip_s.is_nan() || e.clip_s < 0.0 {
                return Err(format!("negative score in segment {}", s.index));
            }
        }
        Ok(())
    }

    pub fn sentence_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.sentence_index).collect()
    }

    pub fn artifact_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.artifact_id.clone()).collect()
    }
}

/// Cached image vectors keyed by artifact id.
pub type ImageEmbeddings = BTreeMap<String, EmbeddingVector>;

/// Embeds every image once. Calls run concurrently under the `parallel`
/// feature.
pub fn embed_images(
    images: &[(String, crate::providers::ImageArtifact)],
    embedder: &dyn EmbeddingProvider,
) -> Result<ImageEmbeddings, ImageError> {
    let vectors = batch::try_map(images, |(id, art)| embedder.embed_image(art).map(|v| (id.clone(), v)))?;
    Ok(vectors.into_iter().collect())
}

/// Per segment, the candidate image with the highest weighted clamped
/// cosine against the segment vector. Ties go to the lowest sentence index
/// regardless of the order of `images`.
pub fn select_from_vectors(
    segments: &[Segment],
    segment_vectors: &[EmbeddingVector],
    images: &[SentenceImage],
    image_vectors: &ImageEmbeddings,
    weight: f64,
) -> Result<SummarySelection, ImageError> {
    if segments.len() != segment_vectors.len() {
        return Err(ImageError::InvalidArgument("one vector per segment required".into()));
    }
    let mut sorted: Vec<&SentenceImage> = images.iter().collect();
    sorted.sort_by_key(|im| im.sentence_index);

    let mut entries = Vec::with_capacity(segments.len());
    for (seg, seg_vec) in segments.iter().zip(segment_vectors) {
        let mut best: Option<(f64, &SentenceImage)> = None;
        for im in sorted.iter().filter(|im| seg.contains(im.sentence_index)) {
            let v = image_vectors
                .get(&im.artifact_id)
                .ok_or_else(|| ImageError::MissingEmbedding(im.artifact_id.clone()))?;
            let score = clip_score(seg_vec, v, weight)?;
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, im));
            }
        }
        let (clip_s, im) = best.ok_or(ImageError::EmptySegmentCandidates(seg.index))?;
        entries.push(SelectionEntry {
            segment_index: seg.index,
            first: seg.first,
            last: seg.last,
            sentence_index: im.sentence_index,
            artifact_id: im.artifact_id.clone(),
            clip_s,
            truncated: seg.truncated,
        });
    }
    Ok(SummarySelection { entries })
}

/// Embeds each segment's text once and selects against cached image vectors.
pub fn select_summary_images(
    segments: &[Segment],
    images: &[SentenceImage],
    embedder: &dyn EmbeddingProvider,
    image_vectors: &ImageEmbeddings,
    weight: f64,
) -> Result<SummarySelection, ImageError> {
    let seg_vecs = embed_segments(segments, embedder)?;
    select_from_vectors(segments, &seg_vecs, images, image_vectors, weight)
}

pub fn embed_segments(segments: &[Segment], embedder: &dyn EmbeddingProvider) -> Result<Vec<EmbeddingVector>, ImageError> {
    Ok(batch::try_map(segments, |s| embedder.embed_text(&s.embed_text))?)
}
