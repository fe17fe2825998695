//! Per-sentence image generation and summary image selection.

pub mod clip;
pub mod selector;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clip::{clip_score, cosine, CLIP_S_WEIGHT};
pub use selector::{
    embed_images, embed_segments, segment_for_summary, select_from_vectors, select_summary_images, ImageEmbeddings,
    Segment, SelectionEntry, SummarySelection, DEFAULT_TOKEN_BUDGET, SUMMARY_SEGMENTS,
};

use crate::content::{Story, StoryMetadata, Summary};
use crate::providers::{self, ArtifactStore, ImageGenRequest, ImageProvider, ProviderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("{sentences} sentences cannot fill {segments} segments")]
    TooFewSentences { sentences: usize, segments: usize },
    #[error("segment {0} has no candidate images")]
    EmptySegmentCandidates(usize),
    #[error("no cached embedding for image {0}")]
    MissingEmbedding(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceImage {
    pub sentence_index: usize,
    pub artifact_id: String,
    pub prompt_text: String,
    pub reference_artifact_id: Option<String>,
    pub seed: u64,
}

/// Prompt for one sentence: the scene first (providers may key on it), then
/// characters, the entities of this sentence, style cues and the summary.
pub fn image_prompt(sentence: &str, sentence_index: usize, metadata: &StoryMetadata, summary: &Summary) -> String {
    let mut p = format!("Scene: {}", sentence.trim());
    let chars = metadata.character_descriptions();
    if !chars.is_empty() {
        p.push_str("\nCharacters: ");
        p.push_str(&chars.join(", "));
    }
    if let Some(ents) = metadata.per_sentence_entities.get(&sentence_index).filter(|e| !e.is_empty()) {
        p.push_str("\nIn this scene: ");
        p.push_str(&ents.join(", "));
    }
    if !metadata.style_descriptors.is_empty() {
        p.push_str("\nStyle: ");
        p.push_str(&metadata.style_descriptors.join(", "));
    }
    p.push_str("\nStory summary: ");
    p.push_str(&summary.text);
    p
}

fn check_progress(progress: &[SentenceImage], store: &ArtifactStore, sentences: usize) -> Result<(), ImageError> {
    if progress.len() > sentences {
        return Err(ImageError::InvalidArgument("more images than sentences".into()));
    }
    for (i, im) in progress.iter().enumerate() {
        let expected_ref = i.checked_sub(1).map(|p| progress[p].artifact_id.clone());
        if im.sentence_index != i || im.reference_artifact_id != expected_ref {
            return Err(ImageError::InvalidArgument(format!("image {i} breaks the reference chain")));
        }
        if !store.contains(&im.artifact_id) {
            return Err(ImageError::Provider(ProviderError::ReferenceNotFound(im.artifact_id.clone())));
        }
    }
    Ok(())
}

/// Generates one image per sentence, strictly in order. Image `k > 0` is
/// conditioned on image `k - 1`.
///
/// `progress` holds images already produced; generation resumes after them,
/// and on failure it keeps everything completed so far.
pub fn generate_story_images(
    story: &Story,
    metadata: &StoryMetadata,
    summary: &Summary,
    provider: &dyn ImageProvider,
    store: &ArtifactStore,
    seed: u64,
    progress: &mut Vec<SentenceImage>,
) -> Result<(), ImageError> {
    check_progress(progress, store, story.sentences.len())?;
    for sentence in &story.sentences[progress.len()..] {
        let reference = progress.last().map(|im| im.artifact_id.clone());
        let img_seed = seed.wrapping_add(sentence.index as u64);
        let req = ImageGenRequest {
            prompt_text: image_prompt(&sentence.text, sentence.index, metadata, summary),
            reference_image: reference.clone(),
            style_notes: metadata.style_descriptors.clone(),
            seed: Some(img_seed),
        };
        let artifact = providers::generate_image(provider, store, &req)?;
        progress.push(SentenceImage {
            sentence_index: sentence.index,
            artifact_id: artifact.id,
            prompt_text: req.prompt_text,
            reference_artifact_id: reference,
            seed: img_seed,
        });
    }
    Ok(())
}
