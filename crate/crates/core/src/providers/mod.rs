//! Uniform interfaces to text-generation, image-generation and joint
//! text-image embedding services.
//!
//! Every provider call is a single attempt. Retry policy belongs to callers
//! (see [`crate::content`]). Deterministic offline implementations live in
//! [`mock`]; HTTP/JSON adapters for hosted services live in [`http`].

pub mod http;
pub mod mock;

use std::collections::HashMap;
use std::fmt;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textutil;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned no usable output")]
    EmptyResponse,
    #[error("reference image {0} not found in artifact store")]
    ReferenceNotFound(String),
    #[error("input has {tokens} tokens, budget is {budget}")]
    InputTooLong { tokens: usize, budget: usize },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
}

/// What a text request is for. Hosted models only see the rendered prompt;
/// the mock uses the tag to choose its generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextTask {
    Story,
    Summary,
    Metadata,
    Questions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGenRequest {
    pub task: TextTask,
    pub instruction: String,
    pub constraints: Vec<String>,
    pub preferences: Vec<String>,
    /// Source material the instruction refers to (the story, for summaries,
    /// metadata extraction and questions).
    pub context: Option<String>,
    pub max_output_words: u32,
    pub target_words: Option<u32>,
    pub seed: Option<u64>,
}

impl TextGenRequest {
    pub fn new(task: TextTask, instruction: impl Into<String>, max_output_words: u32) -> Self {
        Self {
            task,
            instruction: instruction.into(),
            constraints: Vec::new(),
            preferences: Vec::new(),
            context: None,
            max_output_words,
            target_words: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.instruction.trim().is_empty() {
            return Err(ProviderError::InvalidRequest("instruction is empty".into()));
        }
        if self.max_output_words == 0 {
            return Err(ProviderError::InvalidRequest("max_output_words must be at least 1".into()));
        }
        Ok(())
    }

    /// Single prompt string: instruction, then constraint and preference
    /// clauses as bullet lists, then the source material.
    pub fn render_prompt(&self) -> String {
        let mut out = self.instruction.trim().to_string();
        if !self.constraints.is_empty() {
            out.push_str("\n\nConstraints:");
            for c in &self.constraints {
                out.push_str("\n- ");
                out.push_str(c);
            }
        }
        if !self.preferences.is_empty() {
            out.push_str("\n\nPreferences:");
            for p in &self.preferences {
                out.push_str("\n- ");
                out.push_str(p);
            }
        }
        if let Some(ctx) = &self.context {
            out.push_str("\n\nSource:\n");
            out.push_str(ctx);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGenRequest {
    pub prompt_text: String,
    pub reference_image: Option<String>,
    pub style_notes: Vec<String>,
    pub seed: Option<u64>,
}

impl ImageGenRequest {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.prompt_text.trim().is_empty() {
            return Err(ProviderError::InvalidRequest("prompt_text is empty".into()));
        }
        Ok(())
    }
}

/// Fixed-dimension embedding. Construction rejects empty or non-finite
/// input, so every value in circulation satisfies both invariants.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector", into = "RawVector")]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawVector {
    dims: usize,
    values: Vec<f64>,
}

impl TryFrom<RawVector> for EmbeddingVector {
    type Error = String;
    fn try_from(raw: RawVector) -> Result<Self, String> {
        if raw.dims != raw.values.len() {
            return Err(format!("dims {} != {} values", raw.dims, raw.values.len()));
        }
        EmbeddingVector::new(raw.values).map_err(|e| e.to_string())
    }
}

impl From<EmbeddingVector> for RawVector {
    fn from(v: EmbeddingVector) -> Self {
        RawVector { dims: v.values.len(), values: v.values }
    }
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::InvalidRequest("embedding has zero dims".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProviderError::MalformedResponse(format!("embedding value {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Multiplies every component by `factor`. Non-finite results are rejected.
    pub fn scaled(&self, factor: f64) -> Result<Self, ProviderError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

impl fmt::Debug for EmbeddingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmbeddingVector(dims={}, norm={:.6})", self.dims(), self.norm())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct ImageArtifact {
    pub id: String,
    pub media_type: String,
    pub bytes: Vec<u8>,
    pub width_px: u32,
    pub height_px: u32,
}

impl fmt::Debug for ImageArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageArtifact")
            .field("id", &self.id)
            .field("media_type", &self.media_type)
            .field("bytes", &self.bytes.len())
            .field("width_px", &self.width_px)
            .field("height_px", &self.height_px)
            .finish()
    }
}

/// Provider output before it is assigned an id and stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedImage {
    pub media_type: String,
    pub bytes: Vec<u8>,
    pub width_px: u32,
    pub height_px: u32,
}

pub trait TextProvider: Send + Sync {
    fn model_name(&self) -> &str;
    fn generate_text(&self, req: &TextGenRequest) -> Result<String, ProviderError>;
}

pub trait ImageProvider: Send + Sync {
    fn model_name(&self) -> &str;
    /// `reference` is the already-resolved previous image, if any.
    fn render(&self, req: &ImageGenRequest, reference: Option<&ImageArtifact>) -> Result<RenderedImage, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_name(&self) -> &str;
    fn dims(&self) -> usize;
    /// Maximum token count accepted by `embed_text`.
    fn token_budget(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
    fn embed_image(&self, image: &ImageArtifact) -> Result<EmbeddingVector, ProviderError>;
}

/// Shared precondition check for `embed_text` implementations.
pub fn check_text_input(text: &str, budget: usize) -> Result<(), ProviderError> {
    if text.trim().is_empty() {
        return Err(ProviderError::InvalidRequest("text is empty".into()));
    }
    let tokens = textutil::count_tokens(text);
    if tokens > budget {
        return Err(ProviderError::InputTooLong { tokens, budget });
    }
    Ok(())
}

/// Validates and forwards a text request, rejecting blank output.
pub fn generate_text(provider: &dyn TextProvider, req: &TextGenRequest) -> Result<String, ProviderError> {
    req.validate()?;
    let text = provider.generate_text(req)?;
    if text.trim().is_empty() {
        return Err(ProviderError::EmptyResponse);
    }
    Ok(text)
}

/// Resolves the reference image, renders, and stores the result under a
/// fresh id.
pub fn generate_image(
    provider: &dyn ImageProvider,
    store: &ArtifactStore,
    req: &ImageGenRequest,
) -> Result<ImageArtifact, ProviderError> {
    req.validate()?;
    let reference = match &req.reference_image {
        Some(id) => Some(store.get(id).ok_or_else(|| ProviderError::ReferenceNotFound(id.clone()))?),
        None => None,
    };
    let rendered = provider.render(req, reference.as_ref())?;
    if rendered.bytes.is_empty() || rendered.width_px == 0 || rendered.height_px == 0 {
        return Err(ProviderError::EmptyResponse);
    }
    Ok(store.insert(rendered))
}

/// In-memory image store. Ids are `img-<seq>-<hash8>`: unique per store and
/// reproducible for a given insertion order.
#[derive(Default)]
pub struct ArtifactStore {
    inner: Mutex<StoreInner>,
}

#[derive(Default)]
struct StoreInner {
    next_seq: u64,
    items: HashMap<String, ImageArtifact>,
}

impl ArtifactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, img: RenderedImage) -> ImageArtifact {
        let mut inner = self.inner.lock();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let hash = textutil::content_hash(&[&img.bytes]);
        let artifact = ImageArtifact {
            id: format!("img-{seq:04}-{}", &hash[..8]),
            media_type: img.media_type,
            bytes: img.bytes,
            width_px: img.width_px,
            height_px: img.height_px,
        };
        inner.items.insert(artifact.id.clone(), artifact.clone());
        artifact
    }

    /// Re-registers an artifact loaded from disk under its existing id.
    pub fn restore(&self, artifact: ImageArtifact) {
        let mut inner = self.inner.lock();
        inner.next_seq += 1;
        inner.items.insert(artifact.id.clone(), artifact);
    }

    pub fn get(&self, id: &str) -> Option<ImageArtifact> {
        self.inner.lock().items.get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.inner.lock().items.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
