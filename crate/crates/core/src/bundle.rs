//! Textbook bundles: one story with all derived artifacts, stored as a
//! directory of versioned JSON fragments plus raw image files.
//!
//! ```text
//! <bundle>/manifest.json           provenance, parameters, fragment hashes
//! <bundle>/story.json              title, body, sentence spans
//! <bundle>/metadata.json           characters, style, per-sentence entities
//! <bundle>/summary.json            text summary
//! <bundle>/questions.json          ten multiple-choice questions
//! <bundle>/images.json             per-sentence image records (prompts, chain)
//! <bundle>/images/NNN.img          image bytes, NNN = sentence index
//! <bundle>/embeddings.json         cached image and segment vectors
//! <bundle>/summary_selection.json  segments and the selected image per segment
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::content::{
    self, ContentError, LengthBand, PreferenceSpec, QuestionSet, RetryPolicy, Sentence, Story, StoryMetadata, Summary,
};
use crate::experiment::{reading_time_limit, PlanStory, ReadingCondition};
use crate::images::{
    self, embed_images, embed_segments, segment_for_summary, select_from_vectors, ImageError, Segment, SentenceImage,
    SummarySelection, SUMMARY_SEGMENTS,
};
use crate::providers::{ArtifactStore, EmbeddingProvider, EmbeddingVector, ImageArtifact, ImageProvider, TextProvider};
use crate::textutil::content_hash;

pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STORY_FILE: &str = "story.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const QUESTIONS_FILE: &str = "questions.json";
pub const IMAGES_FILE: &str = "images.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const SELECTION_FILE: &str = "summary_selection.json";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{stage}: {source}")]
    Content { stage: &'static str, source: ContentError },
    #[error("{stage}: {source}")]
    Image { stage: &'static str, source: ImageError },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid bundle: {0}")]
    Invalid(String),
}

impl BundleError {
    /// True when the failure came from a provider call rather than from
    /// validation or storage.
    pub fn is_provider(&self) -> bool {
        matches!(
            self,
            BundleError::Content { source: ContentError::Provider(_), .. }
                | BundleError::Image { source: ImageError::Provider(_), .. }
        )
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BundleError {
    BundleError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn invalid(m: impl Into<String>) -> BundleError {
    BundleError::Invalid(m.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderProvenance {
    pub text_model: String,
    pub image_model: String,
    pub embed_model: String,
    pub seed: u64,
    pub mock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleParameters {
    pub story_band: LengthBand,
    pub summary_band: LengthBand,
    pub clip_weight: f64,
    pub token_budget: usize,
    pub segments: usize,
    pub embedding_dims: usize,
    pub preferences: PreferenceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub schema_version: u32,
    pub bundle_id: String,
    pub title: String,
    pub created_at: String,
    /// Fragment role to relative path.
    pub fragments: BTreeMap<String, String>,
    /// Relative path to SHA-256 of the file bytes, for every file but the
    /// manifest.
    pub files: BTreeMap<String, String>,
    pub providers: ProviderProvenance,
    pub parameters: BundleParameters,
}

#[derive(Serialize, Deserialize)]
struct StoryFragment {
    story: Story,
}

#[derive(Serialize, Deserialize)]
struct MetadataFragment {
    story_id: String,
    metadata: StoryMetadata,
}

#[derive(Serialize, Deserialize)]
struct SummaryFragment {
    summary: Summary,
}

#[derive(Serialize, Deserialize)]
struct QuestionsFragment {
    questions: QuestionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    #[serde(flatten)]
    pub image: SentenceImage,
    pub file: String,
    pub media_type: String,
    pub width_px: u32,
    pub height_px: u32,
    pub sha256: String,
}

#[derive(Serialize, Deserialize)]
struct ImagesFragment {
    images: Vec<ImageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVector {
    pub segment_index: usize,
    pub embed_text: String,
    pub vector: EmbeddingVector,
}

/// Cached vectors, so selection can be recomputed offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEmbeddings {
    pub model: String,
    pub dims: usize,
    pub images: BTreeMap<String, EmbeddingVector>,
    pub segments: Vec<SegmentVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSelection {
    pub clip_weight: f64,
    pub token_budget: usize,
    pub segments: Vec<Segment>,
    #[serde(flatten)]
    pub selection: SummarySelection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub manifest: BundleManifest,
    pub story: Story,
    pub metadata: StoryMetadata,
    pub summary: Summary,
    pub questions: QuestionSet,
    pub images: Vec<SentenceImage>,
    /// Image bytes keyed by artifact id.
    pub artifacts: BTreeMap<String, ImageArtifact>,
    pub embeddings: BundleEmbeddings,
    pub selection: BundleSelection,
}

fn image_file(sentence_index: usize) -> String {
    format!("{IMAGES_DIR}/{sentence_index:03}.img")
}

/// Serializes a fragment body with a leading `schema_version` field. Goes
/// through `Value` rather than `#[serde(flatten)]`, which cannot carry
/// integer map keys.
fn to_json<T: Serialize>(body: T) -> Vec<u8> {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), SCHEMA_VERSION.into());
    match serde_json::to_value(body).expect("serializable") {
        serde_json::Value::Object(m) => obj.extend(m),
        other => panic!("fragment body must be an object, got {other}"),
    }
    to_json_plain(&obj)
}

fn from_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, BundleError> {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| io_err(path, format!("malformed: {e}")))?;
    let version = v.as_object_mut().and_then(|o| o.remove("schema_version")).and_then(|s| s.as_u64());
    if version != Some(u64::from(SCHEMA_VERSION)) {
        return Err(io_err(path, format!("unsupported schema_version {version:?}")));
    }
    serde_json::from_value(v).map_err(|e| io_err(path, format!("malformed: {e}")))
}

impl Bundle {
    pub fn id(&self) -> &str {
        &self.manifest.bundle_id
    }

    /// Every file except the manifest, as relative path and bytes.
    fn fragment_files(&self) -> Result<Vec<(String, Vec<u8>)>, BundleError> {
        let mut records = Vec::with_capacity(self.images.len());
        let mut files = Vec::new();
        for im in &self.images {
            let art = self
                .artifacts
                .get(&im.artifact_id)
                .ok_or_else(|| invalid(format!("missing bytes for {}", im.artifact_id)))?;
            let file = image_file(im.sentence_index);
            records.push(ImageRecord {
                image: im.clone(),
                file: file.clone(),
                media_type: art.media_type.clone(),
                width_px: art.width_px,
                height_px: art.height_px,
                sha256: content_hash(&[&art.bytes]),
            });
            files.push((file, art.bytes.clone()));
        }
        let mut out = vec![
            (STORY_FILE.to_string(), to_json(StoryFragment { story: self.story.clone() })),
            (
                METADATA_FILE.to_string(),
                to_json(MetadataFragment { story_id: self.story.id.clone(), metadata: self.metadata.clone() }),
            ),
            (SUMMARY_FILE.to_string(), to_json(SummaryFragment { summary: self.summary.clone() })),
            (QUESTIONS_FILE.to_string(), to_json(QuestionsFragment { questions: self.questions.clone() })),
            (IMAGES_FILE.to_string(), to_json(ImagesFragment { images: records })),
            (EMBEDDINGS_FILE.to_string(), to_json(&self.embeddings)),
            (SELECTION_FILE.to_string(), to_json(&self.selection)),
        ];
        out.extend(files);
        Ok(out)
    }

    /// Writes the bundle to `dir`. Files are staged in a sibling directory
    /// and swapped in, so readers never see a half-written bundle. An
    /// existing `dir` is replaced only if it is empty or holds a bundle.
    pub fn save(&self, dir: &Path) -> Result<BundleManifest, BundleError> {
        self.validate()?;
        if dir.exists() {
            let empty = fs::read_dir(dir).map_err(|e| io_err(dir, e))?.next().is_none();
            if !empty && !dir.join(MANIFEST_FILE).is_file() {
                return Err(io_err(dir, "exists and is not a bundle directory"));
            }
        }
        let files = self.fragment_files()?;
        let mut manifest = self.manifest.clone();
        manifest.files = files.iter().map(|(p, b)| (p.clone(), content_hash(&[b]))).collect();

        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "bundle".into());
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        let staging = parent.join(format!(".{name}.staging"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        }
        fs::create_dir_all(staging.join(IMAGES_DIR)).map_err(|e| io_err(&staging, e))?;
        for (rel, bytes) in &files {
            let p = staging.join(rel);
            fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        }
        let mp = staging.join(MANIFEST_FILE);
        fs::write(&mp, to_json_plain(&manifest)).map_err(|e| io_err(&mp, e))?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| io_err(dir, e))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let read = |rel: &str| -> Result<Vec<u8>, BundleError> {
            let p = dir.join(rel);
            fs::read(&p).map_err(|e| io_err(&p, e))
        };
        let mp = dir.join(MANIFEST_FILE);
        let manifest: BundleManifest =
            serde_json::from_slice(&read(MANIFEST_FILE)?).map_err(|e| io_err(&mp, format!("malformed: {e}")))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(io_err(&mp, format!("unsupported schema_version {}", manifest.schema_version)));
        }
        let mut cache: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for (rel, hash) in &manifest.files {
            if rel.contains("..") || Path::new(rel).is_absolute() {
                return Err(invalid(format!("unsafe path {rel:?} in manifest")));
            }
            let bytes = read(rel)?;
            if &content_hash(&[&bytes]) != hash {
                return Err(invalid(format!("{rel}: content hash mismatch")));
            }
            cache.insert(rel.clone(), bytes);
        }
        let get = |rel: &str| -> Result<&Vec<u8>, BundleError> {
            cache.get(rel).ok_or_else(|| invalid(format!("manifest does not list {rel}")))
        };
        let frag = |rel: &str| -> Result<(PathBuf, &Vec<u8>), BundleError> { Ok((dir.join(rel), get(rel)?)) };

        let (p, b) = frag(STORY_FILE)?;
        let story = from_json::<StoryFragment>(&p, b)?.story;
        let (p, b) = frag(METADATA_FILE)?;
        let meta = from_json::<MetadataFragment>(&p, b)?;
        if meta.story_id != story.id {
            return Err(invalid("metadata belongs to another story"));
        }
        let (p, b) = frag(SUMMARY_FILE)?;
        let summary = from_json::<SummaryFragment>(&p, b)?.summary;
        let (p, b) = frag(QUESTIONS_FILE)?;
        let questions = from_json::<QuestionsFragment>(&p, b)?.questions;
        let (p, b) = frag(IMAGES_FILE)?;
        let records = from_json::<ImagesFragment>(&p, b)?.images;
        let (p, b) = frag(EMBEDDINGS_FILE)?;
        let embeddings = from_json::<BundleEmbeddings>(&p, b)?;
        let (p, b) = frag(SELECTION_FILE)?;
        let selection = from_json::<BundleSelection>(&p, b)?;

        let mut images = Vec::with_capacity(records.len());
        let mut artifacts = BTreeMap::new();
        for r in records {
            let bytes = get(&r.file)?.clone();
            if content_hash(&[&bytes]) != r.sha256 {
                return Err(invalid(format!("{}: hash differs from images.json", r.file)));
            }
            artifacts.insert(
                r.image.artifact_id.clone(),
                ImageArtifact {
                    id: r.image.artifact_id.clone(),
                    media_type: r.media_type,
                    bytes,
                    width_px: r.width_px,
                    height_px: r.height_px,
                },
            );
            images.push(r.image);
        }
        let bundle = Bundle { manifest, story, metadata: meta.metadata, summary, questions, images, artifacts, embeddings, selection };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Checks every fragment invariant and recomputes segmentation and
    /// selection from the cached vectors.
    pub fn validate(&self) -> Result<(), BundleError> {
        let m = &self.manifest;
        let params = &m.parameters;
        if m.bundle_id != self.story.id {
            return Err(invalid("bundle id differs from story id"));
        }
        self.story.validate(Some(params.story_band)).map_err(|e| invalid(format!("story: {e}")))?;
        self.metadata.validate(self.story.sentences.len()).map_err(|e| invalid(format!("metadata: {e}")))?;
        if self.summary.story_id != self.story.id || !params.summary_band.contains(self.summary.word_count) {
            return Err(invalid("summary: wrong story or length"));
        }
        if self.questions.story_id != self.story.id {
            return Err(invalid("questions: wrong story"));
        }
        self.questions.validate().map_err(|e| invalid(format!("questions: {e}")))?;

        if self.images.len() != self.story.sentences.len() {
            return Err(invalid(format!("{} images for {} sentences", self.images.len(), self.story.sentences.len())));
        }
        for (i, im) in self.images.iter().enumerate() {
            let expected_ref = i.checked_sub(1).map(|p| self.images[p].artifact_id.as_str());
            if im.sentence_index != i || im.reference_artifact_id.as_deref() != expected_ref {
                return Err(invalid(format!("image {i} breaks the reference chain")));
            }
            if !self.artifacts.contains_key(&im.artifact_id) {
                return Err(invalid(format!("image {i} has no bytes")));
            }
        }

        let emb = &self.embeddings;
        if emb.dims != params.embedding_dims {
            return Err(invalid("embedding dims differ from manifest"));
        }
        for im in &self.images {
            let v = emb.images.get(&im.artifact_id).ok_or_else(|| invalid(format!("no vector for {}", im.artifact_id)))?;
            if v.dims() != emb.dims {
                return Err(invalid(format!("vector for {} has {} dims", im.artifact_id, v.dims())));
            }
        }

        let sel = &self.selection;
        if sel.token_budget != params.token_budget || sel.clip_weight != params.clip_weight {
            return Err(invalid("selection parameters differ from manifest"));
        }
        let segments = segment_for_summary(&self.story.sentences, params.segments, params.token_budget)
            .map_err(|e| invalid(format!("segments: {e}")))?;
        if segments != sel.segments {
            return Err(invalid("stored segments differ from recomputed segments"));
        }
        if emb.segments.len() != segments.len()
            || emb.segments.iter().zip(&segments).any(|(v, s)| v.segment_index != s.index || v.embed_text != s.embed_text)
        {
            return Err(invalid("segment vectors do not match segments"));
        }
        let seg_vecs: Vec<EmbeddingVector> = emb.segments.iter().map(|s| s.vector.clone()).collect();
        let recomputed = select_from_vectors(&segments, &seg_vecs, &self.images, &emb.images, params.clip_weight)
            .map_err(|e| invalid(format!("selection: {e}")))?;
        if recomputed != sel.selection {
            return Err(invalid("stored selection differs from recomputed selection"));
        }
        Ok(())
    }

    pub fn plan_story(&self) -> PlanStory {
        PlanStory {
            id: self.story.id.clone(),
            title: self.story.title.clone(),
            word_count: self.story.word_count,
            answer_key: self.questions.answer_key(),
        }
    }
}

fn to_json_plain<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceImageRef {
    pub sentence_index: usize,
    pub artifact_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryImageRef {
    pub segment_index: usize,
    pub first: usize,
    pub last: usize,
    pub sentence_index: usize,
    pub artifact_id: String,
}

/// What the reading client needs to render one condition. Absent panes are
/// omitted from the JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPayload {
    pub bundle_id: String,
    pub condition: ReadingCondition,
    pub condition_label: String,
    pub title: String,
    pub text: String,
    pub word_count: usize,
    pub time_limit_seconds: u64,
    pub sentences: Vec<Sentence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentence_images: Option<Vec<SentenceImageRef>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_images: Option<Vec<SummaryImageRef>>,
}

pub fn condition_payload(bundle: &Bundle, condition: ReadingCondition) -> ConditionPayload {
    let story = &bundle.story;
    let mut p = ConditionPayload {
        bundle_id: bundle.id().to_string(),
        condition,
        condition_label: condition.label().to_string(),
        title: story.title.clone(),
        text: story.body.clone(),
        word_count: story.word_count,
        // Summary conditions are timed by the story, not the summary.
        time_limit_seconds: reading_time_limit(story.word_count),
        sentences: story.sentences.clone(),
        sentence_images: None,
        summary: None,
        summary_images: None,
    };
    match condition {
        ReadingCondition::C1 => {}
        ReadingCondition::C2 => {
            p.sentence_images = Some(
                bundle
                    .images
                    .iter()
                    .map(|im| SentenceImageRef { sentence_index: im.sentence_index, artifact_id: im.artifact_id.clone() })
                    .collect(),
            )
        }
        ReadingCondition::C3 => p.summary = Some(bundle.summary.text.clone()),
        ReadingCondition::C4 => {
            p.summary_images = Some(
                bundle
                    .selection
                    .selection
                    .entries
                    .iter()
                    .map(|e| SummaryImageRef {
                        segment_index: e.segment_index,
                        first: e.first,
                        last: e.last,
                        sentence_index: e.sentence_index,
                        artifact_id: e.artifact_id.clone(),
                    })
                    .collect(),
            )
        }
    }
    p
}

pub struct BuildProviders<'a> {
    pub text: &'a dyn TextProvider,
    pub image: &'a dyn ImageProvider,
    pub embed: &'a dyn EmbeddingProvider,
}

pub struct BuildOptions {
    pub preferences: PreferenceSpec,
    pub config: Config,
    pub seed: u64,
    pub mock: bool,
    /// RFC 3339 creation time recorded in the manifest.
    pub created_at: String,
}

/// Runs the full pipeline: story, summary, metadata, questions, one image
/// per sentence, embeddings, and summary image selection. Errors name the
/// failing stage.
pub fn build_bundle(providers: &BuildProviders<'_>, opts: &BuildOptions) -> Result<Bundle, BundleError> {
    let cfg = &opts.config;
    let policy = RetryPolicy { retries: cfg.content.retries, seed: opts.seed };
    let content_err = |stage| move |source| BundleError::Content { stage, source };
    let image_err = |stage| move |source| BundleError::Image { stage, source };

    log::info!("generating story");
    let story = content::generate_story(&opts.preferences, cfg.content.story_band(), policy, providers.text)
        .map_err(content_err("story"))?;
    log::info!("story {} has {} words, {} sentences", story.id, story.word_count, story.sentences.len());
    let summary = content::generate_summary(&story, cfg.content.summary_band(), policy, providers.text)
        .map_err(content_err("summary"))?;
    let metadata = content::extract_story_metadata(&story, policy, providers.text).map_err(content_err("metadata"))?;
    let questions = content::generate_questions(&story, policy, providers.text).map_err(content_err("questions"))?;

    log::info!("rendering {} images", story.sentences.len());
    let store = ArtifactStore::new();
    let mut images = Vec::new();
    images::generate_story_images(&story, &metadata, &summary, providers.image, &store, opts.seed, &mut images)
        .map_err(image_err("images"))?;
    let pairs: Vec<(String, ImageArtifact)> = images
        .iter()
        .map(|im| (im.artifact_id.clone(), store.get(&im.artifact_id).expect("stored by generate_story_images")))
        .collect();

    log::info!("embedding images and segments");
    let image_vectors = embed_images(&pairs, providers.embed).map_err(image_err("embeddings"))?;
    let segments = segment_for_summary(&story.sentences, SUMMARY_SEGMENTS, cfg.images.token_budget)
        .map_err(image_err("segmentation"))?;
    let seg_vecs = embed_segments(&segments, providers.embed).map_err(image_err("embeddings"))?;
    let selection = select_from_vectors(&segments, &seg_vecs, &images, &image_vectors, cfg.images.clip_weight)
        .map_err(image_err("selection"))?;

    let fragments = [
        ("story", STORY_FILE),
        ("metadata", METADATA_FILE),
        ("summary", SUMMARY_FILE),
        ("questions", QUESTIONS_FILE),
        ("images", IMAGES_FILE),
        ("embeddings", EMBEDDINGS_FILE),
        ("selection", SELECTION_FILE),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let manifest = BundleManifest {
        schema_version: SCHEMA_VERSION,
        bundle_id: story.id.clone(),
        title: story.title.clone(),
        created_at: opts.created_at.clone(),
        fragments,
        files: BTreeMap::new(),
        providers: ProviderProvenance {
            text_model: providers.text.model_name().to_string(),
            image_model: providers.image.model_name().to_string(),
            embed_model: providers.embed.model_name().to_string(),
            seed: opts.seed,
            mock: opts.mock,
        },
        parameters: BundleParameters {
            story_band: cfg.content.story_band(),
            summary_band: cfg.content.summary_band(),
            clip_weight: cfg.images.clip_weight,
            token_budget: cfg.images.token_budget,
            segments: SUMMARY_SEGMENTS,
            embedding_dims: providers.embed.dims(),
            preferences: opts.preferences.clone(),
        },
    };
    let bundle = Bundle {
        manifest,
        embeddings: BundleEmbeddings {
            model: providers.embed.model_name().to_string(),
            dims: providers.embed.dims(),
            images: image_vectors,
            segments: segments
                .iter()
                .zip(seg_vecs)
                .map(|(s, v)| SegmentVector { segment_index: s.index, embed_text: s.embed_text.clone(), vector: v })
                .collect(),
        },
        selection: BundleSelection {
            clip_weight: cfg.images.clip_weight,
            token_budget: cfg.images.token_budget,
            segments,
            selection,
        },
        artifacts: pairs.into_iter().collect(),
        story,
        metadata,
        summary,
        questions,
        images,
    };
    bundle.validate()?;
    Ok(bundle)
}
