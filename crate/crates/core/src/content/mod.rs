//! Story, metadata, summary and question generation.
//!
//! Every generator wraps a single provider call in a validate-and-retry
//! loop: output failing its length band or schema is re-requested up to
//! `retries` more times with a fresh seed. Provider transport failures are
//! returned immediately.

mod questions;
mod segment;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use questions::{
    parse_questions, Question, QuestionFocus, QuestionFormat, QuestionSet, MIN_FOCUS_CATEGORIES,
    OPTIONS_PER_QUESTION, QUESTIONS_PER_SET,
};
pub use segment::{segment_sentences, Sentence};

use crate::providers::{self, ProviderError, TextGenRequest, TextProvider, TextTask};
use crate::textutil::{content_hash, word_count};

pub const DEFAULT_RETRIES: usize = 3;
pub const MIN_STORY_WORDS: u32 = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContentError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what}: constraint unsatisfied after {attempts} attempts (last problem: {last})")]
    ConstraintUnsatisfied { what: &'static str, attempts: usize, last: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceSpec {
    pub genre: Option<String>,
    pub animal: Option<String>,
    pub favorite_title: Option<String>,
}

impl PreferenceSpec {
    /// Preference clauses in `key: value.` form.
    pub fn clauses(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(a) = self.animal.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push(format!("Main character animal: {}.", a.trim()));
        }
        if let Some(g) = self.genre.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push(format!("Genre: {}.", g.trim()));
        }
        if let Some(t) = self.favorite_title.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push(format!("Favorite story: {}.", t.trim()));
        }
        out
    }
}

/// Target word count with a symmetric relative tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthBand {
    pub target: u32,
    pub tolerance: f64,
}

impl LengthBand {
    pub const STORY: LengthBand = LengthBand { target: 500, tolerance: 0.2 };
    pub const SUMMARY: LengthBand = LengthBand { target: 50, tolerance: 0.3 };

    pub fn new(target: u32, tolerance: f64) -> Result<Self, ContentError> {
        if target == 0 {
            return Err(ContentError::InvalidArgument("target word count must be positive".into()));
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(ContentError::InvalidArgument(format!("tolerance {tolerance} not in (0, 1)")));
        }
        Ok(Self { target, tolerance })
    }

    pub fn contains(&self, words: usize) -> bool {
        (words as f64 - self.target as f64).abs() <= self.tolerance * self.target as f64 + 1e-9
    }

    pub fn min_words(&self) -> u32 {
        (self.target as f64 * (1.0 - self.tolerance) - 1e-9).ceil() as u32
    }

    pub fn max_words(&self) -> u32 {
        (self.target as f64 * (1.0 + self.tolerance) + 1e-9).floor() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: usize,
    pub seed: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: DEFAULT_RETRIES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    pub title: String,
    pub body: String,
    pub sentences: Vec<Sentence>,
    pub word_count: usize,
}

impl Story {
    pub fn new(title: impl Into<String>, body: impl Into<String>) -> Self {
        let title = title.into();
        let body = body.into();
        let id = format!("story-{}", &content_hash(&[title.as_bytes(), body.as_bytes()])[..12]);
        let sentences = segment_sentences(&body);
        let word_count = word_count(&body);
        Self { id, title, body, sentences, word_count }
    }

    /// Structural invariants; `band` additionally checks the length.
    pub fn validate(&self, band: Option<LengthBand>) -> Result<(), String> {
        let mut pos = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index != i || s.start != pos || s.end <= s.start || s.end > self.body.len() {
                return Err(format!("sentence {i} does not tile the body"));
            }
            if self.body.get(s.start..s.end).map(str::trim) != Some(s.text.as_str()) {
                return Err(format!("sentence {i} text does not match its span"));
            }
            pos = s.end;
        }
        if pos != self.body.len() {
            return Err("sentences do not cover the body".into());
        }
        if self.word_count != word_count(&self.body) {
            return Err("word_count does not match body".into());
        }
        if let Some(b) = band {
            if !b.contains(self.word_count) {
                return Err(format!("{} words outside {}..={}", self.word_count, b.min_words(), b.max_words()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub name: String,
    pub descriptor: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryMetadata {
    pub characters: Vec<Character>,
    pub style_descriptors: Vec<String>,
    pub per_sentence_entities: BTreeMap<usize, Vec<String>>,
    #[serde(default)]
    pub incidental: Vec<String>,
}

impl StoryMetadata {
    pub fn validate(&self, sentence_count: usize) -> Result<(), String> {
        let known: BTreeSet<&str> = self
            .characters
            .iter()
            .map(|c| c.name.as_str())
            .chain(self.incidental.iter().map(String::as_str))
            .collect();
        for (idx, names) in &self.per_sentence_entities {
            if *idx >= sentence_count {
                return Err(format!("entity list for sentence {idx}, story has {sentence_count}"));
            }
            if let Some(n) = names.iter().find(|n| !known.contains(n.as_str())) {
                return Err(format!("entity {n} is neither a character nor incidental"));
            }
        }
        Ok(())
    }

    /// `"Luna (rabbit)"` style descriptors for image prompts.
    pub fn character_descriptions(&self) -> Vec<String> {
        self.characters.iter().map(|c| format!("{} ({})", c.name, c.descriptor)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub story_id: String,
    pub text: String,
    pub word_count: usize,
}

/// Runs `attempt` up to `1 + retries` times with seeds `seed, seed+1, ...`.
/// `Ok(Err(reason))` from `attempt` means "output rejected, try again".
fn with_retries<T>(
    what: &'static str,
    policy: RetryPolicy,
    mut attempt: impl FnMut(u64) -> Result<Result<T, String>, ProviderError>,
) -> Result<T, ContentError> {
    let attempts = policy.retries + 1;
    let mut last = String::new();
    for n in 0..attempts {
        match attempt(policy.seed.wrapping_add(n as u64)) {
            Ok(Ok(v)) => return Ok(v),
            Ok(Err(reason)) => last = reason,
            Err(ProviderError::EmptyResponse) => last = "empty response".into(),
            Err(ProviderError::MalformedResponse(m)) => last = m,
            Err(e) => return Err(e.into()),
        }
        log::debug!("{what}: attempt {} rejected: {last}", n + 1);
    }
    Err(ContentError::ConstraintUnsatisfied { what, attempts, last })
}

fn split_title(raw: &str) -> (String, String) {
    let trimmed = raw.trim();
    let mut lines = trimmed.splitn(2, '\n');
    let first = lines.next().unwrap_or("").trim();
    let lower = first.to_ascii_lowercase();
    if lower.starts_with("title:") {
        let title = first[6..].trim().trim_matches(|c| c == '"' || c == '*').to_string();
        let body = lines.next().unwrap_or("").trim().to_string();
        (title, body)
    } else {
        ("Untitled".to_string(), trimmed.to_string())
    }
}

pub fn story_request(prefs: &PreferenceSpec, band: LengthBand) -> TextGenRequest {
    let mut req = TextGenRequest::new(
        TextTask::Story,
        "Write a short story in English for a reading-comprehension study. Put the title on the first line as \
         'Title: <title>', then the story as plain paragraphs.",
        band.max_words(),
    );
    req.constraints = vec![
        format!(
            "The story must be approximately {} words long, between {} and {} words.",
            band.target,
            band.min_words(),
            band.max_words()
        ),
        "The story must be completely original and must not exist anywhere in any form.".into(),
        "Use plain prose without headings, lists or dialogue scripts.".into(),
    ];
    req.preferences = prefs.clauses();
    req.target_words = Some(band.target);
    req
}

pub fn generate_story(
    prefs: &PreferenceSpec,
    band: LengthBand,
    policy: RetryPolicy,
    provider: &dyn TextProvider,
) -> Result<Story, ContentError> {
    if band.target < MIN_STORY_WORDS {
        return Err(ContentError::InvalidArgument(format!("story target must be at least {MIN_STORY_WORDS} words")));
    }
    LengthBand::new(band.target, band.tolerance)?;
    let base = story_request(prefs, band);
    with_retries("story", policy, |seed| {
        let mut req = base.clone();
        req.seed = Some(seed);
        let raw = providers::generate_text(provider, &req)?;
        let (title, body) = split_title(&raw);
        let story = Story::new(title, body);
        Ok(story.validate(Some(band)).map(|_| story))
    })
}

pub fn generate_summary(
    story: &Story,
    band: LengthBand,
    policy: RetryPolicy,
    provider: &dyn TextProvider,
) -> Result<Summary, ContentError> {
    LengthBand::new(band.target, band.tolerance)?;
    let mut base = TextGenRequest::new(
        TextTask::Summary,
        "Summarize the story in the source section as a single short paragraph.",
        band.max_words(),
    );
    base.constraints = vec![
        format!(
            "The summary must be approximately {} words long, between {} and {} words.",
            band.target,
            band.min_words(),
            band.max_words()
        ),
        "Mention only characters and events that occur in the story.".into(),
    ];
    base.context = Some(story.body.clone());
    base.target_words = Some(band.target);
    with_retries("summary", policy, |seed| {
        let mut req = base.clone();
        req.seed = Some(seed);
        let text = providers::generate_text(provider, &req)?.trim().to_string();
        let wc = word_count(&text);
        if !band.contains(wc) {
            return Ok(Err(format!("{wc} words outside {}..={}", band.min_words(), band.max_words())));
        }
        Ok(Ok(Summary { story_id: story.id.clone(), text, word_count: wc }))
    })
}

/// Character, style and per-sentence entity extraction, answered by the text
/// provider as JSON. Entities the provider does not attribute to a character
/// are flagged incidental.
pub fn extract_story_metadata(
    story: &Story,
    policy: RetryPolicy,
    provider: &dyn TextProvider,
) -> Result<StoryMetadata, ContentError> {
    let mut base = TextGenRequest::new(
        TextTask::Metadata,
        "Analyze the grammatical structure of the story in the source section. List its characters with a short \
         descriptor (species or role), visual style descriptors suitable for illustrating it, and the named entities \
         of each sentence (sentences numbered from 0). Respond with JSON only: {\"characters\": [{\"name\", \
         \"descriptor\"}], \"style_descriptors\": [..], \"per_sentence_entities\": {\"0\": [..]}, \"incidental\": [..]}.",
        400,
    );
    base.context = Some(story.body.clone());
    with_retries("metadata", policy, |seed| {
        let mut req = base.clone();
        req.seed = Some(seed);
        let raw = providers::generate_text(provider, &req)?;
        let Some(json) = questions::outer_json_object(&raw) else {
            return Ok(Err("no JSON object in response".into()));
        };
        let mut meta: StoryMetadata = match serde_json::from_str(json) {
            Ok(m) => m,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let mut incidental: BTreeSet<String> = meta.incidental.iter().cloned().collect();
        let names: BTreeSet<String> = meta.characters.iter().map(|c| c.name.clone()).collect();
        for ents in meta.per_sentence_entities.values() {
            incidental.extend(ents.iter().filter(|e| !names.contains(*e)).cloned());
        }
        meta.incidental = incidental.into_iter().collect();
        Ok(meta.validate(story.sentences.len()).map(|_| meta))
    })
}

pub fn generate_questions(
    story: &Story,
    policy: RetryPolicy,
    provider: &dyn TextProvider,
) -> Result<QuestionSet, ContentError> {
    let mut base = TextGenRequest::new(
        TextTask::Questions,
        "Write ten multiple-choice reading-comprehension questions about the story in the source section.",
        1500,
    );
    base.constraints = vec![
        "Each question has exactly four distinct options and exactly one correct option.".into(),
        "Cover at least three focus areas among numeric details, proper nouns, narrative comprehension and synthesis."
            .into(),
        "Respond with JSON only: {\"questions\": [{\"index\": 1..10, \"stem\", \"options\": [4 strings], \
         \"correct_option\": 0..3, \"focus\": \"numeric\"|\"proper_noun\"|\"comprehension\"|\"synthesis\", \
         \"format\": \"multiple_choice\"}]}."
            .into(),
    ];
    base.context = Some(story.body.clone());
    with_retries("questions", policy, |seed| {
        let mut req = base.clone();
        req.seed = Some(seed);
        let raw = providers::generate_text(provider, &req)?;
        Ok(parse_questions(&story.id, &raw))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::{MockTextProvider, ScriptedTextProvider};

    fn story(seed: u64) -> Story {
        generate_story(
            &PreferenceSpec { animal: Some("fox".into()), ..Default::default() },
            LengthBand::STORY,
            RetryPolicy { retries: 3, seed },
            &MockTextProvider::new(42),
        )
        .unwrap()
    }

    #[test]
    fn story_within_band_and_deterministic() {
        let a = story(1);
        let b = story(1);
        assert_eq!(a, b);
        assert!((400..=600).contains(&a.word_count));
        a.validate(Some(LengthBand::STORY)).unwrap();
        assert!(a.title != "Untitled");
    }

    #[test]
    fn story_request_carries_originality_clause() {
        let req = story_request(&PreferenceSpec::default(), LengthBand::STORY);
        assert!(req.constraints.iter().any(|c| c.contains("completely original")));
        assert_eq!(req.max_output_words, 600);
    }

    #[test]
    fn ten_word_story_fails_after_retries() {
        let p = ScriptedTextProvider::new(["Title: Short\n\none two three four five six seven eight nine ten"]);
        let err = generate_story(&PreferenceSpec::default(), LengthBand::STORY, RetryPolicy::default(), &p).unwrap_err();
        assert!(matches!(err, ContentError::ConstraintUnsatisfied { attempts: 4, .. }), "{err}");
        assert_eq!(p.calls(), 4);
    }

    #[test]
    fn small_targets_rejected() {
        let band = LengthBand { target: 20, tolerance: 0.2 };
        let p = MockTextProvider::new(0);
        assert!(matches!(
            generate_story(&PreferenceSpec::default(), band, RetryPolicy::default(), &p),
            Err(ContentError::InvalidArgument(_))
        ));
        let band = LengthBand { target: 500, tolerance: 1.0 };
        assert!(generate_story(&PreferenceSpec::default(), band, RetryPolicy::default(), &p).is_err());
    }

    #[test]
    fn band_bounds() {
        assert_eq!((LengthBand::STORY.min_words(), LengthBand::STORY.max_words()), (400, 600));
        assert_eq!((LengthBand::SUMMARY.min_words(), LengthBand::SUMMARY.max_words()), (35, 65));
        assert!(LengthBand::SUMMARY.contains(35) && !LengthBand::SUMMARY.contains(34));
    }

    #[test]
    fn summary_in_band() {
        let s = story(2);
        let sum = generate_summary(&s, LengthBand::SUMMARY, RetryPolicy::default(), &MockTextProvider::new(42)).unwrap();
        assert!((35..=65).contains(&sum.word_count));
        assert_eq!(sum.story_id, s.id);
    }

    #[test]
    fn unsatisfiable_summary() {
        let s = story(2);
        let p = ScriptedTextProvider::new(["far too short"]);
        let err = generate_summary(&s, LengthBand::SUMMARY, RetryPolicy::default(), &p).unwrap_err();
        assert!(matches!(err, ContentError::ConstraintUnsatisfied { what: "summary", .. }));
    }

    #[test]
    fn questions_from_mock_are_valid() {
        let s = story(3);
        let qs = generate_questions(&s, RetryPolicy::default(), &MockTextProvider::new(42)).unwrap();
        qs.validate().unwrap();
        assert_eq!(qs.questions.len(), 10);
        assert!(qs.questions.iter().all(|q| q.options.len() == 4));
    }

    #[test]
    fn duplicate_option_response_is_retried() {
        let s = story(3);
        let good = MockTextProvider::new(42)
            .generate_text(&{
                let mut r = TextGenRequest::new(TextTask::Questions, "q", 1500);
                r.context = Some(s.body.clone());
                r
            })
            .unwrap();
        let mut bad: serde_json::Value = serde_json::from_str(&good).unwrap();
        bad["questions"][0]["options"][1] = bad["questions"][0]["options"][0].clone();
        let p = ScriptedTextProvider::new([bad.to_string(), good]);
        let qs = generate_questions(&s, RetryPolicy::default(), &p).unwrap();
        assert_eq!(p.calls(), 2);
        qs.validate().unwrap();
    }

    #[test]
    fn metadata_flags_unknown_entities_incidental() {
        let s = Story::new("T", "Luna the rabbit ran. She saw Bob.");
        let p = ScriptedTextProvider::new([
            r#"{"characters":[{"name":"Luna","descriptor":"rabbit"}],"style_descriptors":[],"per_sentence_entities":{"0":["Luna"],"1":["Bob"]}}"#,
        ]);
        let m = extract_story_metadata(&s, RetryPolicy::default(), &p).unwrap();
        assert_eq!(m.incidental, vec!["Bob".to_string()]);
    }

    #[test]
    fn metadata_without_entities() {
        let s = Story::new("T", "the wind blew. rain fell on the quiet hills.");
        let m = extract_story_metadata(&s, RetryPolicy::default(), &MockTextProvider::new(1)).unwrap();
        assert!(m.characters.is_empty());
    }
}
