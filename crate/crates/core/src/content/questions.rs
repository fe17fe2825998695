use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const QUESTIONS_PER_SET: usize = 10;
pub const OPTIONS_PER_QUESTION: usize = 4;
pub const MIN_FOCUS_CATEGORIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFocus {
    Numeric,
    ProperNoun,
    Comprehension,
    Synthesis,
}

/// Only multiple choice is generated; the other formats are accepted in the
/// interchange form so that provider output using them is rejected by
/// validation rather than by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFormat {
    #[default]
    MultipleChoice,
    OpenEnded,
    FillInTheBlank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub index: u8,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_option: u8,
    pub focus: QuestionFocus,
    #[serde(default)]
    pub format: QuestionFormat,
}

impl Question {
    pub fn validate(&self) -> Result<(), String> {
        if self.format != QuestionFormat::MultipleChoice {
            return Err(format!("question {} is not multiple choice", self.index));
        }
        if self.stem.trim().is_empty() {
            return Err(format!("question {} has an empty stem", self.index));
        }
        if self.options.len() != OPTIONS_PER_QUESTION {
            return Err(format!("question {} has {} options", self.index, self.options.len()));
        }
        let distinct: BTreeSet<String> = self.options.iter().map(|o| o.trim().to_lowercase()).collect();
        if distinct.len() != self.options.len() || self.options.iter().any(|o| o.trim().is_empty()) {
            return Err(format!("question {} has duplicate or empty options", self.index));
        }
        if usize::from(self.correct_option) >= OPTIONS_PER_QUESTION {
            return Err(format!("question {} correct_option {} out of range", self.index, self.correct_option));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub story_id: String,
    pub questions: Vec<Question>,
}

impl QuestionSet {
    pub fn validate(&self) -> Result<(), String> {
        if self.questions.len() != QUESTIONS_PER_SET {
            return Err(format!("expected {QUESTIONS_PER_SET} questions, got {}", self.questions.len()));
        }
        let indices: BTreeSet<u8> = self.questions.iter().map(|q| q.index).collect();
        let expected: BTreeSet<u8> = (1..=QUESTIONS_PER_SET as u8).collect();
        if indices != expected {
            return Err("question indices must be 1..10, each exactly once".into());
        }
        for q in &self.questions {
            q.validate()?;
        }
        let foci: BTreeSet<QuestionFocus> = self.questions.iter().map(|q| q.focus).collect();
        if foci.len() < MIN_FOCUS_CATEGORIES {
            return Err(format!("questions span {} focus categories, need {MIN_FOCUS_CATEGORIES}", foci.len()));
        }
        Ok(())
    }

    /// Correct option per question, ordered by question index.
    pub fn answer_key(&self) -> Vec<u8> {
        let mut qs: Vec<&Question> = self.questions.iter().collect();
        qs.sort_by_key(|q| q.index);
        qs.into_iter().map(|q| q.correct_option).collect()
    }
}

#[derive(Deserialize)]
struct Interchange {
    questions: Vec<Question>,
}

/// Parses the `{"questions": [...]}` interchange form. Surrounding prose or
/// code fences are tolerated; the outermost JSON object is used.
pub fn parse_questions(story_id: &str, raw: &str) -> Result<QuestionSet, String> {
    let json = outer_json_object(raw).ok_or("no JSON object in response")?;
    let parsed: Interchange = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let mut questions = parsed.questions;
    questions.sort_by_key(|q| q.index);
    let set = QuestionSet { story_id: story_id.to_string(), questions };
    set.validate()?;
    Ok(set)
}

pub(crate) fn outer_json_object(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    (end > start).then(|| &raw[start..=end])
}
