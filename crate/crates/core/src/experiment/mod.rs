//! Counterbalanced reading sessions: group assignment, timers, the
//! distraction task, post-test scoring and the session event log.

mod assignment;
mod distraction;
mod service;
mod session;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::{build_group_assignments, GroupAssignment, GROUP_COUNT, STORIES_PER_SESSION};
pub use distraction::{generate_distraction_problems, DistractionProblem, Operator, OPERAND_MAX, OPERAND_MIN};
pub use service::{Clock, ExperimentService, ManualClock, SystemClock, GAZE_ATTACHMENT, PLAN_ATTACHMENT};
pub use session::{
    advance_session, replay, replay_state, LoggedEvent, Phase, PhaseStamp, SessionEvent, SessionLog, SessionState,
    SlotLog, SlotRecord,
};
pub use store::{check_session_id, parse_event_log, EventStore, FileEventStore, MemoryEventStore, EVENTS_FILE};

use crate::content::QUESTIONS_PER_SET;

pub const READING_WPM: u64 = 250;
pub const DISTRACTION_SECONDS: u64 = 60;
pub const DEFAULT_DISTRACTION_PROBLEMS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("story ids must be distinct")]
    DuplicateStoryIds,
    #[error("fixed story {0} is not among the session stories")]
    FixedStoryNotFound(String),
    #[error("a session needs exactly 4 stories, got {0}")]
    WrongStoryCount(usize),
    #[error("event {event} is not legal in phase {phase}")]
    IllegalTransition { phase: String, event: String },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("expected {expected} answers, got {got}")]
    AnswerCountMismatch { expected: usize, got: usize },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown group {0}")]
    UnknownGroup(u8),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReadingCondition {
    C1,
    C2,
    C3,
    C4,
}

impl ReadingCondition {
    pub const ALL: [ReadingCondition; 4] =
        [ReadingCondition::C1, ReadingCondition::C2, ReadingCondition::C3, ReadingCondition::C4];

    pub fn label(self) -> &'static str {
        match self {
            ReadingCondition::C1 => "Baseline",
            ReadingCondition::C2 => "IGenAI Image",
            ReadingCondition::C3 => "TGenAI Summary",
            ReadingCondition::C4 => "IGenAI Summary",
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ReadingCondition::C1 => "C1",
            ReadingCondition::C2 => "C2",
            ReadingCondition::C3 => "C3",
            ReadingCondition::C4 => "C4",
        }
    }
}

impl fmt::Display for ReadingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ReadingCondition {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ExperimentError::InvalidArgument(format!("unknown reading condition {s:?}")))
    }
}

/// Reading deadline in whole seconds at 250 words per minute, rounded up.
/// Summary conditions pass the full story's word count.
pub fn reading_time_limit(word_count: usize) -> u64 {
    (word_count as u64 * 60).div_ceil(READING_WPM)
}

/// Number of answers matching the key. Both must hold exactly ten entries.
pub fn score_post_test(answers: &[u8], answer_key: &[u8]) -> Result<u8, ExperimentError> {
    for got in [answers.len(), answer_key.len()] {
        if got != QUESTIONS_PER_SET {
            return Err(ExperimentError::AnswerCountMismatch { expected: QUESTIONS_PER_SET, got });
        }
    }
    Ok(answers.iter().zip(answer_key).filter(|(a, k)| a == k).count() as u8)
}

/// What a session needs to know about one story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStory {
    pub id: String,
    pub title: String,
    pub word_count: usize,
    pub answer_key: Vec<u8>,
}

/// The four stories of a study and their six group assignments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub stories: Vec<PlanStory>,
    pub fixed_story_id: String,
    pub assignments: Vec<GroupAssignment>,
    pub distraction_problem_count: usize,
}

impl ExperimentPlan {
    pub fn new(stories: Vec<PlanStory>, fixed_story_id: &str) -> Result<Self, ExperimentError> {
        let ids: Vec<String> = stories.iter().map(|s| s.id.clone()).collect();
        let assignments = build_group_assignments(&ids, fixed_story_id)?;
        for s in &stories {
            if s.word_count == 0 {
                return Err(ExperimentError::InvalidArgument(format!("story {} has no words", s.id)));
            }
            if s.answer_key.len() != QUESTIONS_PER_SET {
                return Err(ExperimentError::AnswerCountMismatch { expected: QUESTIONS_PER_SET, got: s.answer_key.len() });
            }
        }
        Ok(Self {
            stories,
            fixed_story_id: fixed_story_id.to_string(),
            assignments,
            distraction_problem_count: DEFAULT_DISTRACTION_PROBLEMS,
        })
    }

    pub fn group(&self, group_id: u8) -> Option<&GroupAssignment> {
        self.assignments.iter().find(|g| g.group_id == group_id)
    }

    /// Position of the story in `stories` and its record.
    pub fn story(&self, id: &str) -> Option<(usize, &PlanStory)> {
        self.stories.iter().enumerate().find(|(_, s)| s.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_limits() {
        assert_eq!(reading_time_limit(500), 120);
        assert_eq!(reading_time_limit(1), 1);
        assert_eq!(reading_time_limit(625), 150);
        assert_eq!(reading_time_limit(251), 61);
    }

    #[test]
    fn scoring() {
        let key = vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1];
        assert_eq!(score_post_test(&key, &key), Ok(10));
        let wrong: Vec<u8> = key.iter().map(|k| (k + 1) % 4).collect();
        assert_eq!(score_post_test(&wrong, &key), Ok(0));
        assert_eq!(
            score_post_test(&key[..9], &key),
            Err(ExperimentError::AnswerCountMismatch { expected: 10, got: 9 })
        );
    }

    #[test]
    fn condition_codes() {
        assert_eq!("c3".parse::<ReadingCondition>().unwrap(), ReadingCondition::C3);
        assert!("C5".parse::<ReadingCondition>().is_err());
        assert_eq!(serde_json::to_string(&ReadingCondition::C2).unwrap(), "\"C2\"");
    }
}
