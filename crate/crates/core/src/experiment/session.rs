//! Participant session state machine and its log projection.
//!
//! Phase order: consent, pre-survey, calibration, group selection, then four
//! rounds of reading, distraction and post-test, then the post-survey.
//! Reading and distraction end only on their server-side deadline; the
//! transition is stamped at the deadline itself, so phase durations are
//! exact regardless of when the deadline event is observed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::distraction::{generate_distraction_problems, DistractionProblem};
use super::{reading_time_limit, score_post_test, ExperimentError, ExperimentPlan, ReadingCondition, DISTRACTION_SECONDS};
use crate::textutil::stable_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "slot", rename_all = "snake_case")]
pub enum Phase {
    Consent,
    PreSurvey,
    Calibration,
    GroupSelect,
    Reading(u8),
    Distraction(u8),
    PostTest(u8),
    PostSurvey,
    Done,
}

impl Phase {
    pub fn label(&self) -> String {
        match self {
            Phase::Consent => "consent".into(),
            Phase::PreSurvey => "pre_survey".into(),
            Phase::Calibration => "calibration".into(),
            Phase::GroupSelect => "group_select".into(),
            Phase::Reading(k) => format!("reading({k})"),
            Phase::Distraction(k) => format!("distraction({k})"),
            Phase::PostTest(k) => format!("post_test({k})"),
            Phase::PostSurvey => "post_survey".into(),
            Phase::Done => "done".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Created,
    ConsentGiven,
    PreSurveySubmitted { answers: BTreeMap<String, String> },
    CalibrationCompleted,
    GroupSelected { group_id: u8 },
    ReadingDeadlineElapsed,
    DistractionAnswered { problem: usize, answer: i64 },
    DistractionElapsed,
    QuestionAnswered { question: u8, option: u8 },
    PostTestSubmitted { answers: Vec<u8> },
    PostSurveySubmitted { answers: BTreeMap<String, String> },
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::Created => "created",
            SessionEvent::ConsentGiven => "consent_given",
            SessionEvent::PreSurveySubmitted { .. } => "pre_survey_submitted",
            SessionEvent::CalibrationCompleted => "calibration_completed",
            SessionEvent::GroupSelected { .. } => "group_selected",
            SessionEvent::ReadingDeadlineElapsed => "reading_deadline_elapsed",
            SessionEvent::DistractionAnswered { .. } => "distraction_answered",
            SessionEvent::DistractionElapsed => "distraction_elapsed",
            SessionEvent::QuestionAnswered { .. } => "question_answered",
            SessionEvent::PostTestSubmitted { .. } => "post_test_submitted",
            SessionEvent::PostSurveySubmitted { .. } => "post_survey_submitted",
        }
    }
}

/// Per-slot progress and metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u8,
    pub condition: ReadingCondition,
    pub story_id: String,
    pub story_index: usize,
    pub time_limit_seconds: u64,
    pub reading_started_ms: Option<u64>,
    pub reading_ended_ms: Option<u64>,
    pub post_test_started_ms: Option<u64>,
    pub post_test_ended_ms: Option<u64>,
    pub distraction_seed: u64,
    pub distraction_answered: BTreeSet<usize>,
    pub distraction_score: u32,
    pub draft_answers: BTreeMap<u8, u8>,
    pub answers: Option<Vec<u8>>,
    pub correct_answers: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStamp {
    pub phase: Phase,
    pub entered_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub group_id: Option<u8>,
    pub phase: Phase,
    pub phase_entered_ms: u64,
    /// Fixed on entry to a timed phase; never moved afterwards.
    pub deadline_ms: Option<u64>,
    pub history: Vec<PhaseStamp>,
    pub slots: Vec<SlotRecord>,
    pub pre_survey: BTreeMap<String, String>,
    pub post_survey: BTreeMap<String, String>,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, created_ms: u64) -> Self {
        Self {
            session_id: session_id.into(),
            group_id: None,
            phase: Phase::Consent,
            phase_entered_ms: created_ms,
            deadline_ms: None,
            history: vec![PhaseStamp { phase: Phase::Consent, entered_ms: created_ms }],
            slots: Vec::new(),
            pre_survey: BTreeMap::new(),
            post_survey: BTreeMap::new(),
        }
    }

    pub fn current_slot(&self) -> Option<&SlotRecord> {
        match self.phase {
            Phase::Reading(k) | Phase::Distraction(k) | Phase::PostTest(k) => self.slots.get(usize::from(k) - 1),
            _ => None,
        }
    }

    /// Problems for the current distraction phase, if in one.
    pub fn distraction_problems(&self, plan: &ExperimentPlan) -> Option<Vec<DistractionProblem>> {
        match self.phase {
            Phase::Distraction(_) => {
                let slot = self.current_slot()?;
                generate_distraction_problems(slot.distraction_seed, plan.distraction_problem_count).ok()
            }
            _ => None,
        }
    }

    /// The deadline event that is due at `now_ms`, if any.
    pub fn due_auto_event(&self, now_ms: u64) -> Option<(SessionEvent, u64)> {
        let deadline = self.deadline_ms?;
        if now_ms < deadline {
            return None;
        }
        match self.phase {
            Phase::Reading(_) => Some((SessionEvent::ReadingDeadlineElapsed, deadline)),
            Phase::Distraction(_) => Some((SessionEvent::DistractionElapsed, deadline)),
            _ => None,
        }
    }

    fn enter(&mut self, phase: Phase, at_ms: u64, deadline_ms: Option<u64>) {
        self.phase = phase;
        self.phase_entered_ms = at_ms;
        self.deadline_ms = deadline_ms;
        self.history.push(PhaseStamp { phase, entered_ms: at_ms });
    }

    fn slot_mut(&mut self, k: u8) -> &mut SlotRecord {
        &mut self.slots[usize::from(k) - 1]
    }

    fn enter_reading(&mut self, k: u8, at_ms: u64) {
        let limit = self.slots[usize::from(k) - 1].time_limit_seconds;
        self.slot_mut(k).reading_started_ms = Some(at_ms);
        self.enter(Phase::Reading(k), at_ms, Some(at_ms + limit * 1000));
    }
}

fn illegal(state: &SessionState, event: &SessionEvent) -> ExperimentError {
    ExperimentError::IllegalTransition { phase: state.phase.label(), event: event.name().to_string() }
}

/// Applies one event at server time `at_ms`, returning the next state.
pub fn advance_session(
    plan: &ExperimentPlan,
    state: &SessionState,
    event: &SessionEvent,
    at_ms: u64,
) -> Result<SessionState, ExperimentError> {
    let mut s = state.clone();
    match (state.phase, event) {
        (Phase::Consent, SessionEvent::ConsentGiven) => s.enter(Phase::PreSurvey, at_ms, None),
        (Phase::PreSurvey, SessionEvent::PreSurveySubmitted { answers }) => {
            s.pre_survey = answers.clone();
            s.enter(Phase::Calibration, at_ms, None);
        }
        (Phase::Calibration, SessionEvent::CalibrationCompleted) => s.enter(Phase::GroupSelect, at_ms, None),
        (Phase::GroupSelect, SessionEvent::GroupSelected { group_id }) => {
            let group = plan.group(*group_id).ok_or(ExperimentError::UnknownGroup(*group_id))?;
            s.group_id = Some(*group_id);
            s.slots = group
                .slots()
                .into_iter()
                .enumerate()
                .map(|(i, (condition, story_id))| {
                    let (story_index, story) = plan.story(&story_id).expect("plan validated");
                    let slot = i as u8 + 1;
                    SlotRecord {
                        slot,
                        condition,
                        story_index,
                        time_limit_seconds: reading_time_limit(story.word_count),
                        distraction_seed: stable_seed(&[b"distraction", s.session_id.as_bytes(), &[slot]]),
                        story_id,
                        reading_started_ms: None,
                        reading_ended_ms: None,
                        post_test_started_ms: None,
                        post_test_ended_ms: None,
                        distraction_answered: BTreeSet::new(),
                        distraction_score: 0,
                        draft_answers: BTreeMap::new(),
                        answers: None,
                        correct_answers: None,
                    }
                })
                .collect();
            s.enter_reading(1, at_ms);
        }
        (Phase::Reading(k), SessionEvent::ReadingDeadlineElapsed) => {
            let deadline = state.deadline_ms.expect("reading has a deadline");
            if at_ms < deadline {
                return Err(illegal(state, event));
            }
            s.slot_mut(k).reading_ended_ms = Some(deadline);
            s.enter(Phase::Distraction(k), deadline, Some(deadline + DISTRACTION_SECONDS * 1000));
        }
        (Phase::Distraction(k), SessionEvent::DistractionAnswered { problem, answer }) => {
            if state.deadline_ms.is_some_and(|d| at_ms >= d) {
                return Err(illegal(state, event));
            }
            let problems = state.distraction_problems(plan).unwrap_or_default();
            let p = problems
                .get(*problem)
                .ok_or_else(|| ExperimentError::InvalidEvent(format!("no distraction problem {problem}")))?;
            let slot = s.slot_mut(k);
            if slot.distraction_answered.insert(*problem) && p.answer == *answer {
                slot.distraction_score += 1;
            }
        }
        (Phase::Distraction(k), SessionEvent::DistractionElapsed) => {
            let deadline = state.deadline_ms.expect("distraction has a deadline");
            if at_ms < deadline {
                return Err(illegal(state, event));
            }
            s.slot_mut(k).post_test_started_ms = Some(deadline);
            s.enter(Phase::PostTest(k), deadline, None);
        }
        (Phase::PostTest(k), SessionEvent::QuestionAnswered { question, option }) => {
            if !(1..=10).contains(question) || *option >= 4 {
                return Err(ExperimentError::InvalidEvent(format!("answer {option} to question {question}")));
            }
            s.slot_mut(k).draft_answers.insert(*question, *option);
        }
        (Phase::PostTest(k), SessionEvent::PostTestSubmitted { answers }) => {
            let slot = &state.slots[usize::from(k) - 1];
            let (_, story) = plan.story(&slot.story_id).expect("plan validated");
            let correct = score_post_test(answers, &story.answer_key)?;
            let slot = s.slot_mut(k);
            slot.answers = Some(answers.clone());
            slot.correct_answers = Some(correct);
            slot.post_test_ended_ms = Some(at_ms);
            if usize::from(k) < s.slots.len() {
                s.enter_reading(k + 1, at_ms);
            } else {
                s.enter(Phase::PostSurvey, at_ms, None);
            }
        }
        (Phase::PostSurvey, SessionEvent::PostSurveySubmitted { answers }) => {
            s.post_survey = answers.clone();
            s.enter(Phase::Done, at_ms, None);
        }
        _ => return Err(illegal(state, event)),
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLog {
    pub slot: u8,
    pub condition: ReadingCondition,
    pub story_id: String,
    pub story_index: usize,
    pub reading_duration_seconds: Option<f64>,
    pub question_duration_seconds: Option<f64>,
    pub distraction_score: u32,
    pub correct_answers: Option<u8>,
    /// Reading window in server milliseconds, for aligning gaze samples.
    pub reading_window_ms: Option<(u64, u64)>,
}

/// Log metrics of one session: durations, group, story per slot,
/// distraction score and correct answers, plus survey answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub group_number: Option<u8>,
    pub slots: Vec<SlotLog>,
    pub pre_survey: BTreeMap<String, String>,
    pub post_survey: BTreeMap<String, String>,
    pub completed: bool,
}

fn secs(start: Option<u64>, end: Option<u64>) -> Option<f64> {
    Some((end?.saturating_sub(start?)) as f64 / 1000.0)
}

impl SessionLog {
    pub fn from_state(state: &SessionState) -> Self {
        Self {
            session_id: state.session_id.clone(),
            group_number: state.group_id,
            slots: state
                .slots
                .iter()
                .map(|s| SlotLog {
                    slot: s.slot,
                    condition: s.condition,
                    story_id: s.story_id.clone(),
                    story_index: s.story_index,
                    reading_duration_seconds: secs(s.reading_started_ms, s.reading_ended_ms),
                    question_duration_seconds: secs(s.post_test_started_ms, s.post_test_ended_ms),
                    distraction_score: s.distraction_score,
                    correct_answers: s.correct_answers,
                    reading_window_ms: s.reading_started_ms.zip(s.reading_ended_ms),
                })
                .collect(),
            pre_survey: state.pre_survey.clone(),
            post_survey: state.post_survey.clone(),
            completed: state.phase == Phase::Done,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.slots.iter().any(|s| s.correct_answers.is_some_and(|c| c > 10)) {
            return Err("correct_answers above 10".into());
        }
        if self.completed && self.slots.len() != 4 {
            return Err(format!("completed session has {} slots", self.slots.len()));
        }
        Ok(())
    }
}

/// One persisted event. `seq` is the 0-based position in the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    pub at_ms: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

/// Folds a recorded stream, which must start with `Created`, into the final
/// state.
pub fn replay_state(plan: &ExperimentPlan, session_id: &str, events: &[LoggedEvent]) -> Result<SessionState, ExperimentError> {
    let (first, rest) = events.split_first().ok_or_else(|| ExperimentError::Storage("empty event log".into()))?;
    if first.event != SessionEvent::Created {
        return Err(ExperimentError::Storage("event log does not start with created".into()));
    }
    rest.iter().try_fold(SessionState::new(session_id, first.at_ms), |s, e| advance_session(plan, &s, &e.event, e.at_ms))
}

pub fn replay(plan: &ExperimentPlan, session_id: &str, events: &[LoggedEvent]) -> Result<SessionLog, ExperimentError> {
    replay_state(plan, session_id, events).map(|s| SessionLog::from_state(&s))
}
