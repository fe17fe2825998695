use std::collections::BTreeMap;
use std::sync::Arc;

use genread_core::experiment::{
    advance_session, replay, EventStore, ExperimentError, ExperimentPlan, ExperimentService, FileEventStore,
    ManualClock, MemoryEventStore, Phase, PlanStory, ReadingCondition, SessionEvent, SessionState,
};

const KEY: [u8; 10] = [0, 1, 2, 3, 0, 1, 2, 3, 0, 1];

fn plan() -> ExperimentPlan {
    let stories = [("A", 500), ("B", 250), ("C", 625), ("D", 100)]
        .into_iter()
        .map(|(id, wc)| PlanStory { id: id.into(), title: format!("Story {id}"), word_count: wc, answer_key: KEY.to_vec() })
        .collect();
    ExperimentPlan::new(stories, "D").unwrap()
}

fn answers(correct: usize) -> Vec<u8> {
    KEY.iter().enumerate().map(|(i, k)| if i < correct { *k } else { (k + 1) % 4 }).collect()
}

fn survey(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Drives a session through every phase; returns it finished.
fn run_full_session(svc: &ExperimentService, clock: &ManualClock, group: u8, scores: [usize; 4]) -> String {
    let id = svc.create_session().unwrap().session_id;
    clock.advance(1_000);
    svc.record_event(&id, SessionEvent::ConsentGiven).unwrap();
    svc.record_event(&id, SessionEvent::PreSurveySubmitted { answers: survey(&[("Q1", "group")]) }).unwrap();
    svc.record_event(&id, SessionEvent::CalibrationCompleted).unwrap();
    svc.record_event(&id, SessionEvent::GroupSelected { group_id: group }).unwrap();
    for (k, correct) in scores.into_iter().enumerate() {
        let st = svc.state(&id).unwrap();
        assert_eq!(st.phase, Phase::Reading(k as u8 + 1));
        let deadline = st.deadline_ms.unwrap();
        clock.set(deadline + 5);
        let st = svc.state(&id).unwrap();
        assert_eq!(st.phase, Phase::Distraction(k as u8 + 1));
        let problems = st.distraction_problems(svc.plan()).unwrap();
        svc.record_event(&id, SessionEvent::DistractionAnswered { problem: 0, answer: problems[0].answer }).unwrap();
        svc.record_event(&id, SessionEvent::DistractionAnswered { problem: 1, answer: problems[1].answer + 1 }).unwrap();
        clock.set(st.deadline_ms.unwrap() + 1);
        svc.record_event(&id, SessionEvent::QuestionAnswered { question: 1, option: 2 }).unwrap();
        clock.advance(30_000);
        svc.record_event(&id, SessionEvent::PostTestSubmitted { answers: answers(correct) }).unwrap();
    }
    svc.record_event(
        &id,
        SessionEvent::PostSurveySubmitted { answers: survey(&[("Q3", "text-generation"), ("Q4", "")]) },
    )
    .unwrap();
    id
}

#[test]
fn full_session_log_metrics() {
    let clock = Arc::new(ManualClock::new(10_000));
    let svc = ExperimentService::open(plan(), Arc::new(MemoryEventStore::new()), clock.clone()).unwrap();
    let id = run_full_session(&svc, &clock, 3, [6, 7, 8, 9]);
    let log = svc.log(&id).unwrap();
    assert!(log.completed);
    log.validate().unwrap();
    assert_eq!(log.group_number, Some(3));
    assert_eq!(log.slots.len(), 4);
    // Group 3 is BAC onto C2..C4, after the fixed story under C1.
    let stories: Vec<&str> = log.slots.iter().map(|s| s.story_id.as_str()).collect();
    assert_eq!(stories, vec!["D", "B", "A", "C"]);
    let conds: Vec<ReadingCondition> = log.slots.iter().map(|s| s.condition).collect();
    assert_eq!(conds, ReadingCondition::ALL.to_vec());
    assert_eq!(log.slots.iter().map(|s| s.story_index).collect::<Vec<_>>(), vec![3, 1, 0, 2]);
    // Reading time is exactly the word-count limit, whatever the observation delay.
    let secs: Vec<f64> = log.slots.iter().map(|s| s.reading_duration_seconds.unwrap()).collect();
    assert_eq!(secs, vec![24.0, 60.0, 120.0, 150.0]);
    for (s, want) in log.slots.iter().zip([6, 7, 8, 9]) {
        assert_eq!(s.correct_answers, Some(want));
        assert_eq!(s.distraction_score, 1);
        assert_eq!(s.question_duration_seconds, Some(30.001));
    }
    assert_eq!(log.post_survey["Q3"], "text-generation");
    assert_eq!(log.pre_survey["Q1"], "group");
}

#[test]
fn replay_reproduces_log() {
    let clock = Arc::new(ManualClock::new(0));
    let store = Arc::new(MemoryEventStore::new());
    let svc = ExperimentService::open(plan(), store.clone(), clock.clone()).unwrap();
    let id = run_full_session(&svc, &clock, 5, [10, 0, 3, 4]);
    let events = store.read(&id).unwrap();
    let a = replay(&plan(), &id, &events).unwrap();
    let b = replay(&plan(), &id, &events).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, svc.log(&id).unwrap());
    // A prefix replays to a consistent partial log.
    let partial = replay(&plan(), &id, &events[..8]).unwrap();
    assert!(!partial.completed);
}

#[test]
fn illegal_transitions() {
    let p = plan();
    let s = SessionState::new("x", 0);
    let err = advance_session(&p, &s, &SessionEvent::QuestionAnswered { question: 3, option: 1 }, 5).unwrap_err();
    assert!(matches!(err, ExperimentError::IllegalTransition { .. }));
    let s = advance_session(&p, &s, &SessionEvent::ConsentGiven, 1).unwrap();
    assert!(advance_session(&p, &s, &SessionEvent::ConsentGiven, 2).is_err());
    let s = advance_session(&p, &s, &SessionEvent::PreSurveySubmitted { answers: BTreeMap::new() }, 2).unwrap();
    let s = advance_session(&p, &s, &SessionEvent::CalibrationCompleted, 3).unwrap();
    assert!(matches!(
        advance_session(&p, &s, &SessionEvent::GroupSelected { group_id: 7 }, 4),
        Err(ExperimentError::UnknownGroup(7))
    ));
    let s = advance_session(&p, &s, &SessionEvent::GroupSelected { group_id: 1 }, 4).unwrap();
    assert_eq!(s.phase, Phase::Reading(1));
    // Deadline not yet reached: the auto event is refused.
    assert!(advance_session(&p, &s, &SessionEvent::ReadingDeadlineElapsed, 5).is_err());
    // Client cannot submit a post-test during reading.
    assert!(advance_session(&p, &s, &SessionEvent::PostTestSubmitted { answers: KEY.to_vec() }, 6).is_err());
}

#[test]
fn deadline_never_moves_and_late_answers_rejected() {
    let clock = Arc::new(ManualClock::new(0));
    let svc = ExperimentService::open(plan(), Arc::new(MemoryEventStore::new()), clock.clone()).unwrap();
    let id = svc.create_session().unwrap().session_id;
    svc.record_event(&id, SessionEvent::ConsentGiven).unwrap();
    svc.record_event(&id, SessionEvent::PreSurveySubmitted { answers: BTreeMap::new() }).unwrap();
    svc.record_event(&id, SessionEvent::CalibrationCompleted).unwrap();
    let (_, st) = svc.record_event(&id, SessionEvent::GroupSelected { group_id: 1 }).unwrap();
    let deadline = st.deadline_ms.unwrap();
    assert_eq!(deadline, 24_000); // Story D, 100 words.
    for t in [1_000, 10_000, 23_999] {
        clock.set(t);
        let st = svc.state(&id).unwrap();
        assert_eq!(st.deadline_ms, Some(deadline));
        assert_eq!(st.phase, Phase::Reading(1));
    }
    // Far past both the reading and the distraction deadline.
    clock.set(deadline + 200_000);
    let err = svc.record_event(&id, SessionEvent::DistractionAnswered { problem: 0, answer: 0 }).unwrap_err();
    assert!(matches!(err, ExperimentError::IllegalTransition { .. }));
    let st = svc.state(&id).unwrap();
    assert_eq!(st.phase, Phase::PostTest(1));
    assert_eq!(st.phase_entered_ms, deadline + 60_000);
    let events = svc.events(&id).unwrap();
    let auto: Vec<u64> = events
        .iter()
        .filter(|e| matches!(e.event, SessionEvent::ReadingDeadlineElapsed | SessionEvent::DistractionElapsed))
        .map(|e| e.at_ms)
        .collect();
    assert_eq!(auto, vec![deadline, deadline + 60_000]);
}

#[test]
fn summary_condition_timed_by_story() {
    let clock = Arc::new(ManualClock::new(0));
    let svc = ExperimentService::open(plan(), Arc::new(MemoryEventStore::new()), clock.clone()).unwrap();
    let id = run_full_session(&svc, &clock, 1, [1, 1, 1, 1]);
    let log = svc.log(&id).unwrap();
    // Group 1: C2=A (500), C3=B (250), C4=C (625).
    let c3 = log.slots.iter().find(|s| s.condition == ReadingCondition::C3).unwrap();
    assert_eq!(c3.story_id, "B");
    assert_eq!(c3.reading_duration_seconds, Some(60.0));
}

#[test]
fn unknown_session_and_bad_answers() {
    let clock = Arc::new(ManualClock::new(0));
    let svc = ExperimentService::open(plan(), Arc::new(MemoryEventStore::new()), clock.clone()).unwrap();
    assert!(matches!(svc.state("s999999"), Err(ExperimentError::UnknownSession(_))));
    assert!(matches!(
        svc.record_event("nope", SessionEvent::ConsentGiven),
        Err(ExperimentError::UnknownSession(_))
    ));
    // Clients cannot forge creation events.
    let id = svc.create_session().unwrap().session_id;
    assert!(svc.record_event(&id, SessionEvent::Created).is_err());
}

#[test]
fn wrong_answer_count_rejected_without_advancing() {
    let clock = Arc::new(ManualClock::new(0));
    let svc = ExperimentService::open(plan(), Arc::new(MemoryEventStore::new()), clock.clone()).unwrap();
    let id = svc.create_session().unwrap().session_id;
    svc.record_event(&id, SessionEvent::ConsentGiven).unwrap();
    svc.record_event(&id, SessionEvent::PreSurveySubmitted { answers: BTreeMap::new() }).unwrap();
    svc.record_event(&id, SessionEvent::CalibrationCompleted).unwrap();
    svc.record_event(&id, SessionEvent::GroupSelected { group_id: 2 }).unwrap();
    clock.set(1_000_000);
    let before = svc.events(&id).unwrap().len();
    let err = svc.record_event(&id, SessionEvent::PostTestSubmitted { answers: vec![0; 9] }).unwrap_err();
    assert_eq!(err, ExperimentError::AnswerCountMismatch { expected: 10, got: 9 });
    assert_eq!(svc.state(&id).unwrap().phase, Phase::PostTest(1));
    // Only the two deadline events were appended; the rejected event was not.
    assert_eq!(svc.events(&id).unwrap().len(), before + 2);
}

#[test]
fn file_store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(0));
    let id = {
        let store = Arc::new(FileEventStore::open(dir.path()).unwrap());
        let svc = ExperimentService::open(plan(), store, clock.clone()).unwrap();
        run_full_session(&svc, &clock, 4, [2, 4, 6, 8])
    };
    assert!(dir.path().join(&id).join("events.jsonl").is_file());
    assert!(dir.path().join(&id).join("plan.json").is_file());
    let store = Arc::new(FileEventStore::open(dir.path()).unwrap());
    let svc = ExperimentService::open(plan(), store, clock.clone()).unwrap();
    let log = svc.log(&id).unwrap();
    assert!(log.completed);
    assert_eq!(log.slots.iter().map(|s| s.correct_answers.unwrap()).collect::<Vec<_>>(), vec![2, 4, 6, 8]);
    // New sessions do not collide with restored ones.
    let fresh = svc.create_session().unwrap().session_id;
    assert_ne!(fresh, id);
}

#[test]
fn concurrent_sessions_are_isolated() {
    let clock = Arc::new(ManualClock::new(0));
    let svc = Arc::new(ExperimentService::open(plan(), Arc::new(MemoryEventStore::new()), clock.clone()).unwrap());
    let ids: Vec<String> = (0..16).map(|_| svc.create_session().unwrap().session_id).collect();
    std::thread::scope(|s| {
        for id in &ids {
            let svc = svc.clone();
            s.spawn(move || {
                svc.record_event(id, SessionEvent::ConsentGiven).unwrap();
                svc.record_event(id, SessionEvent::PreSurveySubmitted { answers: BTreeMap::new() }).unwrap();
                svc.record_event(id, SessionEvent::CalibrationCompleted).unwrap();
                // Racing duplicates: exactly one consent per session is accepted.
                assert!(svc.record_event(id, SessionEvent::ConsentGiven).is_err());
            });
        }
    });
    for id in &ids {
        let events = svc.events(id).unwrap();
        assert_eq!(events.len(), 4);
        assert!(events.iter().enumerate().all(|(i, e)| e.seq == i as u64));
        assert_eq!(svc.state(id).unwrap().phase, Phase::GroupSelect);
    }
}
