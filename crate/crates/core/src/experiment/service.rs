//! Thread-safe facade over sessions: one mutex per session, all state
//! changes go through the event store first.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};

use super::session::{advance_session, replay, replay_state, LoggedEvent, SessionEvent, SessionLog, SessionState};
use super::store::EventStore;
use super::{ExperimentError, ExperimentPlan};

pub const GAZE_ATTACHMENT: &str = "gaze.csv";
/// Copy of the plan kept with every session so logs replay offline.
pub const PLAN_ATTACHMENT: &str = "plan.json";

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Clock moved only by hand; for tests and replays.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }
}

pub struct ExperimentService {
    plan: ExperimentPlan,
    store: Arc<dyn EventStore>,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    next_id: AtomicU64,
}

impl ExperimentService {
    /// Opens the service and restores every session already in `store` by
    /// replaying its log.
    pub fn open(plan: ExperimentPlan, store: Arc<dyn EventStore>, clock: Arc<dyn Clock>) -> Result<Self, ExperimentError> {
        let mut sessions = HashMap::new();
        for id in store.sessions()? {
            let state = replay_state(&plan, &id, &store.read(&id)?)?;
            sessions.insert(id, Arc::new(Mutex::new(state)));
        }
        let next = sessions.len() as u64 + 1;
        Ok(Self { plan, store, clock, sessions: RwLock::new(sessions), next_id: AtomicU64::new(next) })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn create_session(&self) -> Result<SessionState, ExperimentError> {
        let mut sessions = self.sessions.write();
        let id = loop {
            let candidate = format!("s{:06}", self.next_id.fetch_add(1, Ordering::SeqCst));
            if !sessions.contains_key(&candidate) {
                break candidate;
            }
        };
        let created = self.store.create(&id, self.clock.now_ms())?;
        let plan = serde_json::to_vec_pretty(&self.plan).map_err(|e| ExperimentError::Storage(e.to_string()))?;
        self.store.put_attachment(&id, PLAN_ATTACHMENT, &plan)?;
        let state = SessionState::new(&id, created.at_ms);
        sessions.insert(id, Arc::new(Mutex::new(state.clone())));
        Ok(state)
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, ExperimentError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| ExperimentError::UnknownSession(id.to_string()))
    }

    /// Applies deadline transitions due at `now`, logging each one stamped
    /// at its deadline.
    fn tick(&self, state: &mut SessionState, now: u64) -> Result<(), ExperimentError> {
        while let Some((event, at)) = state.due_auto_event(now) {
            let next = advance_session(&self.plan, state, &event, at)?;
            self.store.append(&state.session_id, at, &event)?;
            *state = next;
        }
        Ok(())
    }

    /// Records a participant event at the current server time. Deadline
    /// transitions that are already due are applied first, so a late answer
    /// to an expired phase is rejected.
    pub fn record_event(&self, id: &str, event: SessionEvent) -> Result<(LoggedEvent, SessionState), ExperimentError> {
        let handle = self.handle(id)?;
        let mut state = handle.lock();
        let now = self.clock.now_ms();
        self.tick(&mut state, now)?;
        let next = advance_session(&self.plan, &state, &event, now)?;
        let logged = self.store.append(id, now, &event)?;
        *state = next;
        Ok((logged, state.clone()))
    }

    pub fn state(&self, id: &str) -> Result<SessionState, ExperimentError> {
        let handle = self.handle(id)?;
        let mut state = handle.lock();
        self.tick(&mut state, self.clock.now_ms())?;
        Ok(state.clone())
    }

    /// The session log, rebuilt from the persisted event stream.
    pub fn log(&self, id: &str) -> Result<SessionLog, ExperimentError> {
        let handle = self.handle(id)?;
        let mut state = handle.lock();
        self.tick(&mut state, self.clock.now_ms())?;
        replay(&self.plan, id, &self.store.read(id)?)
    }

    pub fn events(&self, id: &str) -> Result<Vec<LoggedEvent>, ExperimentError> {
        let handle = self.handle(id)?;
        let _state = handle.lock();
        self.store.read(id)
    }

    /// Stores raw gaze CSV for the session. The caller validates the format.
    pub fn upload_gaze(&self, id: &str, csv: &[u8]) -> Result<(), ExperimentError> {
        let handle = self.handle(id)?;
        let _state = handle.lock();
        self.store.put_attachment(id, GAZE_ATTACHMENT, csv)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }
}
