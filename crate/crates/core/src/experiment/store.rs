//! Append-only per-session event logs.
//!
//! On disk every session is a directory `<root>/<session_id>/` holding
//! `events.jsonl` (one [`LoggedEvent`] per line) plus attachments such as the
//! uploaded `gaze.csv`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use super::session::{LoggedEvent, SessionEvent};
use super::ExperimentError;

pub const EVENTS_FILE: &str = "events.jsonl";

pub trait EventStore: Send + Sync {
    /// Starts a new log. Fails if the session already exists.
    fn create(&self, session_id: &str, at_ms: u64) -> Result<LoggedEvent, ExperimentError>;
    /// Appends one event and returns it with its position.
    fn append(&self, session_id: &str, at_ms: u64, event: &SessionEvent) -> Result<LoggedEvent, ExperimentError>;
    fn read(&self, session_id: &str) -> Result<Vec<LoggedEvent>, ExperimentError>;
    fn sessions(&self) -> Result<Vec<String>, ExperimentError>;
    fn put_attachment(&self, session_id: &str, name: &str, bytes: &[u8]) -> Result<(), ExperimentError>;
    fn get_attachment(&self, session_id: &str, name: &str) -> Result<Option<Vec<u8>>, ExperimentError>;
}

/// Session ids double as directory names, so keep them to a safe alphabet.
pub fn check_session_id(id: &str) -> Result<(), ExperimentError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::UnknownSession(id.to_string()))
    }
}

fn check_attachment_name(name: &str) -> Result<(), ExperimentError> {
    let ok = !name.is_empty()
        && name != EVENTS_FILE
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::InvalidArgument(format!("bad attachment name {name:?}")))
    }
}

#[derive(Default)]
struct MemSession {
    events: Vec<LoggedEvent>,
    attachments: BTreeMap<String, Vec<u8>>,
}

#[derive(Default)]
pub struct MemoryEventStore {
    inner: Mutex<BTreeMap<String, MemSession>>,
}

impl MemoryEventStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryEventStore {
    fn create(&self, session_id: &str, at_ms: u64) -> Result<LoggedEvent, ExperimentError> {
        check_session_id(session_id)?;
        let mut inner = self.inner.lock();
        if inner.contains_key(session_id) {
            return Err(ExperimentError::InvalidArgument(format!("session {session_id} exists")));
        }
        let first = LoggedEvent { seq: 0, at_ms, event: SessionEvent::Created };
        inner.insert(session_id.to_string(), MemSession { events: vec![first.clone()], ..Default::default() });
        Ok(first)
    }

    fn append(&self, session_id: &str, at_ms: u64, event: &SessionEvent) -> Result<LoggedEvent, ExperimentError> {
        let mut inner = self.inner.lock();
        let s = inner.get_mut(session_id).ok_or_else(|| ExperimentError::UnknownSession(session_id.to_string()))?;
        let logged = LoggedEvent { seq: s.events.len() as u64, at_ms, event: event.clone() };
        s.events.push(logged.clone());
        Ok(logged)
    }

    fn read(&self, session_id: &str) -> Result<Vec<LoggedEvent>, ExperimentError> {
        let inner = self.inner.lock();
        inner
            .get(session_id)
            .map(|s| s.events.clone())
            .ok_or_else(|| ExperimentError::UnknownSession(session_id.to_string()))
    }

    fn sessions(&self) -> Result<Vec<String>, ExperimentError> {
        Ok(self.inner.lock().keys().cloned().collect())
    }

    fn put_attachment(&self, session_id: &str, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        check_attachment_name(name)?;
        let mut inner = self.inner.lock();
        let s = inner.get_mut(session_id).ok_or_else(|| ExperimentError::UnknownSession(session_id.to_string()))?;
        s.attachments.insert(name.to_string(), bytes.to_vec());
        Ok(())
    }

    fn get_attachment(&self, session_id: &str, name: &str) -> Result<Option<Vec<u8>>, ExperimentError> {
        let inner = self.inner.lock();
        let s = inner.get(session_id).ok_or_else(|| ExperimentError::UnknownSession(session_id.to_string()))?;
        Ok(s.attachments.get(name).cloned())
    }
}

/// Directory-backed store. Appends are serialized by a store-wide lock and
/// written as a single line, so a crash can at worst leave one unterminated
/// trailing line, which readers ignore.
pub struct FileEventStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Storage(format!("{}: {e}", path.display()))
}

impl FileEventStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ExperimentError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root, write_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    fn existing_dir(&self, session_id: &str) -> Result<PathBuf, ExperimentError> {
        check_session_id(session_id)?;
        let dir = self.session_dir(session_id);
        if dir.join(EVENTS_FILE).is_file() {
            Ok(dir)
        } else {
            Err(ExperimentError::UnknownSession(session_id.to_string()))
        }
    }

    fn write_line(path: &Path, logged: &LoggedEvent) -> Result<(), ExperimentError> {
        let mut line = serde_json::to_string(logged).map_err(|e| io_err(path, e))?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        f.sync_data().map_err(|e| io_err(path, e))
    }
}

/// Parses an `events.jsonl` body; an unterminated final line is dropped.
pub fn parse_event_log(text: &str) -> Result<Vec<LoggedEvent>, ExperimentError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut out = Vec::new();
    for (n, line) in complete.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ev: LoggedEvent = serde_json::from_str(line)
            .map_err(|e| ExperimentError::Storage(format!("event log line {}: {e}", n + 1)))?;
        if ev.seq != out.len() as u64 {
            return Err(ExperimentError::Storage(format!("event log line {}: sequence gap", n + 1)));
        }
        out.push(ev);
    }
    Ok(out)
}

impl EventStore for FileEventStore {
    fn create(&self, session_id: &str, at_ms: u64) -> Result<LoggedEvent, ExperimentError> {
        check_session_id(session_id)?;
        let _g = self.write_lock.lock();
        let dir = self.session_dir(session_id);
        if dir.exists() {
            return Err(ExperimentError::InvalidArgument(format!("session {session_id} exists")));
        }
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let first = LoggedEvent { seq: 0, at_ms, event: SessionEvent::Created };
        Self::write_line(&dir.join(EVENTS_FILE), &first)?;
        Ok(first)
    }

    fn append(&self, session_id: &str, at_ms: u64, event: &SessionEvent) -> Result<LoggedEvent, ExperimentError> {
        let dir = self.existing_dir(session_id)?;
        let _g = self.write_lock.lock();
        let path = dir.join(EVENTS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let seq = parse_event_log(&text)?.len() as u64;
        if !text.is_empty() && !text.ends_with('\n') {
            // Drop a torn trailing line before appending.
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            fs::write(&path, &text[..keep]).map_err(|e| io_err(&path, e))?;
        }
        let logged = LoggedEvent { seq, at_ms, event: event.clone() };
        Self::write_line(&path, &logged)?;
        Ok(logged)
    }

    fn read(&self, session_id: &str) -> Result<Vec<LoggedEvent>, ExperimentError> {
        let path = self.existing_dir(session_id)?.join(EVENTS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        parse_event_log(&text)
    }

    fn sessions(&self) -> Result<Vec<String>, ExperimentError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| io_err(&self.root, e))? {
            let entry = entry.map_err(|e| io_err(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if check_session_id(&name).is_ok() && entry.path().join(EVENTS_FILE).is_file() {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    fn put_attachment(&self, session_id: &str, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        check_attachment_name(name)?;
        let dir = self.existing_dir(session_id)?;
        let tmp = dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, dir.join(name)).map_err(|e| io_err(&dir, e))
    }

    fn get_attachment(&self, session_id: &str, name: &str) -> Result<Option<Vec<u8>>, ExperimentError> {
        check_attachment_name(name)?;
        let path = self.existing_dir(session_id)?.join(name);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise(store: &dyn EventStore) {
        store.create("s1", 10).unwrap();
        assert!(store.create("s1", 11).is_err());
        let e = store.append("s1", 20, &SessionEvent::ConsentGiven).unwrap();
        assert_eq!(e.seq, 1);
        let events = store.read("s1").unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[1], e);
        assert!(matches!(store.read("nope"), Err(ExperimentError::UnknownSession(_))));
        assert!(matches!(store.append("nope", 0, &SessionEvent::ConsentGiven), Err(ExperimentError::UnknownSession(_))));
        store.put_attachment("s1", "gaze.csv", b"t_ms,x_px,y_px,valid\n").unwrap();
        assert_eq!(store.get_attachment("s1", "gaze.csv").unwrap().unwrap(), b"t_ms,x_px,y_px,valid\n");
        assert_eq!(store.get_attachment("s1", "other.csv").unwrap(), None);
        assert!(store.put_attachment("s1", "../x", b"").is_err());
        assert!(store.put_attachment("s1", EVENTS_FILE, b"").is_err());
        assert_eq!(store.sessions().unwrap(), vec!["s1".to_string()]);
    }

    #[test]
    fn memory_store() {
        exercise(&MemoryEventStore::new());
    }

    #[test]
    fn file_store() {
        let dir = tempfile::tempdir().unwrap();
        exercise(&FileEventStore::open(dir.path()).unwrap());
        // Reopen sees the same log.
        let again = FileEventStore::open(dir.path()).unwrap();
        assert_eq!(again.read("s1").unwrap().len(), 2);
    }

    #[test]
    fn torn_tail_ignored_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileEventStore::open(dir.path()).unwrap();
        store.create("s1", 0).unwrap();
        let path = dir.path().join("s1").join(EVENTS_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":1,\"at_").unwrap();
        assert_eq!(store.read("s1").unwrap().len(), 1);
        store.append("s1", 5, &SessionEvent::ConsentGiven).unwrap();
        assert_eq!(store.read("s1").unwrap().len(), 2);
    }

    #[test]
    fn path_traversal_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileEventStore::open(dir.path()).unwrap();
        assert!(store.create("../evil", 0).is_err());
        assert!(store.read("a/b").is_err());
    }
}
