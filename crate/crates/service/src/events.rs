// SPDX-License-Identifier: Apache-2.0

//! Append-only, replayable log of accept/reject feedback.
//!
//! Each line of the log file is one JSON-encoded [`RecommendationEvent`].
//! Counters are derived state: reopening a log replays every line and
//! yields the same counts the running store held.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::metrics::AcceptanceStats;
use crate::ServiceError;

pub const DEFAULT_COMPACT_EVERY: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[serde(alias = "Description")]
    Description,
    #[serde(alias = "Example")]
    Example,
    #[serde(alias = "Type")]
    Type,
    #[serde(alias = "Required")]
    Required,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Description => "description",
            Field::Example => "example",
            Field::Type => "type",
            Field::Required => "required",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "description" => Ok(Field::Description),
            "example" => Ok(Field::Example),
            "type" => Ok(Field::Type),
            "required" => Ok(Field::Required),
            other => Err(ServiceError::Argument(format!("unknown field `{other}`"))),
        }
    }
}

/// One displayed candidate list and the engineer's reaction to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationEvent {
    pub event_id: String,
    pub api_id: String,
    pub param_name: String,
    pub field: Field,
    /// Fingerprints of the shown candidates, in display order.
    pub shown: Vec<String>,
    /// The accepted fingerprint; absent when the list was dismissed.
    #[serde(default)]
    pub chosen: Option<String>,
    pub timestamp: DateTime<Utc>,
}

impl RecommendationEvent {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.event_id.trim().is_empty() {
            return Err(ServiceError::Validation(
                "event_id must be non-empty".into(),
            ));
        }
        if self.shown.is_empty() {
            return Err(ServiceError::Validation(
                "shown must list at least one candidate".into(),
            ));
        }
        if let Some(c) = &self.chosen {
            if !self.shown.contains(c) {
                return Err(ServiceError::Validation(format!(
                    "chosen `{c}` is not among the shown candidates"
                )));
            }
        }
        Ok(())
    }

    pub fn is_valid_recommendation(&self) -> bool {
        self.chosen.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordOutcome {
    pub event_id: String,
    /// True when the event was already stored and this call changed nothing.
    pub duplicate: bool,
}

struct Inner {
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<RecommendationEvent>,
    by_id: HashMap<String, usize>,
    valid: u64,
    since_compaction: usize,
    compact_every: usize,
}

/// Single-writer event store. All mutations go through one mutex.
pub struct EventStore {
    inner: Mutex<Inner>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |e| ServiceError::Io(format!("{}: {e}", path.display()))
}

impl EventStore {
    pub fn in_memory() -> EventStore {
        EventStore {
            inner: Mutex::new(Inner {
                path: None,
                file: None,
                events: Vec::new(),
                by_id: HashMap::new(),
                valid: 0,
                since_compaction: 0,
                compact_every: DEFAULT_COMPACT_EVERY,
            }),
        }
    }

    /// Opens (creating if needed) and replays a log file.
    ///
    /// A final line without a trailing newline that fails to parse is taken
    /// to be a torn write and dropped; the log is then compacted. Any other
    /// malformed line is an error.
    pub fn open(path: &Path) -> Result<EventStore, ServiceError> {
        EventStore::open_with(path, DEFAULT_COMPACT_EVERY)
    }

    pub fn open_with(path: &Path, compact_every: usize) -> Result<EventStore, ServiceError> {
        let mut inner = Inner {
            path: Some(path.to_path_buf()),
            file: None,
            events: Vec::new(),
            by_id: HashMap::new(),
            valid: 0,
            since_compaction: 0,
            compact_every,
        };
        let mut needs_compaction = false;
        if path.exists() {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let lines: Vec<&str> = text.split_inclusive('\n').collect();
            for (i, raw) in lines.iter().enumerate() {
                let line = raw.trim_end_matches(['\n', '\r']);
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RecommendationEvent>(line) {
                    Ok(ev) => match inner.apply(ev) {
                        Ok(true) => {}
                        // Duplicate line: redundant but harmless.
                        Ok(false) => needs_compaction = true,
                        Err(e) => {
                            return Err(ServiceError::Io(format!(
                                "{} line {}: {e}",
                                path.display(),
                                i + 1
                            )))
                        }
                    },
                    Err(_) if i + 1 == lines.len() && !raw.ends_with('\n') => {
                        needs_compaction = true
                    }
                    Err(e) => {
                        return Err(ServiceError::Io(format!(
                            "{} line {}: {e}",
                            path.display(),
                            i + 1
                        )))
                    }
                }
            }
        }
        if needs_compaction {
            inner.compact()?;
        }
        inner.reopen()?;
        Ok(EventStore {
            inner: Mutex::new(inner),
        })
    }

    /// Validates and appends an event. Replaying an event with a known id
    /// and identical payload is a no-op; a different payload is a conflict.
    pub fn record(&self, event: RecommendationEvent) -> Result<RecordOutcome, ServiceError> {
        event.validate()?;
        let mut inner = self.inner.lock().expect("event store poisoned");
        let event_id = event.event_id.clone();
        if let Some(&i) = inner.by_id.get(&event_id) {
            if inner.events[i] == event {
                return Ok(RecordOutcome {
                    event_id,
                    duplicate: true,
                });
            }
            return Err(ServiceError::Conflict(format!(
                "event `{event_id}` already recorded with a different payload"
            )));
        }
        let path = inner.path.clone().unwrap_or_default();
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_string(&event).expect("events serialize");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(io_err(&path))?;
            file.sync_data().map_err(io_err(&path))?;
        }
        inner.apply(event)?;
        inner.since_compaction += 1;
        if inner.path.is_some()
            && inner.compact_every > 0
            && inner.since_compaction >= inner.compact_every
        {
            inner.compact()?;
            inner.reopen()?;
        }
        Ok(RecordOutcome {
            event_id,
            duplicate: false,
        })
    }

    /// Rewrites the log with exactly one line per stored event.
    pub fn compact(&self) -> Result<(), ServiceError> {
        let mut inner = self.inner.lock().expect("event store poisoned");
        inner.compact()?;
        inner.reopen()
    }

    pub fn events(&self) -> Vec<RecommendationEvent> {
        self.inner
            .lock()
            .expect("event store poisoned")
            .events
            .clone()
    }

    /// Counters maintained incrementally on every append.
    pub fn counters(&self) -> AcceptanceStats {
        let inner = self.inner.lock().expect("event store poisoned");
        AcceptanceStats::new(inner.valid, inner.events.len() as u64)
    }

    pub fn len(&self) -> usize {
        self.inner
            .lock()
            .expect("event store poisoned")
            .events
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Inner {
    /// Returns false for an identical replay.
    fn apply(&mut self, ev: RecommendationEvent) -> Result<bool, ServiceError> {
        if let Some(&i) = self.by_id.get(&ev.event_id) {
            if self.events[i] == ev {
                return Ok(false);
            }
            return Err(ServiceError::Conflict(format!(
                "event `{}` recorded twice with different payloads",
                ev.event_id
            )));
        }
        ev.validate()?;
        if ev.is_valid_recommendation() {
            self.valid += 1;
        }
        self.by_id.insert(ev.event_id.clone(), self.events.len());
        self.events.push(ev);
        Ok(true)
    }

    fn compact(&mut self) -> Result<(), ServiceError> {
        self.since_compaction = 0;
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        self.file = None;
        let tmp = path.with_extension("compacting");
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            for ev in &self.events {
                let mut line = serde_json::to_string(ev).expect("events serialize");
                line.push('\n');
                f.write_all(line.as_bytes()).map_err(io_err(&tmp))?;
            }
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    fn reopen(&mut self) -> Result<(), ServiceError> {
        if let Some(path) = &self.path {
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io_err(path))?;
            self.file = Some(f);
        }
        Ok(())
    }
}

/// Reads every event from a log without opening it for writing.
pub fn read_log(path: &Path) -> Result<Vec<RecommendationEvent>, ServiceError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out: Vec<RecommendationEvent> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: RecommendationEvent = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Io(format!("{} line {}: {e}", path.display(), i + 1)))?;
        match seen.get(&ev.event_id) {
            Some(&j) if out[j] == ev => continue,
            Some(_) => {
                return Err(ServiceError::Conflict(format!(
                    "event `{}` recorded twice with different payloads",
                    ev.event_id
                )))
            }
            None => {
                seen.insert(ev.event_id.clone(), out.len());
                out.push(ev);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ev(id: &str, chosen: Option<&str>) -> RecommendationEvent {
        RecommendationEvent {
            event_id: id.into(),
            api_id: "sms.AddSmsSign".into(),
            param_name: "SignName".into(),
            field: Field::Description,
            shown: vec!["search:aa".into(), "translation:bb".into()],
            chosen: chosen.map(String::from),
            timestamp: Utc.with_ymd_and_hms(2026, 3, 2, 10, 0, 0).unwrap(),
        }
    }

    #[test]
    fn accepted_and_rejected_events() {
        let store = EventStore::in_memory();
        store.record(ev("e1", Some("search:aa"))).unwrap();
        store.record(ev("e2", None)).unwrap();
        let c = store.counters();
        assert_eq!((c.valid, c.total), (1, 2));
    }

    #[test]
    fn chosen_must_be_shown() {
        let store = EventStore::in_memory();
        assert!(matches!(
            store.record(ev("e1", Some("search:zz"))),
            Err(ServiceError::Validation(_))
        ));
        let mut empty = ev("e2", None);
        empty.shown.clear();
        assert!(matches!(
            store.record(empty),
            Err(ServiceError::Validation(_))
        ));
        assert!(store.is_empty());
    }

    #[test]
    fn replay_is_idempotent_and_conflicts_detected() {
        let store = EventStore::in_memory();
        assert!(!store.record(ev("e1", Some("search:aa"))).unwrap().duplicate);
        assert!(store.record(ev("e1", Some("search:aa"))).unwrap().duplicate);
        assert_eq!(store.counters().total, 1);
        assert!(matches!(
            store.record(ev("e1", None)),
            Err(ServiceError::Conflict(_))
        ));
    }

    #[test]
    fn reopen_replays_counters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let store = EventStore::open(&path).unwrap();
            store.record(ev("e1", Some("search:aa"))).unwrap();
            store.record(ev("e2", None)).unwrap();
            store.record(ev("e1", Some("search:aa"))).unwrap();
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let store = EventStore::open(&path).unwrap();
        assert_eq!(store.counters(), AcceptanceStats::new(1, 2));
        assert_eq!(read_log(&path).unwrap(), store.events());
    }

    #[test]
    fn torn_tail_is_dropped_and_compacted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut text = serde_json::to_string(&ev("e1", None)).unwrap();
        text.push('\n');
        text.push_str(&serde_json::to_string(&ev("e1", None)).unwrap());
        text.push('\n');
        text.push_str("{\"event_id\":\"e2\",\"api");
        fs::write(&path, text).unwrap();
        let store = EventStore::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1);
        store.record(ev("e2", Some("search:aa"))).unwrap();
        drop(store);
        assert_eq!(
            EventStore::open(&path).unwrap().counters(),
            AcceptanceStats::new(1, 2)
        );
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        fs::write(
            &path,
            format!(
                "garbage\n{}\n",
                serde_json::to_string(&ev("e1", None)).unwrap()
            ),
        )
        .unwrap();
        assert!(EventStore::open(&path).is_err());
    }

    #[test]
    fn periodic_compaction_keeps_every_event() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let store = EventStore::open_with(&path, 3).unwrap();
        for i in 0..7 {
            store.record(ev(&format!("e{i}"), None)).unwrap();
        }
        drop(store);
        assert_eq!(EventStore::open(&path).unwrap().len(), 7);
    }

    #[test]
    fn field_parsing() {
        assert_eq!("Description".parse::<Field>().unwrap(), Field::Description);
        assert_eq!("example".parse::<Field>().unwrap(), Field::Example);
        assert!("colour".parse::<Field>().is_err());
        let json = serde_json::to_string(&ev("e1", None)).unwrap();
        assert!(json.contains("\"field\":\"description\""));
        assert!(json.contains("\"chosen\":null"));
    }
}
