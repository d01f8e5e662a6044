//! PREMIS-style preservation event log: append-only, strictly increasing
//! ids, one canonical-JSON line per event.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canon;
use crate::error::{Error, Result};
use crate::store::Pid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventType {
    #[serde(rename = "ingest")]
    Ingest,
    #[serde(rename = "fixity-check")]
    FixityCheck,
    #[serde(rename = "migration")]
    Migration,
    #[serde(rename = "validation")]
    Validation,
    #[serde(rename = "extraction")]
    Extraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventOutcome {
    Success,
    Failure,
}

/// A log entry: what happened to which object, by whom, with what outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservationEvent {
    pub id: u64,
    pub pid: Pid,
    pub event_type: EventType,
    pub occurred_at: String,
    pub agent: String,
    pub outcome: EventOutcome,
    pub detail: String,
}

/// Append-only event log backed by `events.jsonl`.
#[derive(Debug)]
pub struct EventLog {
    path: Option<PathBuf>,
    events: Vec<PreservationEvent>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog {
            path: None,
            events: Vec::new(),
        }
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("events.jsonl");
        let mut events = Vec::new();
        if path.exists() {
            for (lineno, line) in fs::read_to_string(&path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let event: PreservationEvent = serde_json::from_str(line)
                    .map_err(|e| Error::Parse(format!("events.jsonl line {}: {e}", lineno + 1)))?;
                events.push(event);
            }
        }
        Ok(EventLog {
            path: Some(path),
            events,
        })
    }

    /// Append an event; returns its id. Events are immutable thereafter.
    pub fn record(
        &mut self,
        pid: &Pid,
        event_type: EventType,
        outcome: EventOutcome,
        agent: &str,
        detail: &str,
    ) -> Result<u64> {
        let id = self.events.last().map_or(1, |e| e.id + 1);
        let event = PreservationEvent {
            id,
            pid: pid.clone(),
            event_type,
            occurred_at: canon::now_rfc3339(),
            agent: agent.to_string(),
            outcome,
            detail: detail.to_string(),
        };
        if let Some(path) = &self.path {
            let mut file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?;
            file.write_all(canon::to_canonical_json_line(&event)?.as_bytes())?;
        }
        self.events.push(event);
        Ok(id)
    }

    /// Events for one pid, in id order.
    pub fn events_for(&self, pid: &Pid) -> Vec<&PreservationEvent> {
        self.events.iter().filter(|e| &e.pid == pid).collect()
    }

    pub fn all(&self) -> &[PreservationEvent] {
        &self.events
    }

    pub fn get(&self, id: u64) -> Option<&PreservationEvent> {
        self.events.iter().find(|e| e.id == id)
    }
}
