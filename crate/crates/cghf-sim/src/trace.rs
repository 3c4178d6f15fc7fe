//! The event log: one JSON object per line, each tagged with `kind`. A run
//! writes every record it produces; metrics and replay work from these
//! lines alone.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use cghf_core::{Envelope, Fact};
use serde::{Deserialize, Serialize};

use crate::nf::ActionRecord;
use crate::scenario::{Result, ScriptEvent, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    RunMeta {
        scenario: String,
        seed: u64,
        tick_ms: u64,
        duration_s: u64,
    },
    Event {
        at_ms: i64,
        event: ScriptEvent,
    },
    Envelope {
        at_ms: i64,
        envelope: Envelope,
    },
    Fact {
        at_ms: i64,
        fact: Fact,
    },
    Context {
        at_ms: i64,
        rule: String,
        matched_facts: Vec<String>,
        envelope: Envelope,
    },
    Action {
        at_ms: i64,
        #[serde(flatten)]
        record: ActionRecord,
    },
    Diagnostic {
        at_ms: i64,
        origin: String,
        detail: String,
    },
    BusDrops {
        at_ms: i64,
        total: u64,
        per_subscription: BTreeMap<String, u64>,
    },
}

impl LogRecord {
    pub fn at_ms(&self) -> i64 {
        match self {
            LogRecord::RunMeta { .. } => 0,
            LogRecord::Event { at_ms, .. }
            | LogRecord::Envelope { at_ms, .. }
            | LogRecord::Fact { at_ms, .. }
            | LogRecord::Context { at_ms, .. }
            | LogRecord::Action { at_ms, .. }
            | LogRecord::Diagnostic { at_ms, .. }
            | LogRecord::BusDrops { at_ms, .. } => *at_ms,
        }
    }
}

/// Render the whole log as newline-delimited JSON.
pub fn to_ndjson(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_ndjson(records: &[LogRecord], mut w: impl Write) -> std::io::Result<()> {
    w.write_all(to_ndjson(records).as_bytes())
}

/// Parse a saved log, reporting the first malformed line.
pub fn read_ndjson(r: impl BufRead) -> Result<Vec<LogRecord>> {
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line)
            .map_err(|e| SimError::MalformedLog { line: i + 1, detail: e.to_string() })?;
        records.push(rec);
    }
    Ok(records)
}
