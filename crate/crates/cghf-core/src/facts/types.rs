use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

/// One raw measurement on an information stream. Streams are identified by
/// the raw topic they arrive on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub stream_id: String,
    pub timestamp: i64,
    pub value: f64,
    pub unit: String,
}

/// A statement about one entity attribute, live until its ttl lapses.
/// At most one fact per (subject, attribute) is live at a time; a newer
/// assertion supersedes the older one.
///
/// The serialized form uses exactly these keys: `fact_id`, `subject`,
/// `attribute`, `value`, `asserted_at`, `ttl_ms`, `provenance`. Provenance
/// entries are strings: `stream:<stream_id>@<window_ms>ms` for pipeline
/// facts, `rule:<name>` for inferred facts, `bootstrap:<origin>` for
/// topology facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: String,
    pub subject: String,
    pub attribute: String,
    pub value: Value,
    pub asserted_at: i64,
    pub ttl_ms: u64,
    pub provenance: Vec<String>,
}

impl Fact {
    /// Expiry is strict: dead once `asserted_at + ttl_ms < now`.
    pub fn expired_at(&self, now: i64) -> bool {
        self.asserted_at.saturating_add(self.ttl_ms as i64) < now
    }

    /// Bus topic a fact is announced on.
    pub fn topic(&self) -> String {
        format!("facts/{}/{}", self.subject, self.attribute)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactsError {
    #[error("timestamp {got} precedes last ingested {last} on stream {stream}")]
    TimestampRegression { stream: String, last: i64, got: i64 },
    #[error("stream {stream}: {have} samples in window, {need} required")]
    InsufficientSamples { stream: String, need: usize, have: usize },
    #[error("stream {stream}: first half-window mean is zero")]
    DivisionByZero { stream: String },
    #[error("unknown stream {0}")]
    UnknownStream(String),
}

impl FactsError {
    pub fn name(&self) -> &'static str {
        match self {
            FactsError::TimestampRegression { .. } => "TimestampRegression",
            FactsError::InsufficientSamples { .. } => "InsufficientSamples",
            FactsError::DivisionByZero { .. } => "DivisionByZero",
            FactsError::UnknownStream(_) => "UnknownStream",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fact_serialized_key_order() {
        let fact = Fact {
            fact_id: "gf-1".into(),
            subject: "AP1".into(),
            attribute: "density_above_90".into(),
            value: Value::Bool(true),
            asserted_at: 61_000,
            ttl_ms: 30_000,
            provenance: vec!["stream:raw/ap/AP1/density@60000ms".into()],
        };
        let json = serde_json::to_string(&fact).unwrap();
        assert_eq!(
            json,
            r#"{"fact_id":"gf-1","subject":"AP1","attribute":"density_above_90","value":true,"asserted_at":61000,"ttl_ms":30000,"provenance":["stream:raw/ap/AP1/density@60000ms"]}"#
        );
        let back: Fact = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fact);
    }

    #[test]
    fn fact_expiry_boundary() {
        let fact = Fact {
            fact_id: "f".into(),
            subject: "s".into(),
            attribute: "a".into(),
            value: Value::Number(1.0),
            asserted_at: 0,
            ttl_ms: 1000,
            provenance: vec![],
        };
        assert!(!fact.expired_at(999));
        assert!(!fact.expired_at(1000), "asserted_at + ttl == now is still live");
        assert!(fact.expired_at(1001));
    }
}
