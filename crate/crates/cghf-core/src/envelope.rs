//! The unit of exchange on the bus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::topic::Topic;
use crate::value::PayloadValue;

/// A published message. `msg_id` is assigned by the publishing bus and is
/// unique across that bus's lifetime and across federated peers.
///
/// The serialized form (one JSON object per line in traces and on the
/// northbound wire) uses exactly these keys: `topic`, `source`, `ts`, `seq`,
/// `payload`, `ttl_ms` (omitted when absent), `msg_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: Topic,
    pub source: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    pub seq: u64,
    pub payload: BTreeMap<String, PayloadValue>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ttl_ms: Option<u64>,
    pub msg_id: String,
}

impl Envelope {
    /// Expiry is strict: an envelope is dead once `ts + ttl_ms < now`.
    pub fn expired_at(&self, now: i64) -> bool {
        match self.ttl_ms {
            Some(ttl) => self.timestamp.saturating_add(ttl as i64) < now,
            None => false,
        }
    }
}

/// Publish input: everything but the bus-assigned `msg_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDraft {
    pub topic: String,
    pub source: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    pub seq: u64,
    pub payload: BTreeMap<String, PayloadValue>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ttl_ms: Option<u64>,
}

impl EnvelopeDraft {
    pub fn new(topic: &str, source: &str, timestamp: i64, seq: u64) -> Self {
        EnvelopeDraft {
            topic: topic.to_string(),
            source: source.to_string(),
            timestamp,
            seq,
            payload: BTreeMap::new(),
            ttl_ms: None,
        }
    }

    pub fn field(mut self, name: &str, value: impl Into<PayloadValue>) -> Self {
        self.payload.insert(name.to_string(), value.into());
        self
    }

    pub fn ttl(mut self, ttl_ms: u64) -> Self {
        self.ttl_ms = Some(ttl_ms);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    #[test]
    fn serialized_key_order_is_stable() {
        let env = Envelope {
            topic: Topic::parse("raw/cell/c1/throughput").unwrap(),
            source: "access-nf-Y".into(),
            timestamp: 1000,
            seq: 3,
            payload: BTreeMap::from([
                ("unit".to_string(), PayloadValue::from("Mbps")),
                ("value".to_string(), PayloadValue::from(612.5)),
            ]),
            ttl_ms: Some(5000),
            msg_id: "bus-1".into(),
        };
        let json = serde_json::to_string(&env).unwrap();
        assert_eq!(
            json,
            r#"{"topic":"raw/cell/c1/throughput","source":"access-nf-Y","ts":1000,"seq":3,"payload":{"unit":"Mbps","value":612.5},"ttl_ms":5000,"msg_id":"bus-1"}"#
        );
        let back: Envelope = serde_json::from_str(&json).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn ttl_ms_key_omitted_when_absent() {
        let env = Envelope {
            topic: Topic::parse("a/b").unwrap(),
            source: "s".into(),
            timestamp: 0,
            seq: 1,
            payload: BTreeMap::new(),
            ttl_ms: None,
            msg_id: "m".into(),
        };
        let json = serde_json::to_string(&env).unwrap();
        assert!(!json.contains("ttl_ms"));
    }

    #[test]
    fn expiry_boundary_is_strict() {
        let mut env = Envelope {
            topic: Topic::parse("a").unwrap(),
            source: "s".into(),
            timestamp: 1000,
            seq: 1,
            payload: BTreeMap::from([("value".to_string(), PayloadValue::Scalar(Value::Number(1.0)))]),
            ttl_ms: Some(1000),
            msg_id: "m".into(),
        };
        assert!(!env.expired_at(2000), "ts + ttl == now is still live");
        assert!(env.expired_at(2001));
        env.ttl_ms = None;
        assert!(!env.expired_at(i64::MAX));
    }
}
