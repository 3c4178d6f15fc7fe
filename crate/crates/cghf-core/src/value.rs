//! Scalar values carried by facts and envelope payload fields.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A scalar: boolean, IEEE double, or string. Entity references are carried
/// as their id string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Str(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Number(_) => "number",
            Value::Str(_) => "string",
        }
    }

    /// Unambiguous rendering used in binding fingerprints: strings keep
    /// their quotes so `"1"` and `1` stay distinct.
    pub fn canonical(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => n.to_string(),
            Value::Str(s) => format!("{s:?}"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

/// An envelope payload field. Plain telemetry uses scalars; context and fact
/// envelopes additionally carry one level of structure (`fields` maps,
/// `matched_facts`/`provenance` lists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadValue {
    Scalar(Value),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl PayloadValue {
    pub fn as_scalar(&self) -> Option<&Value> {
        match self {
            PayloadValue::Scalar(v) => Some(v),
            _ => None,
        }
    }
}

impl<T: Into<Value>> From<T> for PayloadValue {
    fn from(v: T) -> Self {
        PayloadValue::Scalar(v.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untagged_json_round_trip() {
        let cases = [
            (PayloadValue::from(12.5), "12.5"),
            (PayloadValue::from(true), "true"),
            (PayloadValue::from("Mbps"), "\"Mbps\""),
            (
                PayloadValue::List(vec![Value::from("f-1"), Value::from("f-2")]),
                "[\"f-1\",\"f-2\"]",
            ),
        ];
        for (v, expect) in cases {
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, expect);
            let back: PayloadValue = serde_json::from_str(&json).unwrap();
            assert_eq!(back, v);
        }
    }

    #[test]
    fn json_integers_deserialize_as_numbers() {
        let v: Value = serde_json::from_str("7").unwrap();
        assert_eq!(v, Value::Number(7.0));
    }

    #[test]
    fn canonical_distinguishes_string_from_number() {
        assert_ne!(Value::from("1").canonical(), Value::from(1.0).canonical());
    }
}
