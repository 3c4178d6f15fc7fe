//! Topic names and subscription patterns.
//!
//! Topics are slash-separated segment paths (`raw/cell/c1/throughput`).
//! Patterns use the same syntax plus `*` for exactly one segment and a
//! trailing `#` for the remaining zero or more segments.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bus::BusError;

/// A concrete topic: one or more non-empty segments, none containing
/// `/`, `*`, or `#`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Topic {
    raw: String,
}

impl Topic {
    pub fn parse(raw: &str) -> Result<Topic, BusError> {
        if raw.is_empty() {
            return Err(BusError::MalformedTopic(format!("empty topic {raw:?}")));
        }
        for seg in raw.split('/') {
            if seg.is_empty() {
                return Err(BusError::MalformedTopic(format!(
                    "empty segment in topic {raw:?}"
                )));
            }
            if seg.contains(['*', '#']) {
                return Err(BusError::MalformedTopic(format!(
                    "wildcard character in topic {raw:?}"
                )));
            }
        }
        Ok(Topic { raw: raw.to_string() })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.raw.split('/')
    }

    /// First segment, e.g. `raw` for `raw/cell/c1/throughput`.
    pub fn root(&self) -> &str {
        self.raw.split('/').next().unwrap_or("")
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl Serialize for Topic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Topic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Topic::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatSeg {
    Literal(String),
    /// `*`: exactly one segment.
    Any,
}

/// A subscription pattern. `rest` marks a trailing `#`, matching the
/// remaining zero or more segments; it is only valid as the final element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPattern {
    raw: String,
    segs: Vec<PatSeg>,
    rest: bool,
}

impl TopicPattern {
    pub fn parse(raw: &str) -> Result<TopicPattern, BusError> {
        if raw.is_empty() {
            return Err(BusError::MalformedPattern(format!("empty pattern {raw:?}")));
        }
        let parts: Vec<&str> = raw.split('/').collect();
        let mut segs = Vec::new();
        let mut rest = false;
        for (i, part) in parts.iter().enumerate() {
            if rest {
                return Err(BusError::MalformedPattern(format!(
                    "`#` must be the final element in pattern {raw:?}"
                )));
            }
            match *part {
                "" => {
                    return Err(BusError::MalformedPattern(format!(
                        "empty segment in pattern {raw:?}"
                    )))
                }
                "*" => segs.push(PatSeg::Any),
                "#" => {
                    let _ = i;
                    rest = true;
                }
                lit => {
                    if lit.contains(['*', '#']) {
                        return Err(BusError::MalformedPattern(format!(
                            "wildcard inside literal segment in pattern {raw:?}"
                        )));
                    }
                    segs.push(PatSeg::Literal(lit.to_string()));
                }
            }
        }
        Ok(TopicPattern { raw: raw.to_string(), segs, rest })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn matches(&self, topic: &Topic) -> bool {
        let topic_segs: Vec<&str> = topic.segments().collect();
        if topic_segs.len() < self.segs.len() {
            return false;
        }
        if topic_segs.len() > self.segs.len() && !self.rest {
            return false;
        }
        for (pat, seg) in self.segs.iter().zip(topic_segs.iter()) {
            match pat {
                PatSeg::Any => {}
                PatSeg::Literal(lit) => {
                    if lit != seg {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// True when every topic matched by `other` is also matched by `self`.
    pub fn contains(&self, other: &TopicPattern) -> bool {
        let mut i = 0;
        let mut j = 0;
        loop {
            match (self.segs.get(i), other.segs.get(j)) {
                (Some(PatSeg::Literal(a)), Some(PatSeg::Literal(b))) => {
                    if a != b {
                        return false;
                    }
                    i += 1;
                    j += 1;
                }
                // A literal here cannot cover `*` (which admits other values).
                (Some(PatSeg::Literal(_)), Some(PatSeg::Any)) => return false,
                (Some(PatSeg::Any), Some(_)) => {
                    i += 1;
                    j += 1;
                }
                (None, None) => return self.rest || !other.rest,
                // `self` exhausted: only a trailing `#` covers the remainder,
                // including the other pattern's own `#`.
                (None, Some(_)) => return self.rest,
                // `other` exhausted: if other ends in `#` it matches deeper
                // topics than self's remaining fixed segments allow; if not,
                // self still demands more segments than other supplies.
                (Some(_), None) => return false,
            }
        }
    }

    /// Longest leading run of literal segments.
    pub fn fixed_prefix(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for seg in &self.segs {
            match seg {
                PatSeg::Literal(lit) => out.push(lit.as_str()),
                PatSeg::Any => break,
            }
        }
        out
    }
}

impl fmt::Display for TopicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl Serialize for TopicPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for TopicPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        TopicPattern::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Topic {
        Topic::parse(s).unwrap()
    }

    fn p(s: &str) -> TopicPattern {
        TopicPattern::parse(s).unwrap()
    }

    #[test]
    fn rejects_malformed_topics() {
        for bad in ["", "/", "a//b", "a/", "/a", "a/*/b", "a/#", "ra*w"] {
            assert!(Topic::parse(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn rejects_malformed_patterns() {
        for bad in ["", "#/a", "a/#/b", "a/x#", "a//b", "*a/b"] {
            assert!(TopicPattern::parse(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn wildcard_matching() {
        assert!(p("raw/cell/*/throughput").matches(&t("raw/cell/c1/throughput")));
        assert!(!p("raw/cell/*/throughput").matches(&t("raw/cell/c1/x/throughput")));
        assert!(p("context/#").matches(&t("context/congestion/regionY")));
        assert!(p("context/#").matches(&t("context")));
        assert!(!p("context/#").matches(&t("raw/cell")));
        assert!(p("#").matches(&t("anything/at/all")));
        assert!(p("a/b").matches(&t("a/b")));
        assert!(!p("a/b").matches(&t("a/b/c")));
        assert!(!p("a/*").matches(&t("a")));
    }

    #[test]
    fn containment() {
        assert!(p("context/#").contains(&p("context/congestion/*")));
        assert!(p("context/#").contains(&p("context/#")));
        assert!(p("#").contains(&p("facts/#")));
        assert!(!p("context/congestion/*").contains(&p("context/#")));
        assert!(!p("context/a").contains(&p("context/*")));
        assert!(p("context/*").contains(&p("context/a")));
        assert!(!p("facts/#").contains(&p("context/#")));
        assert!(p("a/*/c").contains(&p("a/b/c")));
        assert!(!p("a/b/c").contains(&p("a/b")));
        assert!(!p("a/b").contains(&p("a/b/#")));
    }

    #[test]
    fn fixed_prefix_stops_at_wildcard() {
        assert_eq!(p("context/congestion/*").fixed_prefix(), vec!["context", "congestion"]);
        assert_eq!(p("context/#").fixed_prefix(), vec!["context"]);
        assert!(p("#").fixed_prefix().is_empty());
        assert!(p("*/x").fixed_prefix().is_empty());
    }
}
