use std::collections::BTreeMap;

use crate::facts::Fact;

/// Working memory: the newest fact per (subject, attribute) pair.
/// Asserting a pair that already exists supersedes the old fact.
#[derive(Debug, Default, Clone)]
pub struct KnowledgeBase {
    facts: BTreeMap<(String, String), Fact>,
}

impl KnowledgeBase {
    pub fn new() -> KnowledgeBase {
        KnowledgeBase::default()
    }

    /// Insert a fact, returning the one it superseded, if any.
    pub fn assert_fact(&mut self, fact: Fact) -> Option<Fact> {
        self.facts
            .insert((fact.subject.clone(), fact.attribute.clone()), fact)
    }

    pub fn get(&self, subject: &str, attribute: &str) -> Option<&Fact> {
        self.facts.get(&(subject.to_string(), attribute.to_string()))
    }

    pub fn remove(&mut self, subject: &str, attribute: &str) -> Option<Fact> {
        self.facts.remove(&(subject.to_string(), attribute.to_string()))
    }

    /// Drop every fact whose ttl has lapsed at `now`; returns what was removed.
    pub fn retract_expired(&mut self, now: i64) -> Vec<Fact> {
        let expired: Vec<(String, String)> = self
            .facts
            .iter()
            .filter(|(_, f)| f.expired_at(now))
            .map(|(k, _)| k.clone())
            .collect();
        expired
            .into_iter()
            .filter_map(|k| self.facts.remove(&k))
            .collect()
    }

    /// Facts in deterministic (subject, attribute) order.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn fact(id: &str, s: &str, a: &str, v: f64, at: i64, ttl: u64) -> Fact {
        Fact {
            fact_id: id.to_string(),
            subject: s.to_string(),
            attribute: a.to_string(),
            value: Value::Number(v),
            asserted_at: at,
            ttl_ms: ttl,
            provenance: Vec::new(),
        }
    }

    #[test]
    fn newest_fact_supersedes() {
        let mut kb = KnowledgeBase::new();
        assert!(kb.assert_fact(fact("f1", "c1", "load", 1.0, 0, 1000)).is_none());
        let old = kb.assert_fact(fact("f2", "c1", "load", 2.0, 5, 1000)).unwrap();
        assert_eq!(old.fact_id, "f1");
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.get("c1", "load").unwrap().fact_id, "f2");
    }

    #[test]
    fn expiry_is_strict() {
        let mut kb = KnowledgeBase::new();
        kb.assert_fact(fact("f1", "c1", "load", 1.0, 0, 1000));
        assert!(kb.retract_expired(1000).is_empty(), "alive through ts + ttl");
        let gone = kb.retract_expired(1001);
        assert_eq!(gone.len(), 1);
        assert!(kb.is_empty());
    }

    #[test]
    fn iteration_order_is_sorted() {
        let mut kb = KnowledgeBase::new();
        kb.assert_fact(fact("f1", "b", "y", 1.0, 0, 1000));
        kb.assert_fact(fact("f2", "a", "z", 1.0, 0, 1000));
        kb.assert_fact(fact("f3", "a", "k", 1.0, 0, 1000));
        let order: Vec<&str> = kb.facts().map(|f| f.fact_id.as_str()).collect();
        assert_eq!(order, vec!["f3", "f2", "f1"]);
    }
}
