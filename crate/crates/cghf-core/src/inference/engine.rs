use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bus::Bus;
use crate::envelope::{Envelope, EnvelopeDraft};
use crate::facts::Fact;
use crate::rules::ast::{Action, FactPattern, Rule, Term, TopicSeg};
use crate::rules::eval::{eval, eval_condition, Bindings};
use crate::topic::Topic;
use crate::value::{PayloadValue, Value};

use super::kb::KnowledgeBase;

/// Cap on rule firings per cycle; reaching it flags the report instead of
/// spinning forever on a self-feeding ruleset.
pub const FIRING_BUDGET: usize = 1000;

/// A context the engine published during a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub envelope: Envelope,
    pub rule: String,
    pub matched_facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Firing {
    pub rule: String,
    pub matched_facts: Vec<String>,
    pub at: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineDiagnostic {
    pub rule: String,
    pub detail: String,
}

/// Everything one `run_cycle` call did.
#[derive(Debug, Default, Clone)]
pub struct CycleReport {
    pub contexts: Vec<Context>,
    pub asserted: Vec<Fact>,
    pub retracted: Vec<Fact>,
    pub fired: Vec<Firing>,
    pub budget_exceeded: bool,
    pub diagnostics: Vec<EngineDiagnostic>,
}

struct Activation {
    rule_index: usize,
    rule_name: String,
    priority: i64,
    bindings: Bindings,
    matched: Vec<String>,
    /// Newest asserted_at among the matched facts; refraction compares on it.
    newest: i64,
    fingerprint: String,
}

/// The rule engine. It owns working memory and publishes what it derives
/// on the bus: contexts on the rule's `context/...` topic, inferred facts
/// on `facts/<subject>/<attribute>`.
pub struct Engine {
    kb: KnowledgeBase,
    /// (rule name, binding fingerprint) -> newest evidence already fired on.
    refraction: BTreeMap<(String, String), i64>,
    bus: Arc<Bus>,
    source: String,
    seq: BTreeMap<String, u64>,
    next_fact: u64,
    budget: usize,
}

impl Engine {
    pub fn new(bus: Arc<Bus>) -> Engine {
        Engine {
            kb: KnowledgeBase::new(),
            refraction: BTreeMap::new(),
            bus,
            source: "cghf-engine".to_string(),
            seq: BTreeMap::new(),
            next_fact: 0,
            budget: FIRING_BUDGET,
        }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    /// Put an externally produced fact (pipeline output, bootstrap data)
    /// into working memory without announcing it; the producer already did.
    pub fn ingest_fact(&mut self, fact: Fact) -> Option<Fact> {
        self.kb.assert_fact(fact)
    }

    /// Match, resolve, fire, repeat until no activation is eligible or the
    /// firing budget runs out.
    pub fn run_cycle(&mut self, rules: &[Rule], now: i64) -> CycleReport {
        let mut report = CycleReport::default();
        report.retracted = self.kb.retract_expired(now);
        let mut firings = 0usize;
        loop {
            let mut eligible: Vec<Activation> = Vec::new();
            for (i, rule) in rules.iter().enumerate() {
                for activation in self.match_rule(i, rule) {
                    let blocked = self
                        .refraction
                        .get(&(activation.rule_name.clone(), activation.fingerprint.clone()))
                        .is_some_and(|&fired_on| activation.newest <= fired_on);
                    if !blocked {
                        eligible.push(activation);
                    }
                }
            }
            if eligible.is_empty() {
                break;
            }
            if firings >= self.budget {
                report.budget_exceeded = true;
                break;
            }
            eligible.sort_by(|a, b| {
                b.priority
                    .cmp(&a.priority)
                    .then(b.newest.cmp(&a.newest))
                    .then(a.rule_name.cmp(&b.rule_name))
                    .then(a.fingerprint.cmp(&b.fingerprint))
            });
            let chosen = eligible.remove(0);
            self.refraction.insert(
                (chosen.rule_name.clone(), chosen.fingerprint.clone()),
                chosen.newest,
            );
            self.fire(&rules[chosen.rule_index], &chosen, now, &mut report);
            firings += 1;
        }
        report
    }

    /// All complete, condition-passing matches of one rule against working
    /// memory. A nested-loop join; fact iteration order is deterministic.
    fn match_rule(&self, rule_index: usize, rule: &Rule) -> Vec<Activation> {
        let mut partials: Vec<(Bindings, Vec<&Fact>)> = vec![(Bindings::new(), Vec::new())];
        for pattern in &rule.patterns {
            let mut extended = Vec::new();
            for (bindings, matched) in &partials {
                for fact in self.kb.facts() {
                    if let Some(next) = match_pattern(pattern, fact, bindings) {
                        let mut m = matched.clone();
                        m.push(fact);
                        extended.push((next, m));
                    }
                }
            }
            if extended.is_empty() {
                return Vec::new();
            }
            partials = extended;
        }
        let mut activations = Vec::new();
        for (bindings, matched) in partials {
            if let Some(cond) = &rule.condition {
                // A condition that errors or is false simply produces no
                // activation; bad bindings are not the engine's problem.
                if !matches!(eval_condition(cond, &bindings), Ok(true)) {
                    continue;
                }
            }
            let newest = matched.iter().map(|f| f.asserted_at).max().unwrap_or(0);
            let fingerprint = fingerprint_of(&bindings);
            activations.push(Activation {
                rule_index,
                rule_name: rule.name.node.clone(),
                priority: rule.priority,
                bindings,
                matched: matched.iter().map(|f| f.fact_id.clone()).collect(),
                newest,
                fingerprint,
            });
        }
        activations
    }

    fn fire(&mut self, rule: &Rule, activation: &Activation, now: i64, report: &mut CycleReport) {
        report.fired.push(Firing {
            rule: activation.rule_name.clone(),
            matched_facts: activation.matched.clone(),
            at: now,
        });
        for action in &rule.actions {
            match action {
                Action::Publish(template) => {
                    self.fire_publish(rule, template, activation, now, report)
                }
                Action::Assert(template) => {
                    self.fire_assert(rule, template, activation, now, report)
                }
            }
        }
    }

    fn fire_publish(
        &mut self,
        rule: &Rule,
        template: &crate::rules::ast::PublishTemplate,
        activation: &Activation,
        now: i64,
        report: &mut CycleReport,
    ) {
        let mut segments = Vec::with_capacity(template.segments.len());
        for seg in &template.segments {
            match seg {
                TopicSeg::Lit(s) => segments.push(s.clone()),
                TopicSeg::Var(v) => match activation.bindings.get(&v.node) {
                    Some(value) => {
                        let seg = segment_form(value);
                        // A bound value must stay one segment; a `/` inside
                        // it would splice extra levels into the topic.
                        if seg.is_empty() || seg.contains('/') || seg == "*" || seg == "#" {
                            report.diagnostics.push(EngineDiagnostic {
                                rule: activation.rule_name.clone(),
                                detail: format!(
                                    "publish: ${} = `{seg}` is not a valid topic segment",
                                    v.node
                                ),
                            });
                            return;
                        }
                        segments.push(seg);
                    }
                    None => {
                        report.diagnostics.push(EngineDiagnostic {
                            rule: activation.rule_name.clone(),
                            detail: format!("publish: unbound variable ${}", v.node),
                        });
                        return;
                    }
                },
            }
        }
        let raw_topic = segments.join("/");
        if let Err(e) = Topic::parse(&raw_topic) {
            report.diagnostics.push(EngineDiagnostic {
                rule: activation.rule_name.clone(),
                detail: format!("publish: interpolated topic `{raw_topic}`: {e}"),
            });
            return;
        }
        let mut fields = BTreeMap::new();
        for (name, expr) in &template.fields {
            match eval(expr, &activation.bindings) {
                Ok(v) => {
                    fields.insert(name.node.clone(), v);
                }
                Err(e) => {
                    report.diagnostics.push(EngineDiagnostic {
                        rule: activation.rule_name.clone(),
                        detail: format!("publish field `{}`: {e}", name.node),
                    });
                    return;
                }
            }
        }
        let mut payload: BTreeMap<String, PayloadValue> = BTreeMap::new();
        payload.insert("fields".to_string(), PayloadValue::Map(fields));
        payload.insert("rule".to_string(), Value::Str(activation.rule_name.clone()).into());
        payload.insert(
            "matched_facts".to_string(),
            PayloadValue::List(
                activation.matched.iter().map(|id| Value::Str(id.clone())).collect(),
            ),
        );
        payload.insert("ttl_ms".to_string(), Value::Number(rule.ttl_ms as f64).into());

        let seq = self.next_seq(&raw_topic);
        let mut draft = EnvelopeDraft::new(&raw_topic, &self.source, now, seq).ttl(rule.ttl_ms);
        for (k, v) in &payload {
            draft = draft.field(k, v.clone());
        }
        match self.bus.publish(draft) {
            Ok(receipt) => {
                let envelope = Envelope {
                    topic: Topic::parse(&raw_topic).expect("validated above"),
                    source: self.source.clone(),
                    timestamp: now,
                    seq,
                    payload,
                    ttl_ms: Some(rule.ttl_ms),
                    msg_id: receipt.msg_id,
                };
                report.contexts.push(Context {
                    envelope,
                    rule: activation.rule_name.clone(),
                    matched_facts: activation.matched.clone(),
                });
            }
            Err(e) => report.diagnostics.push(EngineDiagnostic {
                rule: activation.rule_name.clone(),
                detail: format!("publish on `{raw_topic}`: {e}"),
            }),
        }
    }

    fn fire_assert(
        &mut self,
        _rule: &Rule,
        template: &crate::rules::ast::AssertTemplate,
        activation: &Activation,
        now: i64,
        report: &mut CycleReport,
    ) {
        let subject = match &template.subject.node {
            Term::Lit(Value::Str(s)) => s.clone(),
            Term::Lit(other) => segment_form(other),
            Term::Var(v) => match activation.bindings.get(v) {
                Some(Value::Str(s)) => s.clone(),
                Some(other) => segment_form(other),
                None => {
                    report.diagnostics.push(EngineDiagnostic {
                        rule: activation.rule_name.clone(),
                        detail: format!("assert: unbound variable ${v}"),
                    });
                    return;
                }
            },
        };
        let value = match eval(&template.value, &activation.bindings) {
            Ok(v) => v,
            Err(e) => {
                report.diagnostics.push(EngineDiagnostic {
                    rule: activation.rule_name.clone(),
                    detail: format!("assert value: {e}"),
                });
                return;
            }
        };
        self.next_fact += 1;
        let fact = Fact {
            fact_id: format!("if-{}", self.next_fact),
            subject,
            attribute: template.attribute.node.clone(),
            value,
            asserted_at: now,
            ttl_ms: template.ttl_ms,
            provenance: vec![format!("rule:{}", activation.rule_name)],
        };
        if let Err(e) = self.announce_fact(&fact, now) {
            report.diagnostics.push(EngineDiagnostic {
                rule: activation.rule_name.clone(),
                detail: format!("announce fact on `{}`: {e}", fact.topic()),
            });
        }
        self.kb.assert_fact(fact.clone());
        report.asserted.push(fact);
    }

    fn announce_fact(&mut self, fact: &Fact, now: i64) -> Result<(), crate::bus::BusError> {
        let topic = fact.topic();
        Topic::parse(&topic)?;
        let seq = self.next_seq(&topic);
        let draft = EnvelopeDraft::new(&topic, &self.source, now, seq);
        let draft = fact_fields(fact)
            .into_iter()
            .fold(draft, |d, (k, v)| d.field(&k, v))
            .ttl(fact.ttl_ms);
        self.bus.publish(draft)?;
        Ok(())
    }

    fn next_seq(&mut self, topic: &str) -> u64 {
        let counter = self.seq.entry(topic.to_string()).or_insert(0);
        *counter += 1;
        *counter
    }
}

/// Payload of a fact announcement envelope.
pub fn fact_fields(fact: &Fact) -> BTreeMap<String, PayloadValue> {
    let mut payload = BTreeMap::new();
    payload.insert("fact_id".to_string(), Value::Str(fact.fact_id.clone()).into());
    payload.insert("subject".to_string(), Value::Str(fact.subject.clone()).into());
    payload.insert("attribute".to_string(), Value::Str(fact.attribute.clone()).into());
    payload.insert("value".to_string(), fact.value.clone().into());
    payload.insert("ttl_ms".to_string(), Value::Number(fact.ttl_ms as f64).into());
    payload.insert(
        "provenance".to_string(),
        PayloadValue::List(fact.provenance.iter().map(|p| Value::Str(p.clone())).collect()),
    );
    payload
}

/// How a bound value appears inside a topic path.
fn segment_form(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        other => other.to_string(),
    }
}

fn fingerprint_of(bindings: &Bindings) -> String {
    bindings
        .iter()
        .map(|(k, v)| format!("{k}={}", v.canonical()))
        .collect::<Vec<_>>()
        .join(",")
}

fn match_pattern(pattern: &FactPattern, fact: &Fact, bindings: &Bindings) -> Option<Bindings> {
    let mut next = bindings.clone();
    match &pattern.subject.node {
        Term::Lit(Value::Str(s)) => {
            if s != &fact.subject {
                return None;
            }
        }
        Term::Lit(_) => return None,
        Term::Var(v) => match next.get(v) {
            Some(Value::Str(bound)) if bound == &fact.subject => {}
            Some(_) => return None,
            None => {
                next.insert(v.clone(), Value::Str(fact.subject.clone()));
            }
        },
    }
    if pattern.attribute.node != fact.attribute {
        return None;
    }
    match &pattern.value.node {
        Term::Lit(lit) => {
            if lit != &fact.value {
                return None;
            }
        }
        Term::Var(v) => match next.get(v) {
            Some(bound) if bound == &fact.value => {}
            Some(_) => return None,
            None => {
                next.insert(v.clone(), fact.value.clone());
            }
        },
    }
    if let Some(alias) = &pattern.alias {
        next.insert(alias.node.clone(), Value::Str(fact.fact_id.clone()));
    }
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse;

    fn rules(src: &str) -> Vec<Rule> {
        parse(src).expect("test rules parse").rules
    }

    fn fact(id: &str, s: &str, a: &str, v: impl Into<Value>, at: i64) -> Fact {
        Fact {
            fact_id: id.to_string(),
            subject: s.to_string(),
            attribute: a.to_string(),
            value: v.into(),
            asserted_at: at,
            ttl_ms: 60_000,
            provenance: Vec::new(),
        }
    }

    fn engine() -> Engine {
        Engine::new(Bus::new("test"))
    }

    #[test]
    fn join_across_patterns_and_publish() {
        let rules = rules(
            r#"rule overload priority 5 ttl 60 s {
  when fact($c, "overloaded", true) as evidence
  and fact($c, "region", $r)
  then publish context/congestion/$r { cell: $c, region: $r, from: $evidence }
}"#,
        );
        let mut engine = engine();
        let sub = engine.bus.subscribe("context/#", "observer").unwrap();
        engine.ingest_fact(fact("f1", "c1", "overloaded", true, 100));
        engine.ingest_fact(fact("f2", "c1", "region", Value::Str("west".into()), 90));
        engine.ingest_fact(fact("f3", "c2", "region", Value::Str("east".into()), 90));
        let report = engine.run_cycle(&rules, 200);
        assert_eq!(report.fired.len(), 1, "only c1 satisfies both patterns");
        assert_eq!(report.contexts.len(), 1);
        let ctx = &report.contexts[0];
        assert_eq!(ctx.envelope.topic.as_str(), "context/congestion/west");
        assert_eq!(ctx.rule, "overload");
        assert_eq!(ctx.matched_facts, vec!["f1".to_string(), "f2".to_string()]);
        let delivered = engine.bus.poll(sub, 10, 200).unwrap();
        assert_eq!(delivered.len(), 1);
        assert_eq!(delivered[0].source, "cghf-engine");
        assert_eq!(delivered[0].ttl_ms, Some(60_000));
        let payload = serde_json::to_value(&delivered[0].payload).unwrap();
        assert_eq!(payload["fields"]["cell"], serde_json::json!("c1"));
        assert_eq!(payload["fields"]["from"], serde_json::json!("f1"));
        assert_eq!(payload["rule"], serde_json::json!("overload"));
        assert_eq!(payload["matched_facts"], serde_json::json!(["f1", "f2"]));
        assert_eq!(payload["ttl_ms"], serde_json::json!(60000.0));
    }

    #[test]
    fn refraction_blocks_refire_until_newer_evidence() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($c, "overloaded", true)
  then publish context/load/$c { cell: $c }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "overloaded", true, 100));
        assert_eq!(engine.run_cycle(&rules, 200).fired.len(), 1);
        assert_eq!(engine.run_cycle(&rules, 300).fired.len(), 0, "same evidence, no refire");
        // Same bindings but a fresher fact: fires again.
        engine.ingest_fact(fact("f9", "c1", "overloaded", true, 400));
        assert_eq!(engine.run_cycle(&rules, 500).fired.len(), 1);
    }

    #[test]
    fn conflict_resolution_order() {
        // Two rules match the same fact; higher priority fires first. A
        // tie on priority falls back to newest evidence, then rule name.
        let rules = rules(
            r#"rule b_low priority 1 ttl 5 s {
  when fact($c, "x", 1)
  then publish context/low/$c { cell: $c }
}
rule a_high priority 9 ttl 5 s {
  when fact($c, "x", 1)
  then publish context/high/$c { cell: $c }
}
rule a_low priority 1 ttl 5 s {
  when fact($c, "x", 1)
  then publish context/low2/$c { cell: $c }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "x", 1.0, 100));
        let report = engine.run_cycle(&rules, 200);
        let order: Vec<&str> = report.fired.iter().map(|f| f.rule.as_str()).collect();
        assert_eq!(order, vec!["a_high", "a_low", "b_low"]);
    }

    #[test]
    fn newer_evidence_outranks_within_same_priority() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($c, "x", 1)
  then publish context/t/$c { cell: $c }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "x", 1.0, 100));
        engine.ingest_fact(fact("f2", "c2", "x", 1.0, 150));
        let report = engine.run_cycle(&rules, 200);
        let topics: Vec<&str> =
            report.contexts.iter().map(|c| c.envelope.topic.as_str()).collect();
        assert_eq!(topics, vec!["context/t/c2", "context/t/c1"], "newest first");
    }

    #[test]
    fn chained_assertion_feeds_forward() {
        let rules = rules(
            r#"rule classify priority 5 ttl 60 s {
  when fact($c, "load", $v)
  where $v > 900
  then assert fact($c, "overloaded", true, ttl 60 s)
}
rule react priority 1 ttl 60 s {
  when fact($c, "overloaded", true)
  then publish context/overload/$c { cell: $c }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "load", 950.0, 100));
        let report = engine.run_cycle(&rules, 200);
        assert_eq!(report.fired.len(), 2, "assertion must trigger the second rule in-cycle");
        assert_eq!(report.asserted.len(), 1);
        assert_eq!(report.asserted[0].fact_id, "if-1");
        assert_eq!(report.asserted[0].provenance, vec!["rule:classify".to_string()]);
        assert_eq!(report.contexts.len(), 1);
        assert_eq!(report.contexts[0].envelope.topic.as_str(), "context/overload/c1");
        assert_eq!(engine.kb().get("c1", "overloaded").unwrap().value, Value::Bool(true));
    }

    #[test]
    fn asserted_facts_are_announced_on_the_bus() {
        let rules = rules(
            r#"rule classify priority 5 ttl 60 s {
  when fact($c, "load", $v)
  where $v > 900
  then assert fact($c, "overloaded", true, ttl 60 s)
}"#,
        );
        let mut engine = engine();
        let sub = engine.bus.subscribe("facts/#", "observer").unwrap();
        engine.ingest_fact(fact("f1", "c1", "load", 950.0, 100));
        engine.run_cycle(&rules, 200);
        let delivered = engine.bus.poll(sub, 10, 200).unwrap();
        assert_eq!(delivered.len(), 1);
        assert_eq!(delivered[0].topic.as_str(), "facts/c1/overloaded");
        let payload = serde_json::to_value(&delivered[0].payload).unwrap();
        assert_eq!(payload["fact_id"], serde_json::json!("if-1"));
        assert_eq!(payload["value"], serde_json::json!(true));
        assert_eq!(payload["provenance"], serde_json::json!(["rule:classify"]));
    }

    #[test]
    fn budget_stops_runaway_rulesets() {
        // Asserting with an alias binding regenerates a fresh fact id each
        // firing, so refraction never settles.
        let rules = rules(
            r#"rule spin priority 1 ttl 60 s {
  when fact($c, "counter", $v) as f
  then assert fact($c, "counter", $v + 1, ttl 60 s)
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "counter", 0.0, 100));
        let report = engine.run_cycle(&rules, 200);
        assert!(report.budget_exceeded);
        assert_eq!(report.fired.len(), FIRING_BUDGET);
        assert!(!report.asserted.is_empty(), "partial results are kept");
    }

    #[test]
    fn expired_facts_are_retracted_before_matching() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($c, "x", 1)
  then publish context/t/$c { cell: $c }
}"#,
        );
        let mut engine = engine();
        let mut f = fact("f1", "c1", "x", 1.0, 100);
        f.ttl_ms = 50;
        engine.ingest_fact(f);
        let report = engine.run_cycle(&rules, 200);
        assert_eq!(report.retracted.len(), 1);
        assert!(report.fired.is_empty());
        assert!(engine.kb().is_empty());
    }

    #[test]
    fn condition_errors_skip_the_activation_silently() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($c, "x", $v)
  where $v > 10
  then publish context/t/$c { cell: $c }
}"#,
        );
        let mut engine = engine();
        // $v binds to a string; `>` on string vs number is a type error.
        engine.ingest_fact(fact("f1", "c1", "x", Value::Str("high".into()), 100));
        let report = engine.run_cycle(&rules, 200);
        assert!(report.fired.is_empty());
        assert!(report.diagnostics.is_empty(), "condition failures are not diagnostics");
    }

    #[test]
    fn bad_interpolated_topic_is_a_diagnostic() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($c, "x", $v)
  then publish context/t/$v { cell: $c }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "x", Value::Str("a/b".into()), 100));
        let report = engine.run_cycle(&rules, 200);
        assert_eq!(report.fired.len(), 1, "the rule still counts as fired");
        assert!(report.contexts.is_empty());
        assert_eq!(report.diagnostics.len(), 1);
        assert!(
            report.diagnostics[0].detail.contains("not a valid topic segment"),
            "{}",
            report.diagnostics[0].detail
        );
    }

    #[test]
    fn same_fact_may_satisfy_two_patterns() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($a, "x", 1)
  and fact($b, "x", 1)
  then publish context/pair/$a/$b { a: $a, b: $b }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "x", 1.0, 100));
        let report = engine.run_cycle(&rules, 200);
        assert_eq!(report.fired.len(), 1);
        assert_eq!(report.contexts[0].envelope.topic.as_str(), "context/pair/c1/c1");
    }

    #[test]
    fn numeric_binding_interpolates_into_topic() {
        let rules = rules(
            r#"rule r priority 1 ttl 5 s {
  when fact($c, "x", $v)
  then publish context/t/$v { cell: $c }
}"#,
        );
        let mut engine = engine();
        engine.ingest_fact(fact("f1", "c1", "x", 7.0, 100));
        let report = engine.run_cycle(&rules, 200);
        assert_eq!(report.contexts[0].envelope.topic.as_str(), "context/t/7");
    }
}
