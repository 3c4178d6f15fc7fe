use std::collections::BTreeMap;

use crate::rules::ast::{EmitValue, FactDefinition};
use crate::rules::eval::{eval_condition, Bindings};
use crate::value::Value;

use super::storage::FactStore;
use super::types::{Fact, FactsError};

/// A non-fatal problem hit while running fact definitions; the caller
/// decides whether to log it.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineDiagnostic {
    pub factdef: String,
    pub detail: String,
}

/// Turns raw streams into facts: for each definition, aggregate the stream
/// over its window ending now, run the value through the classifier arms
/// (first match wins), and emit a fact unless an identical one was emitted
/// less than `min_interval` ago.
#[derive(Debug, Default)]
pub struct FactGenerator {
    next_id: u64,
    /// Per definition: subject, attribute, value, and time of the last emission.
    last_emit: BTreeMap<String, (String, String, Value, i64)>,
}

impl FactGenerator {
    pub fn new() -> FactGenerator {
        FactGenerator::default()
    }

    pub fn run(
        &mut self,
        defs: &[FactDefinition],
        store: &FactStore,
        now: i64,
    ) -> (Vec<Fact>, Vec<PipelineDiagnostic>) {
        let mut facts = Vec::new();
        let mut diagnostics = Vec::new();
        for def in defs {
            let aggregate = match store.aggregate(&def.stream.node, &def.func, def.window_ms, now)
            {
                Ok(v) => v,
                // A window that has not filled up yet is routine, not a problem.
                Err(FactsError::InsufficientSamples { .. }) => continue,
                Err(e) => {
                    diagnostics.push(PipelineDiagnostic {
                        factdef: def.name.node.clone(),
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let bindings: Bindings =
                [("value".to_string(), Value::Number(aggregate))].into_iter().collect();
            let mut matched = None;
            for arm in &def.arms {
                match eval_condition(&arm.predicate, &bindings) {
                    Ok(true) => {
                        matched = Some(arm);
                        break;
                    }
                    Ok(false) => {}
                    Err(e) => diagnostics.push(PipelineDiagnostic {
                        factdef: def.name.node.clone(),
                        detail: format!("classifier predicate: {e}"),
                    }),
                }
            }
            let Some(arm) = matched else { continue };
            let value = match &arm.value {
                EmitValue::Lit(v) => v.clone(),
                EmitValue::Aggregate => Value::Number(aggregate),
            };
            let subject = arm.subject.node.clone();
            let attribute = arm.attribute.node.clone();
            if let Some((s, a, v, at)) = self.last_emit.get(&def.name.node) {
                let elapsed = now.saturating_sub(*at);
                if s == &subject
                    && a == &attribute
                    && v == &value
                    && (elapsed as u128) < def.effective_min_interval() as u128
                {
                    continue;
                }
            }
            self.next_id += 1;
            let fact = Fact {
                fact_id: format!("gf-{}", self.next_id),
                subject: subject.clone(),
                attribute: attribute.clone(),
                value: value.clone(),
                asserted_at: now,
                ttl_ms: def.ttl_ms,
                provenance: vec![format!("stream:{}@{}ms", def.stream.node, def.window_ms)],
            };
            self.last_emit.insert(def.name.node.clone(), (subject, attribute, value, now));
            facts.push(fact);
        }
        (facts, diagnostics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::storage::FactStore;
    use crate::facts::types::Sample;
    use crate::rules::parse;

    fn defs(src: &str) -> Vec<FactDefinition> {
        parse(src).expect("test factdefs parse").factdefs
    }

    fn sample(stream: &str, ts: i64, value: f64) -> Sample {
        Sample { stream_id: stream.to_string(), timestamp: ts, value, unit: "ms".to_string() }
    }

    fn store_with(stream: &str, samples: &[(i64, f64)]) -> FactStore {
        let mut store = FactStore::default();
        for (ts, v) in samples {
            store.ingest(sample(stream, *ts, *v)).unwrap();
        }
        store
    }

    const LOAD_DEF: &str = r#"factdef load {
  stream "raw/cell/c1/load"
  fn mean
  window 10 s
  ttl 30 s
  min_interval 5 s
  when $value > 900 emit fact("c1", "load_level", "critical")
  when $value > 700 emit fact("c1", "load_level", "high")
  when $value >= 0 emit fact("c1", "load_level", "normal")
}"#;

    #[test]
    fn first_matching_arm_wins() {
        let defs = defs(LOAD_DEF);
        let store = store_with("raw/cell/c1/load", &[(1000, 950.0), (2000, 950.0)]);
        let mut generator = FactGenerator::new();
        let (facts, diags) = generator.run(&defs, &store, 3000);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(facts.len(), 1);
        assert_eq!(facts[0].fact_id, "gf-1");
        assert_eq!(facts[0].subject, "c1");
        assert_eq!(facts[0].attribute, "load_level");
        assert_eq!(facts[0].value, Value::Str("critical".into()));
        assert_eq!(facts[0].asserted_at, 3000);
        assert_eq!(facts[0].ttl_ms, 30_000);
        assert_eq!(facts[0].provenance, vec!["stream:raw/cell/c1/load@10000ms".to_string()]);
    }

    #[test]
    fn identical_emission_is_suppressed_within_min_interval() {
        let defs = defs(LOAD_DEF);
        let store = store_with("raw/cell/c1/load", &[(1000, 800.0), (2000, 800.0)]);
        let mut generator = FactGenerator::new();
        let (facts, _) = generator.run(&defs, &store, 3000);
        assert_eq!(facts.len(), 1, "first emission goes out");
        let (facts, _) = generator.run(&defs, &store, 6000);
        assert!(facts.is_empty(), "same value 3 s later is suppressed");
        let (facts, _) = generator.run(&defs, &store, 8000);
        assert_eq!(facts.len(), 1, "5 s elapsed, emit again");
    }

    #[test]
    fn changed_value_emits_immediately() {
        let defs = defs(LOAD_DEF);
        let mut store = store_with("raw/cell/c1/load", &[(1000, 800.0)]);
        let mut generator = FactGenerator::new();
        let (facts, _) = generator.run(&defs, &store, 2000);
        assert_eq!(facts[0].value, Value::Str("high".into()));
        store.ingest(sample("raw/cell/c1/load", 2500, 2000.0)).unwrap();
        let (facts, _) = generator.run(&defs, &store, 3000);
        assert_eq!(facts.len(), 1, "classification changed, no suppression");
        assert_eq!(facts[0].value, Value::Str("critical".into()));
    }

    #[test]
    fn emits_the_aggregate_itself() {
        let defs = defs(
            "factdef jitter { stream \"raw/gw/g1/jitter\" fn mean window 10 s ttl 5 s when $value >= 0 emit fact(\"g1\", \"jitter_ms\", $value) }",
        );
        let store = store_with("raw/gw/g1/jitter", &[(1000, 4.0), (2000, 6.0)]);
        let mut generator = FactGenerator::new();
        let (facts, _) = generator.run(&defs, &store, 3000);
        assert_eq!(facts[0].value, Value::Number(5.0));
    }

    #[test]
    fn empty_window_is_silent() {
        let defs = defs(LOAD_DEF);
        let store = FactStore::default();
        let mut generator = FactGenerator::new();
        let (facts, diags) = generator.run(&defs, &store, 3000);
        assert!(facts.is_empty());
        assert!(diags.is_empty(), "warm-up must not spam diagnostics: {diags:?}");
    }

    #[test]
    fn division_by_zero_surfaces_as_diagnostic() {
        let defs = defs(
            "factdef roc { stream \"raw/x\" fn rate_of_change window 10 s ttl 5 s when $value > 0.5 emit fact(\"x\", \"rising\", true) }",
        );
        let store = store_with("raw/x", &[(1000, 0.0), (9000, 5.0)]);
        let mut generator = FactGenerator::new();
        let (facts, diags) = generator.run(&defs, &store, 10_000);
        assert!(facts.is_empty());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].factdef, "roc");
        assert!(diags[0].detail.contains("half-window mean is zero"), "{}", diags[0].detail);
    }

    #[test]
    fn no_arm_matches_no_fact() {
        let defs = defs(
            "factdef f { stream \"raw/x\" fn mean window 10 s ttl 5 s when $value > 100 emit fact(\"x\", \"big\", true) }",
        );
        let store = store_with("raw/x", &[(1000, 1.0)]);
        let mut generator = FactGenerator::new();
        let (facts, diags) = generator.run(&defs, &store, 2000);
        assert!(facts.is_empty());
        assert!(diags.is_empty());
    }

    #[test]
    fn ids_are_sequential_across_definitions() {
        let src = format!(
            "{LOAD_DEF}\nfactdef other {{ stream \"raw/y\" fn mean window 10 s ttl 5 s when $value >= 0 emit fact(\"y\", \"seen\", true) }}"
        );
        let defs = defs(&src);
        let mut store = store_with("raw/cell/c1/load", &[(1000, 950.0)]);
        store.ingest(sample("raw/y", 1000, 1.0)).unwrap();
        let mut generator = FactGenerator::new();
        let (facts, _) = generator.run(&defs, &store, 2000);
        assert_eq!(facts.len(), 2);
        assert_eq!(facts[0].fact_id, "gf-1");
        assert_eq!(facts[1].fact_id, "gf-2");
    }
}
