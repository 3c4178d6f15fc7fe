use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::bus::{Bus, BusError, SubId};
use crate::envelope::EnvelopeDraft;
use crate::facts::{Fact, FactGenerator, FactStore, PipelineDiagnostic, Sample};
use crate::inference::{fact_fields, CycleReport, Engine, KnowledgeBase};
use crate::rules::{parse, validate, ContextModel, ParseError, RuleSet, ValidationError};
use crate::value::PayloadValue;

/// Names installed by one rules text, kept so the whole batch can be
/// removed again when its registration is revoked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstalledItems {
    pub entities: Vec<String>,
    pub factdefs: Vec<String>,
    pub rules: Vec<String>,
}

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("rules text failed to parse ({} errors)", .0.len())]
    Parse(Vec<ParseError>),
    #[error("rules text failed validation ({} errors)", .0.len())]
    Validation(Vec<ValidationError>),
    #[error(transparent)]
    Bus(#[from] BusError),
}

impl NodeError {
    /// One human-readable line per underlying problem.
    pub fn details(&self) -> Vec<String> {
        match self {
            NodeError::Parse(errs) => errs.iter().map(|e| e.to_string()).collect(),
            NodeError::Validation(errs) => errs.iter().map(|e| e.to_string()).collect(),
            NodeError::Bus(e) => vec![e.to_string()],
        }
    }
}

/// What one `tick` call observed and produced.
#[derive(Debug, Default)]
pub struct TickReport {
    /// Raw samples ingested from the bus this tick.
    pub ingested: usize,
    /// Malformed raw envelopes and timestamp regressions, described.
    pub ingest_errors: Vec<String>,
    /// Facts the pipeline emitted this tick.
    pub generated: Vec<Fact>,
    pub pipeline_diagnostics: Vec<PipelineDiagnostic>,
    /// What the rule engine did once the new facts were in.
    pub cycle: CycleReport,
}

/// One context-handling node: ingests raw samples from its bus, runs fact
/// definitions over them, feeds the results to the rule engine, and lets
/// the engine publish contexts back onto the bus.
///
/// Raw envelopes are expected on `raw/...` topics with a numeric `value`
/// payload field and an optional string `unit`; the envelope timestamp is
/// the sample timestamp and the full topic is the stream id.
pub struct CghfNode {
    bus: Arc<Bus>,
    store: FactStore,
    generator: FactGenerator,
    engine: Engine,
    ruleset: RuleSet,
    ingest_subs: Vec<SubId>,
    fact_seq: BTreeMap<String, u64>,
    source: String,
}

impl CghfNode {
    pub fn new(bus: Arc<Bus>) -> Result<CghfNode, BusError> {
        let raw = bus.subscribe("raw/#", "cghf-node")?;
        Ok(CghfNode {
            engine: Engine::new(bus.clone()),
            bus,
            store: FactStore::default(),
            generator: FactGenerator::new(),
            ruleset: RuleSet::default(),
            ingest_subs: vec![raw],
            fact_seq: BTreeMap::new(),
            source: "cghf-pipeline".to_string(),
        })
    }

    pub fn bus(&self) -> &Arc<Bus> {
        &self.bus
    }

    pub fn ruleset(&self) -> &RuleSet {
        &self.ruleset
    }

    pub fn kb(&self) -> &KnowledgeBase {
        self.engine.kb()
    }

    pub fn store(&self) -> &FactStore {
        &self.store
    }

    /// The entity vocabulary currently installed.
    pub fn model(&self) -> ContextModel {
        ContextModel::from_entities(&self.ruleset.entities)
    }

    /// Ingest raw envelopes from an additional topic pattern.
    pub fn add_ingest_pattern(&mut self, pattern: &str) -> Result<(), BusError> {
        let sub = self.bus.subscribe(pattern, "cghf-node")?;
        self.ingest_subs.push(sub);
        Ok(())
    }

    /// Parse, validate against the installed model, and install a rules
    /// text. Nothing is installed unless the whole text is clean.
    pub fn install_rules(&mut self, text: &str) -> Result<InstalledItems, NodeError> {
        let rs = parse(text).map_err(NodeError::Parse)?;
        let mut errors = validate(&rs, &self.model());
        for r in &rs.rules {
            if self.ruleset.rules.iter().any(|have| have.name.node == r.name.node) {
                errors.push(ValidationError {
                    span: r.name.span,
                    message: format!("rule `{}` is already installed", r.name.node),
                });
            }
        }
        for f in &rs.factdefs {
            if self.ruleset.factdefs.iter().any(|have| have.name.node == f.name.node) {
                errors.push(ValidationError {
                    span: f.name.span,
                    message: format!("fact definition `{}` is already installed", f.name.node),
                });
            }
        }
        if !errors.is_empty() {
            return Err(NodeError::Validation(errors));
        }
        let items = InstalledItems {
            entities: rs.entities.iter().map(|e| e.name.node.clone()).collect(),
            factdefs: rs.factdefs.iter().map(|f| f.name.node.clone()).collect(),
            rules: rs.rules.iter().map(|r| r.name.node.clone()).collect(),
        };
        self.ruleset.merge(rs);
        Ok(items)
    }

    /// Uninstall everything a former install put in.
    pub fn remove_items(&mut self, items: &InstalledItems) {
        self.ruleset.entities.retain(|e| !items.entities.contains(&e.name.node));
        self.ruleset.factdefs.retain(|f| !items.factdefs.contains(&f.name.node));
        self.ruleset.rules.retain(|r| !items.rules.contains(&r.name.node));
    }

    /// Assert a fact produced outside the pipeline (bootstrap data such as
    /// topology attributes) and announce it on the bus.
    pub fn assert_external_fact(&mut self, fact: Fact) -> Result<(), BusError> {
        self.announce_fact(&fact)?;
        self.engine.ingest_fact(fact);
        Ok(())
    }

    /// One processing step at `now`: drain raw subscriptions into the
    /// sample store, run fact definitions, announce and assert what they
    /// emitted, then run the rule engine to quiescence.
    pub fn tick(&mut self, now: i64) -> TickReport {
        let mut report = TickReport::default();
        for sub in self.ingest_subs.clone() {
            loop {
                let batch = match self.bus.poll(sub, 1000, now) {
                    Ok(b) => b,
                    Err(e) => {
                        report.ingest_errors.push(format!("poll: {e}"));
                        break;
                    }
                };
                if batch.is_empty() {
                    break;
                }
                for env in batch {
                    match sample_from(&env) {
                        Ok(sample) => match self.store.ingest(sample) {
                            Ok(()) => report.ingested += 1,
                            Err(e) => report.ingest_errors.push(e.to_string()),
                        },
                        Err(e) => report.ingest_errors.push(e),
                    }
                }
            }
        }

        let (facts, diagnostics) = self.generator.run(&self.ruleset.factdefs, &self.store, now);
        report.pipeline_diagnostics = diagnostics;
        for fact in &facts {
            if let Err(e) = self.announce_fact(fact) {
                report.ingest_errors.push(format!("announce {}: {e}", fact.topic()));
            }
            self.engine.ingest_fact(fact.clone());
        }
        report.generated = facts;

        report.cycle = self.engine.run_cycle(&self.ruleset.rules, now);
        report
    }

    fn announce_fact(&mut self, fact: &Fact) -> Result<(), BusError> {
        let topic = fact.topic();
        let seq = {
            let counter = self.fact_seq.entry(topic.clone()).or_insert(0);
            *counter += 1;
            *counter
        };
        let mut draft =
            EnvelopeDraft::new(&topic, &self.source, fact.asserted_at, seq).ttl(fact.ttl_ms);
        for (k, v) in fact_fields(fact) {
            draft = draft.field(&k, v);
        }
        self.bus.publish(draft)?;
        Ok(())
    }
}

fn sample_from(env: &crate::envelope::Envelope) -> Result<Sample, String> {
    let value = match env.payload.get("value") {
        Some(PayloadValue::Scalar(v)) => v
            .as_number()
            .ok_or_else(|| format!("{}: `value` is not a number", env.topic.as_str()))?,
        _ => return Err(format!("{}: missing `value` field", env.topic.as_str())),
    };
    let unit = match env.payload.get("unit") {
        Some(PayloadValue::Scalar(u)) => u.as_str().unwrap_or("").to_string(),
        _ => String::new(),
    };
    Ok(Sample {
        stream_id: env.topic.as_str().to_string(),
        timestamp: env.timestamp,
        value,
        unit,
    })
}
