//! Offline inspection of a saved run log: recompute metrics and check that
//! every action traces back to a context, its rule, and raw measurements.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::metrics::MetricsReport;
use crate::scenario::Result;
use crate::trace::{read_ndjson, LogRecord};

/// Reads a log file written by a run.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogRecord>> {
    let file = File::open(path)?;
    read_ndjson(BufReader::new(file))
}

/// Recomputes the metrics report from a saved log.
pub fn metrics_from_file(path: impl AsRef<Path>) -> Result<MetricsReport> {
    Ok(MetricsReport::compute(&read_log(path)?))
}

/// Checks the causal chain of a log and returns a list of violations; a
/// complete log yields an empty list.
///
/// Every action must name a previously logged context, every context must
/// name its rule and previously logged facts, and every stream-derived fact
/// must be preceded by a measurement envelope on the stream it cites.
pub fn verify_causality(records: &[LogRecord]) -> Vec<String> {
    let mut problems = Vec::new();
    let mut first_envelope_on: BTreeMap<&str, i64> = BTreeMap::new();
    let mut facts: BTreeMap<&str, (i64, &Vec<String>)> = BTreeMap::new();
    let mut contexts: BTreeMap<&str, i64> = BTreeMap::new();

    for r in records {
        match r {
            LogRecord::Envelope { at_ms, envelope } => {
                first_envelope_on.entry(envelope.topic.as_str()).or_insert(*at_ms);
            }
            LogRecord::Fact { at_ms, fact } => {
                facts.entry(&fact.fact_id).or_insert((*at_ms, &fact.provenance));
                for p in &fact.provenance {
                    if let Some(rest) = p.strip_prefix("stream:") {
                        let topic = rest.split('@').next().unwrap_or(rest);
                        match first_envelope_on.get(topic) {
                            Some(first) if *first <= *at_ms => {}
                            _ => problems.push(format!(
                                "fact {} cites stream {topic} with no earlier envelope",
                                fact.fact_id
                            )),
                        }
                    } else if !p.starts_with("rule:") && !p.starts_with("bootstrap:") {
                        problems.push(format!(
                            "fact {} has unrecognized provenance {p}",
                            fact.fact_id
                        ));
                    }
                }
            }
            LogRecord::Context { at_ms, rule, matched_facts, envelope } => {
                contexts.insert(&envelope.msg_id, *at_ms);
                if rule.is_empty() {
                    problems.push(format!("context {} lacks a rule name", envelope.msg_id));
                }
                for id in matched_facts {
                    match facts.get(id.as_str()) {
                        Some((fact_at, _)) if *fact_at <= *at_ms => {}
                        Some(_) => problems.push(format!(
                            "context {} matched fact {id} logged later",
                            envelope.msg_id
                        )),
                        None => problems.push(format!(
                            "context {} matched unlogged fact {id}",
                            envelope.msg_id
                        )),
                    }
                }
            }
            LogRecord::Action { at_ms, record } => {
                match contexts.get(record.context_msg_id.as_str()) {
                    Some(ctx_at) if *ctx_at <= *at_ms => {}
                    Some(_) => problems.push(format!(
                        "action on {} precedes its context",
                        record.context_msg_id
                    )),
                    None => problems.push(format!(
                        "action cites unlogged context {}",
                        record.context_msg_id
                    )),
                }
            }
            _ => {}
        }
    }
    problems
}
