//! Run metrics, derived purely from the event log so a saved log replays to
//! the same report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::trace::LogRecord;

/// Objective movement of one applied reassignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub target: String,
    pub from: String,
    pub to: String,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// QoE movement of one applied service relocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoeDelta {
    pub target: String,
    pub from: String,
    pub to: String,
    pub qoe_before: f64,
    pub qoe_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub contexts: u64,
    /// Contexts produced at or before the first scripted anomaly (all of
    /// them, when the script has no anomaly).
    pub false_positive_contexts: u64,
    pub first_anomaly_at_ms: Option<i64>,
    pub first_detection_at_ms: Option<i64>,
    pub detection_latency_ms: Option<i64>,
    pub actions: u64,
    pub infeasible_actions: u64,
    pub qos_constrained_subscribers: u64,
    pub handover_count: u64,
    pub anchor_reselections: Vec<Delta>,
    pub relocations: Vec<QoeDelta>,
    /// Extra network functions acting on an already-acted-on context.
    pub conflict_actions: u64,
    pub bus_drops_total: u64,
}

impl MetricsReport {
    pub fn compute(records: &[LogRecord]) -> MetricsReport {
        let mut scenario = String::new();
        let mut first_anomaly = None;
        let mut contexts = 0u64;
        let mut false_positives = 0u64;
        let mut first_detection = None;
        let mut actions = 0u64;
        let mut infeasible = 0u64;
        let mut constrained: BTreeSet<String> = BTreeSet::new();
        let mut handovers = 0u64;
        let mut reselections = Vec::new();
        let mut relocations = Vec::new();
        let mut actors: BTreeMap<String, BTreeSet<&'static str>> = BTreeMap::new();
        let mut drops = 0u64;

        for r in records {
            if let LogRecord::RunMeta { scenario: s, .. } = r {
                scenario = s.clone();
            }
            if let LogRecord::Event { at_ms, event } = r {
                if event.anomaly && first_anomaly.is_none() {
                    first_anomaly = Some(*at_ms);
                }
            }
        }

        for r in records {
            match r {
                LogRecord::Context { at_ms, .. } => {
                    contexts += 1;
                    match first_anomaly {
                        Some(onset) if *at_ms > onset => {
                            if first_detection.is_none() {
                                first_detection = Some(*at_ms);
                            }
                        }
                        _ => false_positives += 1,
                    }
                }
                LogRecord::Action { record, .. } => {
                    if record.infeasible {
                        infeasible += 1;
                        continue;
                    }
                    actions += 1;
                    actors
                        .entry(record.context_msg_id.clone())
                        .or_default()
                        .insert(record.nf.label());
                    match record.action.as_str() {
                        "constrain_qos" => constrained.extend(record.affected.iter().cloned()),
                        "handover" => handovers += 1,
                        "reselect_anchor" => reselections.push(Delta {
                            target: record.target.clone(),
                            from: record.from.clone().unwrap_or_default(),
                            to: record.to.clone().unwrap_or_default(),
                            objective_before: record.objective_before.unwrap_or(0.0),
                            objective_after: record.objective_after.unwrap_or(0.0),
                        }),
                        "relocate_service" => relocations.push(QoeDelta {
                            target: record.target.clone(),
                            from: record.from.clone().unwrap_or_default(),
                            to: record.to.clone().unwrap_or_default(),
                            qoe_before: record.qoe_before.unwrap_or(0.0),
                            qoe_after: record.qoe_after.unwrap_or(0.0),
                        }),
                        _ => {}
                    }
                }
                LogRecord::BusDrops { total, .. } => drops = *total,
                _ => {}
            }
        }

        let conflict_actions =
            actors.values().map(|nfs| (nfs.len() as u64).saturating_sub(1)).sum();

        MetricsReport {
            scenario,
            contexts,
            false_positive_contexts: false_positives,
            first_anomaly_at_ms: first_anomaly,
            first_detection_at_ms: first_detection,
            detection_latency_ms: first_detection
                .and_then(|d| first_anomaly.map(|a| d - a)),
            actions,
            infeasible_actions: infeasible,
            qos_constrained_subscribers: constrained.len() as u64,
            handover_count: handovers,
            anchor_reselections: reselections,
            relocations,
            conflict_actions,
            bus_drops_total: drops,
        }
    }
}
