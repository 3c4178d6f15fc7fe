//! Network functions subscribed to contexts. Each kind owns one class of
//! state change and applies it only when the best candidate strictly
//! improves on the current assignment; otherwise the attempt is recorded as
//! infeasible and nothing moves.

use std::collections::BTreeMap;

use cghf_core::{Envelope, Value};
use serde::{Deserialize, Serialize};

use crate::generators::qoe;
use crate::scenario::{Limits, Weights};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NfKind {
    PolicyFunction,
    AnchorManager,
    ServicePlacer,
    AccessFunction,
}

impl NfKind {
    pub fn label(&self) -> &'static str {
        match self {
            NfKind::PolicyFunction => "policy_function",
            NfKind::AnchorManager => "anchor_manager",
            NfKind::ServicePlacer => "service_placer",
            NfKind::AccessFunction => "access_function",
        }
    }

    fn action_name(&self) -> &'static str {
        match self {
            NfKind::PolicyFunction => "constrain_qos",
            NfKind::AnchorManager => "reselect_anchor",
            NfKind::ServicePlacer => "relocate_service",
            NfKind::AccessFunction => "handover",
        }
    }
}

/// What one enforcement attempt did, with enough detail to recompute the
/// decision from the log alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub nf: NfKind,
    pub action: String,
    pub context_msg_id: String,
    pub context_topic: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub affected: Vec<String>,
    /// Objective value per evaluated option, current assignment included.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub candidates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_after: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoe_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoe_after: Option<f64>,
    pub infeasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ActionRecord {
    fn new(kind: NfKind, env: &Envelope, target: &str) -> ActionRecord {
        ActionRecord {
            nf: kind,
            action: kind.action_name().to_string(),
            context_msg_id: env.msg_id.clone(),
            context_topic: env.topic.as_str().to_string(),
            target: target.to_string(),
            from: None,
            to: None,
            affected: Vec::new(),
            candidates: BTreeMap::new(),
            objective_before: None,
            objective_after: None,
            qoe_before: None,
            qoe_after: None,
            infeasible: false,
            reason: None,
        }
    }

    fn infeasible(mut self, reason: &str) -> ActionRecord {
        self.infeasible = true;
        self.reason = Some(reason.to_string());
        self
    }
}

/// Facts the simulator re-asserts after a state change so the knowledge
/// base keeps describing the actual wiring.
pub type Reassertions = Vec<(String, String, Value)>;

fn context_field<'e>(env: &'e Envelope, name: &str) -> Option<&'e Value> {
    match env.payload.get("fields") {
        Some(cghf_core::PayloadValue::Map(m)) => m.get(name),
        _ => None,
    }
}

fn field_str(env: &Envelope, name: &str) -> Option<String> {
    match context_field(env, name) {
        Some(Value::Str(s)) => Some(s.clone()),
        _ => None,
    }
}

/// Apply one context to the topology as the given NF kind.
pub fn enforce(
    kind: NfKind,
    env: &Envelope,
    topo: &mut Topology,
    weights: &Weights,
    limits: &Limits,
) -> (ActionRecord, Reassertions) {
    match kind {
        NfKind::PolicyFunction => constrain_qos(env, topo),
        NfKind::AnchorManager => reselect_anchor(env, topo, weights, limits),
        NfKind::ServicePlacer => relocate_service(env, topo, weights, limits),
        NfKind::AccessFunction => handover(env, topo, weights),
    }
}

fn constrain_qos(env: &Envelope, topo: &mut Topology) -> (ActionRecord, Reassertions) {
    let region = match field_str(env, "region") {
        Some(r) => r,
        None => {
            let rec = ActionRecord::new(NfKind::PolicyFunction, env, "");
            return (rec.infeasible("context carries no region field"), Vec::new());
        }
    };
    let mut rec = ActionRecord::new(NfKind::PolicyFunction, env, &region);
    let region_cells: Vec<String> = topo
        .cells
        .iter()
        .filter(|c| c.region == region)
        .map(|c| c.id.clone())
        .collect();
    for ue in &mut topo.ues {
        if region_cells.iter().any(|c| *c == ue.cell) {
            if !ue.qos_constrained {
                ue.qos_constrained = true;
                ue.qos_cap_mbps *= 0.5;
            }
            rec.affected.push(ue.id.clone());
        }
    }
    (rec, Vec::new())
}

fn reselect_anchor(
    env: &Envelope,
    topo: &mut Topology,
    weights: &Weights,
    limits: &Limits,
) -> (ActionRecord, Reassertions) {
    let ue_id = match field_str(env, "ue") {
        Some(u) => u,
        None => {
            let rec = ActionRecord::new(NfKind::AnchorManager, env, "");
            return (rec.infeasible("context carries no ue field"), Vec::new());
        }
    };
    let mut rec = ActionRecord::new(NfKind::AnchorManager, env, &ue_id);
    let current_gw = match topo.ues.iter().find(|u| u.id == ue_id) {
        Some(u) => u.anchor.clone(),
        None => return (rec.infeasible("unknown ue"), Vec::new()),
    };
    let objective =
        |j: f64, l: f64, d: f64| weights.anchor_jitter * j * l + weights.anchor_path_delay * d;
    let mut before = None;
    for g in &topo.gateways {
        let obj = objective(g.jitter_ms, g.load, g.path_delay_ms);
        if g.id == current_gw {
            before = Some(obj);
            rec.candidates.insert(g.id.clone(), obj);
        } else if g.load <= limits.max_gateway_load {
            rec.candidates.insert(g.id.clone(), obj);
        }
    }
    rec.from = Some(current_gw.clone());
    rec.objective_before = before;
    let best = rec
        .candidates
        .iter()
        .filter(|(id, _)| **id != current_gw)
        .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)));
    match (best, before) {
        (Some((id, obj)), Some(before)) if *obj < before => {
            let (id, obj) = (id.clone(), *obj);
            topo.ues.iter_mut().find(|u| u.id == ue_id).expect("ue exists").anchor = id.clone();
            rec.to = Some(id.clone());
            rec.objective_after = Some(obj);
            let facts = vec![(ue_id, "connected_gw".to_string(), Value::Str(id))];
            (rec, facts)
        }
        _ => (rec.infeasible("no feasible gateway improves on the current anchor"), Vec::new()),
    }
}

fn relocate_service(
    env: &Envelope,
    topo: &mut Topology,
    weights: &Weights,
    limits: &Limits,
) -> (ActionRecord, Reassertions) {
    let svc_id = match field_str(env, "svc") {
        Some(s) => s,
        None => {
            let rec = ActionRecord::new(NfKind::ServicePlacer, env, "");
            return (rec.infeasible("context carries no svc field"), Vec::new());
        }
    };
    let mut rec = ActionRecord::new(NfKind::ServicePlacer, env, &svc_id);
    let (current_dc, app) = match topo.service_points.iter().find(|s| s.id == svc_id) {
        Some(s) => (s.datacenter.clone(), s.app.clone()),
        None => return (rec.infeasible("unknown service point"), Vec::new()),
    };
    let required = topo.application(&app).map(|a| a.required_delay_ms).unwrap_or(f64::INFINITY);
    let mut before = None;
    let mut delay_before = None;
    for d in &topo.datacenters {
        let obj = weights.place_delay * d.delay_ms;
        if d.id == current_dc {
            before = Some(obj);
            delay_before = Some(d.delay_ms);
            rec.candidates.insert(d.id.clone(), obj);
        } else if d.headroom >= limits.min_headroom {
            rec.candidates.insert(d.id.clone(), obj);
        }
    }
    rec.from = Some(current_dc.clone());
    rec.objective_before = before;
    rec.qoe_before = delay_before.map(|d| qoe(d, required));
    rec.affected = topo
        .ues
        .iter()
        .filter(|u| u.apps.iter().any(|a| *a == app))
        .map(|u| u.id.clone())
        .collect();
    let best = rec
        .candidates
        .iter()
        .filter(|(id, _)| **id != current_dc)
        .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)));
    match (best, before) {
        (Some((id, obj)), Some(before)) if *obj < before => {
            let (id, obj) = (id.clone(), *obj);
            let delay_after = topo.datacenter(&id).expect("candidate exists").delay_ms;
            topo.service_points
                .iter_mut()
                .find(|s| s.id == svc_id)
                .expect("service point exists")
                .datacenter = id.clone();
            rec.to = Some(id.clone());
            rec.objective_after = Some(obj);
            rec.qoe_after = Some(qoe(delay_after, required));
            let facts = vec![(svc_id, "hosted_at".to_string(), Value::Str(id))];
            (rec, facts)
        }
        _ => (rec.infeasible("no datacenter with headroom improves on the current host"), Vec::new()),
    }
}

fn handover(env: &Envelope, topo: &mut Topology, weights: &Weights) -> (ActionRecord, Reassertions) {
    let ue_id = match field_str(env, "ue") {
        Some(u) => u,
        None => {
            let rec = ActionRecord::new(NfKind::AccessFunction, env, "");
            return (rec.infeasible("context carries no ue field"), Vec::new());
        }
    };
    let mut rec = ActionRecord::new(NfKind::AccessFunction, env, &ue_id);
    let current_ap_id = match topo.ues.iter().find(|u| u.id == ue_id) {
        Some(u) => u.access_point.clone(),
        None => return (rec.infeasible("unknown ue"), Vec::new()),
    };
    let current = match topo.access_point(&current_ap_id) {
        Some(a) => a.clone(),
        None => return (rec.infeasible("unknown access point"), Vec::new()),
    };
    let objective =
        |load: f64, bw: f64| weights.access_load * load + weights.access_inv_bandwidth / bw;
    let mut before = None;
    for a in &topo.access_points {
        let obj = objective(a.load, a.bandwidth_mbps);
        if a.id == current.id {
            before = Some(obj);
            rec.candidates.insert(a.id.clone(), obj);
        } else if a.cell == current.cell
            && current.protocols.iter().all(|p| a.protocols.contains(p))
        {
            rec.candidates.insert(a.id.clone(), obj);
        }
    }
    rec.from = Some(current.id.clone());
    rec.objective_before = before;
    let best = rec
        .candidates
        .iter()
        .filter(|(id, _)| **id != current.id)
        .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)));
    match (best, before) {
        (Some((id, obj)), Some(before)) if *obj < before => {
            let (id, obj) = (id.clone(), *obj);
            topo.ues.iter_mut().find(|u| u.id == ue_id).expect("ue exists").access_point =
                id.clone();
            rec.to = Some(id.clone());
            rec.objective_after = Some(obj);
            let facts = vec![(ue_id, "access_point".to_string(), Value::Str(id))];
            (rec, facts)
        }
        _ => (rec.infeasible("no co-located access point improves on the current one"), Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn context(topic: &str, fields: &[(&str, &str)]) -> Envelope {
        let map: BTreeMap<String, Value> =
            fields.iter().map(|(k, v)| (k.to_string(), Value::Str(v.to_string()))).collect();
        Envelope {
            topic: cghf_core::Topic::parse(topic).unwrap(),
            source: "cghf-engine".into(),
            timestamp: 0,
            seq: 1,
            payload: [("fields".to_string(), cghf_core::PayloadValue::Map(map))].into(),
            ttl_ms: None,
            msg_id: "t-1".into(),
        }
    }

    fn topo() -> Topology {
        let mut t: Topology = serde_json::from_value(serde_json::json!({
            "regions": ["Y", "Z"],
            "cells": [
                {"id": "c1", "region": "Y", "capacity_mbps": 600.0, "throughput_mbps": 350.0},
                {"id": "c2", "region": "Z", "capacity_mbps": 400.0, "throughput_mbps": 250.0}
            ],
            "access_points": [
                {"id": "ap1", "technology": "cellular", "cell": "c1", "gateway": "gw1",
                 "bandwidth_mbps": 600.0, "qos_classes": ["gold"], "protocols": ["ipv4"], "load": 0.95},
                {"id": "ap2", "technology": "wifi", "cell": "c1", "gateway": "gw1",
                 "bandwidth_mbps": 300.0, "qos_classes": ["silver"], "protocols": ["ipv4", "ipv6"], "load": 0.2},
                {"id": "ap3", "technology": "wifi", "cell": "c2", "gateway": "gw2",
                 "bandwidth_mbps": 300.0, "qos_classes": ["silver"], "protocols": ["ipv4"], "load": 0.05}
            ],
            "gateways": [
                {"id": "gw1", "capacity_mbps": 2000.0, "load": 0.9, "jitter_ms": 20.0, "path_delay_ms": 8.0},
                {"id": "gw2", "capacity_mbps": 2000.0, "load": 0.3, "jitter_ms": 5.0, "path_delay_ms": 9.0},
                {"id": "gw3", "capacity_mbps": 2000.0, "load": 0.99, "jitter_ms": 1.0, "path_delay_ms": 1.0}
            ],
            "datacenters": [
                {"id": "dc1", "headroom": 2.0, "delay_ms": 90.0},
                {"id": "dc2", "headroom": 4.0, "delay_ms": 18.0},
                {"id": "dc3", "headroom": 0.0, "delay_ms": 1.0}
            ],
            "service_points": [{"id": "svc1", "datacenter": "dc1", "app": "appA"}],
            "applications": [{"id": "appA", "required_delay_ms": 40.0}],
            "ues": [
                {"id": "ue1", "cell": "c1", "anchor": "gw1", "access_point": "ap1",
                 "apps": ["appA"], "qos_cap_mbps": 100.0},
                {"id": "ue2", "cell": "c2", "anchor": "gw2", "access_point": "ap3",
                 "apps": [], "qos_cap_mbps": 100.0}
            ]
        }))
        .unwrap();
        t.normalize();
        t
    }

    #[test]
    fn policy_constrains_exactly_the_region() {
        let mut t = topo();
        let env = context("context/congestion/Y", &[("region", "Y")]);
        let (rec, facts) = enforce(NfKind::PolicyFunction, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(!rec.infeasible);
        assert_eq!(rec.affected, vec!["ue1"]);
        assert!(facts.is_empty());
        assert!(t.ues.iter().find(|u| u.id == "ue1").unwrap().qos_constrained);
        assert_eq!(t.ues.iter().find(|u| u.id == "ue1").unwrap().qos_cap_mbps, 50.0);
        assert!(!t.ues.iter().find(|u| u.id == "ue2").unwrap().qos_constrained);
    }

    #[test]
    fn policy_is_idempotent_on_caps() {
        let mut t = topo();
        let env = context("context/congestion/Y", &[("region", "Y")]);
        enforce(NfKind::PolicyFunction, &env, &mut t, &Weights::default(), &Limits::default());
        enforce(NfKind::PolicyFunction, &env, &mut t, &Weights::default(), &Limits::default());
        assert_eq!(t.ues.iter().find(|u| u.id == "ue1").unwrap().qos_cap_mbps, 50.0);
    }

    #[test]
    fn anchor_picks_the_minimizing_feasible_gateway() {
        let mut t = topo();
        let env = context("context/latency/ue1", &[("ue", "ue1"), ("gw", "gw1")]);
        let (rec, facts) = enforce(NfKind::AnchorManager, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(!rec.infeasible, "{:?}", rec.reason);
        // gw1: 20*0.9 + 8 = 26, gw2: 5*0.3 + 9 = 10.5, gw3 excluded (load 0.99).
        assert_eq!(rec.from.as_deref(), Some("gw1"));
        assert_eq!(rec.to.as_deref(), Some("gw2"));
        assert_eq!(rec.objective_before, Some(26.0));
        assert_eq!(rec.objective_after, Some(10.5));
        assert!(!rec.candidates.contains_key("gw3"));
        assert_eq!(t.ues[0].anchor, "gw2");
        assert_eq!(facts, vec![("ue1".to_string(), "connected_gw".to_string(), Value::Str("gw2".into()))]);
    }

    #[test]
    fn anchor_refuses_when_nothing_improves() {
        let mut t = topo();
        t.gateways.iter_mut().find(|g| g.id == "gw2").unwrap().load = 0.99;
        let env = context("context/latency/ue1", &[("ue", "ue1")]);
        let (rec, facts) = enforce(NfKind::AnchorManager, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(rec.infeasible);
        assert!(facts.is_empty());
        assert_eq!(t.ues[0].anchor, "gw1");
    }

    #[test]
    fn placer_moves_to_the_nearest_dc_with_headroom() {
        let mut t = topo();
        let env = context("context/qoe/svc1", &[("svc", "svc1"), ("dc", "dc1")]);
        let (rec, facts) = enforce(NfKind::ServicePlacer, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(!rec.infeasible, "{:?}", rec.reason);
        // dc2 (delay 18) is eligible; dc3 (delay 1) lacks headroom.
        assert_eq!(rec.to.as_deref(), Some("dc2"));
        assert!(!rec.candidates.contains_key("dc3"));
        assert_eq!(rec.qoe_before, Some(qoe(90.0, 40.0)));
        assert_eq!(rec.qoe_after, Some(1.0));
        assert_eq!(rec.affected, vec!["ue1"]);
        assert_eq!(t.service_points[0].datacenter, "dc2");
        assert_eq!(facts, vec![("svc1".to_string(), "hosted_at".to_string(), Value::Str("dc2".into()))]);
    }

    #[test]
    fn placer_reports_infeasible_without_headroom() {
        let mut t = topo();
        t.datacenters.iter_mut().for_each(|d| d.headroom = 0.0);
        let env = context("context/qoe/svc1", &[("svc", "svc1")]);
        let (rec, _) = enforce(NfKind::ServicePlacer, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(rec.infeasible);
        assert_eq!(t.service_points[0].datacenter, "dc1");
    }

    #[test]
    fn handover_requires_colocation_and_protocol_coverage() {
        let mut t = topo();
        let env = context("context/attachment/ue1", &[("ue", "ue1"), ("ap", "ap1")]);
        let (rec, facts) = enforce(NfKind::AccessFunction, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(!rec.infeasible, "{:?}", rec.reason);
        // ap2 shares the cell and covers ipv4; ap3 is in another cell.
        assert_eq!(rec.to.as_deref(), Some("ap2"));
        assert!(!rec.candidates.contains_key("ap3"));
        assert_eq!(t.ues[0].access_point, "ap2");
        assert_eq!(facts, vec![("ue1".to_string(), "access_point".to_string(), Value::Str("ap2".into()))]);
    }

    #[test]
    fn missing_context_field_is_infeasible() {
        let mut t = topo();
        let env = context("context/latency/ue1", &[("gw", "gw1")]);
        let (rec, facts) = enforce(NfKind::AnchorManager, &env, &mut t, &Weights::default(), &Limits::default());
        assert!(rec.infeasible);
        assert!(facts.is_empty());
    }
}
