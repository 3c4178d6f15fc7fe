//! The deterministic simulation loop: apply scripted changes, sample the
//! measurement generators, run the context node, let network functions act
//! on the contexts it publishes, and log every step.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cghf_core::node::CghfNode;
use cghf_core::{Bus, Envelope, EnvelopeDraft, PayloadValue, SubId, Topic, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::generators::Generators;
use crate::metrics::MetricsReport;
use crate::nf::{enforce, NfKind};
use crate::scenario::{Change, LoadedScenario, Result, Scenario, SimError};
use crate::topology::{bootstrap_fact, Topology};
use crate::trace::{to_ndjson, LogRecord};

#[derive(Debug, Default, Clone)]
pub struct RunOptions {
    /// When set, `events.ndjson` and `metrics.json` are written here.
    pub out_dir: Option<PathBuf>,
}

/// Everything a finished run produced.
pub struct RunSummary {
    pub log: Vec<LogRecord>,
    pub metrics: MetricsReport,
    pub events_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
}

/// A scripted level somewhere in the topology that a ramp can drive.
enum Level {
    CellThroughput(String),
    GatewayLoad(String),
    GatewayJitter(String),
    DatacenterDelay(String),
    ApLoad(String),
}

impl Level {
    fn describe(&self) -> String {
        match self {
            Level::CellThroughput(id) => format!("cell {id} throughput"),
            Level::GatewayLoad(id) => format!("gateway {id} load"),
            Level::GatewayJitter(id) => format!("gateway {id} jitter"),
            Level::DatacenterDelay(id) => format!("datacenter {id} delay"),
            Level::ApLoad(id) => format!("access point {id} load"),
        }
    }
}

struct Ramp {
    level: Level,
    from: f64,
    to: f64,
    start_ms: i64,
    end_ms: i64,
}

fn level_value(topo: &Topology, level: &Level) -> Option<f64> {
    match level {
        Level::CellThroughput(id) => topo.cell(id).map(|c| c.throughput_mbps),
        Level::GatewayLoad(id) => topo.gateway(id).map(|g| g.load),
        Level::GatewayJitter(id) => topo.gateway(id).map(|g| g.jitter_ms),
        Level::DatacenterDelay(id) => topo.datacenter(id).map(|d| d.delay_ms),
        Level::ApLoad(id) => topo.access_point(id).map(|a| a.load),
    }
}

fn set_level(topo: &mut Topology, level: &Level, v: f64) -> bool {
    match level {
        Level::CellThroughput(id) => {
            if let Some(c) = topo.cells.iter_mut().find(|c| c.id == *id) {
                c.throughput_mbps = v;
                return true;
            }
        }
        Level::GatewayLoad(id) => {
            if let Some(g) = topo.gateways.iter_mut().find(|g| g.id == *id) {
                g.load = v;
                return true;
            }
        }
        Level::GatewayJitter(id) => {
            if let Some(g) = topo.gateways.iter_mut().find(|g| g.id == *id) {
                g.jitter_ms = v;
                return true;
            }
        }
        Level::DatacenterDelay(id) => {
            if let Some(d) = topo.datacenters.iter_mut().find(|d| d.id == *id) {
                d.delay_ms = v;
                return true;
            }
        }
        Level::ApLoad(id) => {
            if let Some(a) = topo.access_points.iter_mut().find(|a| a.id == *id) {
                a.load = v;
                return true;
            }
        }
    }
    false
}

/// One deterministic run over a loaded scenario. Build it, then call
/// [`Simulation::run`]; the same scenario and seed always produce the same
/// log bytes.
pub struct Simulation {
    scenario: Scenario,
    topo: Topology,
    bus: Arc<Bus>,
    node: CghfNode,
    rng: ChaCha8Rng,
    gens: Generators,
    nfs: Vec<(NfKind, SubId)>,
    seq: BTreeMap<String, u64>,
    boot_n: u64,
    next_event: usize,
    ramps: Vec<Ramp>,
    log: Vec<LogRecord>,
}

impl Simulation {
    pub fn new(loaded: LoadedScenario) -> Result<Simulation> {
        let LoadedScenario { scenario, topology, rules } = loaded;
        let bus = Bus::new("mcn");
        let mut node =
            CghfNode::new(bus.clone()).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        for (file, text) in &rules {
            node.install_rules(text).map_err(|e| SimError::RuleLoad {
                file: file.clone(),
                details: e.details().join("; "),
            })?;
        }
        let mut nfs = Vec::new();
        for spec in &scenario.nfs {
            let sub = bus
                .subscribe(&spec.pattern, spec.kind.label())
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
            nfs.push((spec.kind, sub));
        }
        let rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let gens = Generators::new(scenario.noise_sigma);
        Ok(Simulation {
            scenario,
            topo: topology,
            bus,
            node,
            rng,
            gens,
            nfs,
            seq: BTreeMap::new(),
            boot_n: 0,
            next_event: 0,
            ramps: Vec::new(),
            log: Vec::new(),
        })
    }

    /// Read a scenario file and build the simulation for it.
    pub fn load(path: impl AsRef<Path>) -> Result<Simulation> {
        Simulation::new(LoadedScenario::read(path)?)
    }

    /// Run to the scenario's horizon and return the log and its metrics.
    pub fn run(mut self, opts: &RunOptions) -> Result<RunSummary> {
        self.log.push(LogRecord::RunMeta {
            scenario: self.scenario.name.clone(),
            seed: self.scenario.seed,
            tick_ms: self.scenario.tick_ms,
            duration_s: self.scenario.duration_s,
        });
        for (subject, attribute, value) in self.topo.bootstrap_facts() {
            self.assert_boot(&subject, &attribute, value, "topology", 0);
        }

        let tick_ms = self.scenario.tick_ms as i64;
        let ticks = (self.scenario.duration_s * 1000 / self.scenario.tick_ms) as i64;
        for k in 1..=ticks {
            self.step(k * tick_ms);
        }

        let stats = self.bus.drop_stats();
        let per_subscription = stats
            .per_subscription
            .iter()
            .map(|(id, n)| {
                let name = self.bus.subscriber_of(SubId(*id)).unwrap_or_default();
                (format!("{name}:{id}"), *n)
            })
            .collect();
        self.log.push(LogRecord::BusDrops {
            at_ms: ticks * tick_ms,
            total: stats.total,
            per_subscription,
        });

        let metrics = MetricsReport::compute(&self.log);
        let mut events_path = None;
        let mut metrics_path = None;
        if let Some(dir) = &opts.out_dir {
            fs::create_dir_all(dir)?;
            let ep = dir.join("events.ndjson");
            fs::write(&ep, to_ndjson(&self.log))?;
            let mp = dir.join("metrics.json");
            let mut text = serde_json::to_string_pretty(&metrics)?;
            text.push('\n');
            fs::write(&mp, text)?;
            events_path = Some(ep);
            metrics_path = Some(mp);
        }
        Ok(RunSummary { log: self.log, metrics, events_path, metrics_path })
    }

    fn step(&mut self, t_ms: i64) {
        while self.next_event < self.scenario.events.len()
            && (self.scenario.events[self.next_event].at_s * 1000) as i64 <= t_ms
        {
            let event = self.scenario.events[self.next_event].clone();
            self.next_event += 1;
            self.log.push(LogRecord::Event { at_ms: t_ms, event: event.clone() });
            self.apply_change(&event.change, t_ms);
        }
        self.advance_ramps(t_ms);

        for r in self.gens.tick(&self.topo, &mut self.rng) {
            let seq = {
                let counter = self.seq.entry(r.topic.clone()).or_insert(0);
                *counter += 1;
                *counter
            };
            let draft = EnvelopeDraft::new(&r.topic, "mcnsim", t_ms, seq)
                .field("value", Value::Number(r.value))
                .field("unit", Value::Str(r.unit.to_string()));
            match (self.bus.publish(draft), Topic::parse(&r.topic)) {
                (Ok(receipt), Ok(topic)) => {
                    let mut payload = BTreeMap::new();
                    payload.insert(
                        "value".to_string(),
                        PayloadValue::Scalar(Value::Number(r.value)),
                    );
                    payload.insert(
                        "unit".to_string(),
                        PayloadValue::Scalar(Value::Str(r.unit.to_string())),
                    );
                    self.log.push(LogRecord::Envelope {
                        at_ms: t_ms,
                        envelope: Envelope {
                            topic,
                            source: "mcnsim".to_string(),
                            timestamp: t_ms,
                            seq,
                            payload,
                            ttl_ms: None,
                            msg_id: receipt.msg_id,
                        },
                    });
                }
                (Err(e), _) => self.diagnostic(t_ms, &format!("publish {}", r.topic), &e.to_string()),
                (_, Err(e)) => self.diagnostic(t_ms, &format!("publish {}", r.topic), &e.to_string()),
            }
        }

        let report = self.node.tick(t_ms);
        for e in &report.ingest_errors {
            self.log.push(LogRecord::Diagnostic {
                at_ms: t_ms,
                origin: "ingest".to_string(),
                detail: e.clone(),
            });
        }
        for d in &report.pipeline_diagnostics {
            self.log.push(LogRecord::Diagnostic {
                at_ms: t_ms,
                origin: format!("pipeline:{}", d.factdef),
                detail: d.detail.clone(),
            });
        }
        for fact in report.generated {
            self.log.push(LogRecord::Fact { at_ms: t_ms, fact });
        }
        for fact in report.cycle.asserted {
            self.log.push(LogRecord::Fact { at_ms: t_ms, fact });
        }
        for ctx in report.cycle.contexts {
            self.log.push(LogRecord::Context {
                at_ms: t_ms,
                rule: ctx.rule,
                matched_facts: ctx.matched_facts,
                envelope: ctx.envelope,
            });
        }
        for d in report.cycle.diagnostics {
            self.log.push(LogRecord::Diagnostic {
                at_ms: t_ms,
                origin: format!("engine:{}", d.rule),
                detail: d.detail,
            });
        }
        if report.cycle.budget_exceeded {
            self.diagnostic(t_ms, "engine", "firing budget exceeded, cycle stopped early");
        }

        for i in 0..self.nfs.len() {
            let (kind, sub) = self.nfs[i];
            let batch = match self.bus.poll(sub, usize::MAX, t_ms) {
                Ok(b) => b,
                Err(e) => {
                    self.diagnostic(t_ms, kind.label(), &e.to_string());
                    continue;
                }
            };
            for env in batch {
                let (record, facts) = enforce(
                    kind,
                    &env,
                    &mut self.topo,
                    &self.scenario.weights,
                    &self.scenario.limits,
                );
                self.log.push(LogRecord::Action { at_ms: t_ms, record });
                for (subject, attribute, value) in facts {
                    self.assert_boot(&subject, &attribute, value, kind.label(), t_ms);
                }
            }
        }
    }

    fn apply_change(&mut self, change: &Change, t_ms: i64) {
        match change {
            Change::CellThroughput { cell, to_mbps, over_s } => {
                self.schedule(Level::CellThroughput(cell.clone()), *to_mbps, *over_s, t_ms);
            }
            Change::GatewayLevel { gateway, load_to, jitter_to_ms, over_s } => {
                if let Some(to) = load_to {
                    self.schedule(Level::GatewayLoad(gateway.clone()), *to, *over_s, t_ms);
                }
                if let Some(to) = jitter_to_ms {
                    self.schedule(Level::GatewayJitter(gateway.clone()), *to, *over_s, t_ms);
                }
            }
            Change::DatacenterDelay { datacenter, to_ms, over_s } => {
                self.schedule(Level::DatacenterDelay(datacenter.clone()), *to_ms, *over_s, t_ms);
            }
            Change::ApLoad { access_point, to, over_s } => {
                self.schedule(Level::ApLoad(access_point.clone()), *to, *over_s, t_ms);
            }
            Change::UeMove { ue, cell } => {
                let region = match self.topo.region_of_cell(cell) {
                    Some(r) => r.to_string(),
                    None => {
                        self.diagnostic(t_ms, "script", &format!("ue_move: unknown cell {cell}"));
                        return;
                    }
                };
                match self.topo.ues.iter_mut().find(|u| u.id == *ue) {
                    Some(u) => u.cell = cell.clone(),
                    None => {
                        self.diagnostic(t_ms, "script", &format!("ue_move: unknown ue {ue}"));
                        return;
                    }
                }
                self.assert_boot(ue, "region", Value::Str(region), "script", t_ms);
            }
            Change::ApAppear { access_point } => {
                let ap = access_point;
                if self.topo.access_point(&ap.id).is_some() {
                    self.diagnostic(t_ms, "script", &format!("ap_appear: duplicate id {}", ap.id));
                    return;
                }
                if self.topo.cell(&ap.cell).is_none() || self.topo.gateway(&ap.gateway).is_none() {
                    self.diagnostic(
                        t_ms,
                        "script",
                        &format!("ap_appear: {} references unknown cell or gateway", ap.id),
                    );
                    return;
                }
                self.topo.access_points.push(ap.clone());
                self.topo.access_points.sort_by(|a, b| a.id.cmp(&b.id));
                let (id, tech) = (ap.id.clone(), ap.technology.clone());
                self.assert_boot(&id, "technology", Value::Str(tech), "script", t_ms);
            }
        }
    }

    fn schedule(&mut self, level: Level, to: f64, over_s: u64, t_ms: i64) {
        if over_s == 0 {
            if !set_level(&mut self.topo, &level, to) {
                self.diagnostic(t_ms, "script", &format!("unknown target: {}", level.describe()));
            }
            return;
        }
        match level_value(&self.topo, &level) {
            Some(from) => self.ramps.push(Ramp {
                level,
                from,
                to,
                start_ms: t_ms,
                end_ms: t_ms + (over_s * 1000) as i64,
            }),
            None => {
                self.diagnostic(t_ms, "script", &format!("unknown target: {}", level.describe()))
            }
        }
    }

    fn advance_ramps(&mut self, t_ms: i64) {
        let mut keep = Vec::new();
        for ramp in self.ramps.drain(..) {
            let v = if t_ms >= ramp.end_ms {
                ramp.to
            } else {
                let frac = (t_ms - ramp.start_ms) as f64 / (ramp.end_ms - ramp.start_ms) as f64;
                ramp.from + (ramp.to - ramp.from) * frac
            };
            set_level(&mut self.topo, &ramp.level, v);
            if t_ms < ramp.end_ms {
                keep.push(ramp);
            }
        }
        self.ramps = keep;
    }

    /// Assert a fact from outside the pipeline, log it, and announce it.
    fn assert_boot(&mut self, subject: &str, attribute: &str, value: Value, origin: &str, t_ms: i64) {
        self.boot_n += 1;
        let fact = bootstrap_fact(self.boot_n, subject, attribute, value, origin, t_ms);
        self.log.push(LogRecord::Fact { at_ms: t_ms, fact: fact.clone() });
        if let Err(e) = self.node.assert_external_fact(fact) {
            self.diagnostic(t_ms, origin, &e.to_string());
        }
    }

    fn diagnostic(&mut self, t_ms: i64, origin: &str, detail: &str) {
        self.log.push(LogRecord::Diagnostic {
            at_ms: t_ms,
            origin: origin.to_string(),
            detail: detail.to_string(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::verify_causality;
    use crate::scenario::{NfSpec, ScriptEvent, Weights};

    const RULES: &str = r#"
entity Cell {
  attr region: string static
  attr overload: bool dynamic
}

factdef c1_load {
  stream "raw/cell/c1/throughput"
  fn mean
  window 5 s
  ttl 10 s
  when $value > 90 emit fact("c1", "overload", true)
}

rule alarm priority 5 ttl 10 s {
  when fact($c, "overload", true)
  and fact($c, "region", $r)
  then publish context/alarm/$r { region: $r }
}
"#;

    fn topology() -> Topology {
        let mut t: Topology = serde_json::from_value(serde_json::json!({
            "regions": ["Y"],
            "cells": [{"id": "c1", "region": "Y", "capacity_mbps": 100.0, "throughput_mbps": 40.0}],
            "access_points": [{
                "id": "ap1", "technology": "cellular", "cell": "c1", "gateway": "gw1",
                "bandwidth_mbps": 100.0, "qos_classes": ["gold"], "protocols": ["ipv4"], "load": 0.2
            }],
            "gateways": [{"id": "gw1", "capacity_mbps": 500.0, "load": 0.1, "jitter_ms": 5.0, "path_delay_ms": 8.0}],
            "datacenters": [{"id": "dc1", "headroom": 2.0, "delay_ms": 20.0}],
            "service_points": [{"id": "svc1", "datacenter": "dc1", "app": "appA"}],
            "applications": [{"id": "appA", "required_delay_ms": 40.0}],
            "ues": [{"id": "ue1", "cell": "c1", "anchor": "gw1", "access_point": "ap1",
                     "apps": ["appA"], "qos_cap_mbps": 100.0}]
        }))
        .unwrap();
        t.normalize();
        assert!(t.check().is_empty());
        t
    }

    fn loaded(noise: f64, events: Vec<ScriptEvent>) -> LoadedScenario {
        LoadedScenario {
            scenario: Scenario {
                name: "tiny".into(),
                topology: "inline".into(),
                rules: vec!["inline.rules".into()],
                seed: 7,
                duration_s: 12,
                tick_ms: 1000,
                noise_sigma: noise,
                weights: Weights::default(),
                limits: Default::default(),
                nfs: vec![NfSpec {
                    kind: NfKind::PolicyFunction,
                    pattern: "context/alarm/#".into(),
                }],
                events,
            },
            topology: topology(),
            rules: vec![("inline.rules".into(), RULES.into())],
        }
    }

    fn overload_event() -> ScriptEvent {
        ScriptEvent {
            at_s: 3,
            anomaly: true,
            change: Change::CellThroughput { cell: "c1".into(), to_mbps: 95.0, over_s: 0 },
        }
    }

    #[test]
    fn scripted_step_detects_and_acts() {
        let summary =
            Simulation::new(loaded(0.0, vec![overload_event()])).unwrap().run(&RunOptions::default()).unwrap();
        let m = &summary.metrics;
        assert_eq!(m.contexts, 1, "log: {}", to_ndjson(&summary.log));
        assert_eq!(m.false_positive_contexts, 0);
        assert_eq!(m.first_anomaly_at_ms, Some(3_000));
        // The 5 s mean clears 90 once the window holds only post-step samples.
        assert_eq!(m.first_detection_at_ms, Some(8_000));
        assert_eq!(m.actions, 1);
        assert_eq!(m.qos_constrained_subscribers, 1);
        assert!(verify_causality(&summary.log).is_empty(), "{:?}", verify_causality(&summary.log));
    }

    #[test]
    fn control_run_stays_quiet() {
        let summary = Simulation::new(loaded(0.0, vec![])).unwrap().run(&RunOptions::default()).unwrap();
        assert_eq!(summary.metrics.contexts, 0);
        assert_eq!(summary.metrics.actions, 0);
    }

    #[test]
    fn same_seed_reproduces_the_log_bytes() {
        let a = Simulation::new(loaded(0.05, vec![overload_event()]))
            .unwrap()
            .run(&RunOptions::default())
            .unwrap();
        let b = Simulation::new(loaded(0.05, vec![overload_event()]))
            .unwrap()
            .run(&RunOptions::default())
            .unwrap();
        assert_eq!(to_ndjson(&a.log), to_ndjson(&b.log));

        let mut other = loaded(0.05, vec![overload_event()]);
        other.scenario.seed = 8;
        let c = Simulation::new(other).unwrap().run(&RunOptions::default()).unwrap();
        assert_ne!(to_ndjson(&a.log), to_ndjson(&c.log));
    }

    #[test]
    fn ramps_hit_their_target_exactly() {
        let event = ScriptEvent {
            at_s: 2,
            anomaly: false,
            change: Change::GatewayLevel {
                gateway: "gw1".into(),
                load_to: Some(0.9),
                jitter_to_ms: None,
                over_s: 4,
            },
        };
        let summary =
            Simulation::new(loaded(0.0, vec![event])).unwrap().run(&RunOptions::default()).unwrap();
        let latency: Vec<(i64, f64)> = summary
            .log
            .iter()
            .filter_map(|r| match r {
                LogRecord::Envelope { at_ms, envelope }
                    if envelope.topic.as_str() == "raw/gw/gw1/latency_ms" =>
                {
                    let v = envelope.payload.get("value").and_then(|p| p.as_scalar()).unwrap();
                    Some((*at_ms, v.as_number().unwrap()))
                }
                _ => None,
            })
            .collect();
        // base latency = path_delay + jitter * load; load ramps 0.1 -> 0.9
        // between t=2 s and t=6 s.
        let expect = |load: f64| 8.0 + 5.0 * load;
        let at = |t: i64| latency.iter().find(|(ms, _)| *ms == t).unwrap().1;
        assert_eq!(at(2_000), expect(0.1));
        assert_eq!(at(3_000), expect(0.3));
        assert_eq!(at(5_000), expect(0.7));
        assert_eq!(at(6_000), expect(0.9));
        assert_eq!(at(12_000), expect(0.9));
    }

    #[test]
    fn writes_log_and_metrics_files() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()) };
        let summary = Simulation::new(loaded(0.0, vec![overload_event()])).unwrap().run(&opts).unwrap();
        let events = fs::read_to_string(summary.events_path.as_ref().unwrap()).unwrap();
        assert_eq!(events, to_ndjson(&summary.log));
        let report: MetricsReport =
            serde_json::from_str(&fs::read_to_string(summary.metrics_path.as_ref().unwrap()).unwrap())
                .unwrap();
        assert_eq!(report, summary.metrics);
    }

    #[test]
    fn bad_rules_fail_the_load_with_the_file_named() {
        let mut l = loaded(0.0, vec![]);
        l.rules = vec![("broken.rules".into(), "rule x {".into())];
        match Simulation::new(l) {
            Err(SimError::RuleLoad { file, .. }) => assert_eq!(file, "broken.rules"),
            other => panic!("expected rule load failure, got {:?}", other.err()),
        }
    }
}
