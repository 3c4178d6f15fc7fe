//! Runs the shipped scenario files end to end and pins down what each one
//! must produce: when the first context appears, who acts, and that control
//! runs without the scripted disturbance stay quiet.

use std::path::PathBuf;

use cghf_sim::replay::verify_causality;
use cghf_sim::scenario::LoadedScenario;
use cghf_sim::trace::to_ndjson;
use cghf_sim::{LogRecord, RunOptions, RunSummary, Simulation};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(name: &str) -> RunSummary {
    Simulation::load(scenario_path(name))
        .unwrap()
        .run(&RunOptions::default())
        .unwrap()
}

fn run_control(name: &str) -> RunSummary {
    let mut loaded = LoadedScenario::read(scenario_path(name)).unwrap();
    loaded.scenario.events.clear();
    Simulation::new(loaded).unwrap().run(&RunOptions::default()).unwrap()
}

#[test]
fn congestion_detects_within_a_minute_of_onset() {
    let summary = run("congestion.json");
    let m = &summary.metrics;
    assert_eq!(m.false_positive_contexts, 0, "log: {}", to_ndjson(&summary.log));
    let first = m.first_detection_at_ms.expect("a context fires");
    assert!(first > 300_000 && first <= 361_000, "first context at {first} ms");
    assert!(m.actions >= 1);
    assert_eq!(m.qos_constrained_subscribers, 2);
    for r in &summary.log {
        if let LogRecord::Action { record, .. } = r {
            if !record.infeasible {
                assert_eq!(record.affected, vec!["ue1", "ue2"], "only region Y subscribers");
            }
        }
    }
}

#[test]
fn anchor_reselects_to_the_calmer_gateway() {
    let m = run("anchor.json").metrics;
    assert_eq!(m.false_positive_contexts, 0);
    assert!(m.contexts >= 1);
    assert_eq!(m.anchor_reselections.len(), 1);
    let d = &m.anchor_reselections[0];
    assert_eq!((d.target.as_str(), d.from.as_str(), d.to.as_str()), ("ue1", "gw1", "gw2"));
    assert!(d.objective_after < d.objective_before, "{d:?}");
}

#[test]
fn service_point_relocation_recovers_qoe() {
    let m = run("service_point.json").metrics;
    assert_eq!(m.false_positive_contexts, 0);
    assert!(m.contexts >= 1);
    assert_eq!(m.relocations.len(), 1);
    let d = &m.relocations[0];
    assert_eq!((d.target.as_str(), d.from.as_str(), d.to.as_str()), ("svc1", "dc1", "dc2"));
    assert!(d.qoe_before < 0.7, "{d:?}");
    assert_eq!(d.qoe_after, 1.0);
}

#[test]
fn saturated_access_point_sheds_both_subscribers() {
    let summary = run("multi_access.json");
    let m = &summary.metrics;
    assert_eq!(m.false_positive_contexts, 0);
    assert!(m.contexts >= 2);
    assert_eq!(m.handover_count, 2);
    let moved: Vec<(String, String)> = summary
        .log
        .iter()
        .filter_map(|r| match r {
            LogRecord::Action { record, .. } if !record.infeasible => {
                Some((record.target.clone(), record.to.clone().unwrap()))
            }
            _ => None,
        })
        .collect();
    assert_eq!(moved, vec![("ue1".into(), "ap2".into()), ("ue2".into(), "ap2".into())]);
}

#[test]
fn control_runs_stay_quiet() {
    for name in ["congestion.json", "anchor.json", "service_point.json", "multi_access.json"] {
        let m = run_control(name).metrics;
        assert_eq!(m.contexts, 0, "{name} control run produced contexts");
        assert_eq!(m.actions, 0, "{name} control run produced actions");
        assert_eq!(m.infeasible_actions, 0, "{name} control run attempted actions");
    }
}

#[test]
fn every_log_chains_causally() {
    for name in ["congestion.json", "anchor.json", "service_point.json", "multi_access.json"] {
        let summary = run(name);
        let problems = verify_causality(&summary.log);
        assert!(problems.is_empty(), "{name}: {problems:?}");
        assert!(summary.metrics.bus_drops_total == 0, "{name} dropped envelopes");
    }
}
