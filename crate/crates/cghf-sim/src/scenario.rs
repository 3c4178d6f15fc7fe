//! Scenario files: which topology to load, which rule files to install,
//! which network functions subscribe to what, and a time-ordered script of
//! changes to apply during the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nf::NfKind;
use crate::topology::{AccessPoint, Topology};

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("rule load failed for {file}: {details}")]
    RuleLoad { file: String, details: String },
    #[error("log line {line}: {detail}")]
    MalformedLog { line: usize, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One scripted change. `over_s` of zero means a step; otherwise the level
/// ramps linearly from its current value to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Change {
    CellThroughput {
        cell: String,
        to_mbps: f64,
        #[serde(default)]
        over_s: u64,
    },
    GatewayLevel {
        gateway: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        load_to: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        jitter_to_ms: Option<f64>,
        #[serde(default)]
        over_s: u64,
    },
    DatacenterDelay {
        datacenter: String,
        to_ms: f64,
        #[serde(default)]
        over_s: u64,
    },
    ApLoad {
        access_point: String,
        to: f64,
        #[serde(default)]
        over_s: u64,
    },
    UeMove {
        ue: String,
        cell: String,
    },
    ApAppear {
        access_point: AccessPoint,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub at_s: u64,
    /// Marks the scripted ground-truth anomaly; detection latency and
    /// false-positive counting key off the first such event.
    #[serde(default)]
    pub anomaly: bool,
    #[serde(flatten)]
    pub change: Change,
}

fn one() -> f64 {
    1.0
}

/// Per-term weights of the network functions' candidate objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    #[serde(default = "one")]
    pub anchor_jitter: f64,
    #[serde(default = "one")]
    pub anchor_path_delay: f64,
    #[serde(default = "one")]
    pub place_delay: f64,
    #[serde(default = "one")]
    pub access_load: f64,
    #[serde(default = "one")]
    pub access_inv_bandwidth: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            anchor_jitter: 1.0,
            anchor_path_delay: 1.0,
            place_delay: 1.0,
            access_load: 1.0,
            access_inv_bandwidth: 1.0,
        }
    }
}

fn default_max_gateway_load() -> f64 {
    0.95
}

fn default_min_headroom() -> f64 {
    1.0
}

/// Feasibility cutoffs for candidate selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    #[serde(default = "default_max_gateway_load")]
    pub max_gateway_load: f64,
    #[serde(default = "default_min_headroom")]
    pub min_headroom: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_gateway_load: 0.95, min_headroom: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfSpec {
    pub kind: NfKind,
    pub pattern: String,
}

fn default_tick_ms() -> u64 {
    1_000
}

fn default_noise_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Path to the topology JSON, relative to this scenario file.
    pub topology: String,
    /// Rule files to install, in order, relative to this scenario file.
    pub rules: Vec<String>,
    pub seed: u64,
    pub duration_s: u64,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    /// Gaussian noise as a fraction of each stream's base level.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub nfs: Vec<NfSpec>,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

impl Scenario {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.duration_s == 0 {
            errors.push("duration_s must be positive".into());
        }
        if self.tick_ms == 0 {
            errors.push("tick_ms must be positive".into());
        }
        if !(self.noise_sigma >= 0.0) {
            errors.push("noise_sigma must be non-negative".into());
        }
        if self.events.windows(2).any(|w| w[0].at_s > w[1].at_s) {
            errors.push("events must be sorted by at_s".into());
        }
        errors
    }
}

/// A scenario together with everything it references, ready to simulate.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub topology: Topology,
    /// (file name, file contents) per rules entry, in install order.
    pub rules: Vec<(String, String)>,
}

impl LoadedScenario {
    /// Read a scenario file, resolving its topology and rule paths relative
    /// to the scenario file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<LoadedScenario> {
        let path = path.as_ref();
        let scenario: Scenario = serde_json::from_str(&fs::read_to_string(path)?)?;
        let errors = scenario.validate();
        if !errors.is_empty() {
            return Err(SimError::InvalidScenario(errors.join("; ")));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));

        let topo_path = base.join(&scenario.topology);
        let mut topology: Topology = serde_json::from_str(&fs::read_to_string(&topo_path)?)?;
        topology.normalize();
        let errors = topology.check();
        if !errors.is_empty() {
            return Err(SimError::InvalidTopology(errors.join("; ")));
        }

        let mut rules = Vec::new();
        for file in &scenario.rules {
            let text = fs::read_to_string(base.join(file))?;
            rules.push((file.clone(), text));
        }
        Ok(LoadedScenario { scenario, topology, rules })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_script_parses_with_defaults() {
        let s: ScriptEvent = serde_json::from_value(serde_json::json!({
            "at_s": 300, "kind": "cell_throughput", "cell": "c1", "to_mbps": 950.0, "anomaly": true
        }))
        .unwrap();
        assert!(s.anomaly);
        assert_eq!(s.change, Change::CellThroughput { cell: "c1".into(), to_mbps: 950.0, over_s: 0 });
    }

    #[test]
    fn unsorted_events_are_rejected() {
        let scenario = Scenario {
            name: "x".into(),
            topology: "t.json".into(),
            rules: vec![],
            seed: 1,
            duration_s: 10,
            tick_ms: 1_000,
            noise_sigma: 0.0,
            weights: Weights::default(),
            limits: Limits::default(),
            nfs: vec![],
            events: vec![
                ScriptEvent {
                    at_s: 5,
                    anomaly: false,
                    change: Change::UeMove { ue: "u".into(), cell: "c".into() },
                },
                ScriptEvent {
                    at_s: 2,
                    anomaly: false,
                    change: Change::UeMove { ue: "u".into(), cell: "c".into() },
                },
            ],
        };
        assert_eq!(scenario.validate(), vec!["events must be sorted by at_s".to_string()]);
    }

    #[test]
    fn weight_defaults_are_unity() {
        let w: Weights = serde_json::from_value(serde_json::json!({"place_delay": 2.5})).unwrap();
        assert_eq!(w.place_delay, 2.5);
        assert_eq!(w.anchor_jitter, 1.0);
        assert_eq!(w.access_inv_bandwidth, 1.0);
    }
}
