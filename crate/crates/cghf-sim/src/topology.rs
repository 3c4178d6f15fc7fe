//! The simulated network: regions, cells, access points, gateways, data
//! centers, service points, applications, and UEs. Loaded from JSON, checked
//! for referential integrity, then mutated over a run by script events and
//! network-function actions.

use std::collections::BTreeSet;

use cghf_core::facts::STATIC_FACT_TTL_MS;
use cghf_core::{Fact, Value};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub region: String,
    pub capacity_mbps: f64,
    /// Offered throughput level in Mbps; the generator samples around it.
    pub throughput_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: String,
    /// `cellular` or `wifi`.
    pub technology: String,
    pub cell: String,
    pub gateway: String,
    pub bandwidth_mbps: f64,
    pub qos_classes: Vec<String>,
    pub protocols: Vec<String>,
    /// Utilization in [0, 1]; mutated by script events.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gateway {
    pub id: String,
    pub capacity_mbps: f64,
    /// Utilization in [0, 1]; mutated by script events.
    pub load: f64,
    pub jitter_ms: f64,
    pub path_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCenter {
    pub id: String,
    /// Spare capacity in service-point slots.
    pub headroom: f64,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePoint {
    pub id: String,
    pub datacenter: String,
    /// The application this point serves; its delay requirement drives QoE.
    pub app: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub id: String,
    pub required_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub id: String,
    pub cell: String,
    pub anchor: String,
    pub access_point: String,
    #[serde(default)]
    pub apps: Vec<String>,
    pub qos_cap_mbps: f64,
    #[serde(default)]
    pub qos_constrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub regions: Vec<String>,
    pub cells: Vec<Cell>,
    pub access_points: Vec<AccessPoint>,
    pub gateways: Vec<Gateway>,
    pub datacenters: Vec<DataCenter>,
    pub service_points: Vec<ServicePoint>,
    pub applications: Vec<Application>,
    pub ues: Vec<Ue>,
}

impl Topology {
    /// Referential-integrity and range checks; returns every problem found.
    pub fn check(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let regions: BTreeSet<&str> = self.regions.iter().map(String::as_str).collect();
        let cells: BTreeSet<&str> = self.cells.iter().map(|c| c.id.as_str()).collect();
        let aps: BTreeSet<&str> = self.access_points.iter().map(|a| a.id.as_str()).collect();
        let gws: BTreeSet<&str> = self.gateways.iter().map(|g| g.id.as_str()).collect();
        let dcs: BTreeSet<&str> = self.datacenters.iter().map(|d| d.id.as_str()).collect();
        let apps: BTreeSet<&str> = self.applications.iter().map(|a| a.id.as_str()).collect();

        let mut seen = BTreeSet::new();
        let all_ids = self
            .cells
            .iter()
            .map(|c| c.id.as_str())
            .chain(self.access_points.iter().map(|a| a.id.as_str()))
            .chain(self.gateways.iter().map(|g| g.id.as_str()))
            .chain(self.datacenters.iter().map(|d| d.id.as_str()))
            .chain(self.service_points.iter().map(|s| s.id.as_str()))
            .chain(self.ues.iter().map(|u| u.id.as_str()));
        for id in all_ids {
            if !seen.insert(id) {
                errors.push(format!("duplicate element id `{id}`"));
            }
        }

        for c in &self.cells {
            if !regions.contains(c.region.as_str()) {
                errors.push(format!("cell `{}` references unknown region `{}`", c.id, c.region));
            }
            if c.capacity_mbps <= 0.0 {
                errors.push(format!("cell `{}` capacity must be positive", c.id));
            }
        }
        for a in &self.access_points {
            if !cells.contains(a.cell.as_str()) {
                errors.push(format!("access point `{}` references unknown cell `{}`", a.id, a.cell));
            }
            if !gws.contains(a.gateway.as_str()) {
                errors.push(format!(
                    "access point `{}` references unknown gateway `{}`",
                    a.id, a.gateway
                ));
            }
            if a.bandwidth_mbps <= 0.0 {
                errors.push(format!("access point `{}` bandwidth must be positive", a.id));
            }
        }
        for g in &self.gateways {
            if g.capacity_mbps <= 0.0 {
                errors.push(format!("gateway `{}` capacity must be positive", g.id));
            }
        }
        for s in &self.service_points {
            if !dcs.contains(s.datacenter.as_str()) {
                errors.push(format!(
                    "service point `{}` references unknown datacenter `{}`",
                    s.id, s.datacenter
                ));
            }
            if !apps.contains(s.app.as_str()) {
                errors.push(format!("service point `{}` references unknown app `{}`", s.id, s.app));
            }
        }
        for u in &self.ues {
            if !cells.contains(u.cell.as_str()) {
                errors.push(format!("ue `{}` references unknown cell `{}`", u.id, u.cell));
            }
            if !gws.contains(u.anchor.as_str()) {
                errors.push(format!("ue `{}` references unknown anchor `{}`", u.id, u.anchor));
            }
            if !aps.contains(u.access_point.as_str()) {
                errors.push(format!(
                    "ue `{}` references unknown access point `{}`",
                    u.id, u.access_point
                ));
            }
            for app in &u.apps {
                if !apps.contains(app.as_str()) {
                    errors.push(format!("ue `{}` references unknown app `{}`", u.id, app));
                }
            }
        }
        errors
    }

    /// Sort every collection by id so iteration order is independent of the
    /// JSON file's ordering.
    pub fn normalize(&mut self) {
        self.regions.sort();
        self.cells.sort_by(|a, b| a.id.cmp(&b.id));
        self.access_points.sort_by(|a, b| a.id.cmp(&b.id));
        self.gateways.sort_by(|a, b| a.id.cmp(&b.id));
        self.datacenters.sort_by(|a, b| a.id.cmp(&b.id));
        self.service_points.sort_by(|a, b| a.id.cmp(&b.id));
        self.applications.sort_by(|a, b| a.id.cmp(&b.id));
        self.ues.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn region_of_cell(&self, cell: &str) -> Option<&str> {
        self.cells.iter().find(|c| c.id == cell).map(|c| c.region.as_str())
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn access_point(&self, id: &str) -> Option<&AccessPoint> {
        self.access_points.iter().find(|a| a.id == id)
    }

    pub fn gateway(&self, id: &str) -> Option<&Gateway> {
        self.gateways.iter().find(|g| g.id == id)
    }

    pub fn datacenter(&self, id: &str) -> Option<&DataCenter> {
        self.datacenters.iter().find(|d| d.id == id)
    }

    pub fn application(&self, id: &str) -> Option<&Application> {
        self.applications.iter().find(|a| a.id == id)
    }

    /// Facts that describe the wiring of the network itself, asserted once
    /// at load (and re-asserted when a script event rewires something).
    pub fn bootstrap_facts(&self) -> Vec<(String, String, Value)> {
        let mut out = Vec::new();
        for c in &self.cells {
            out.push((c.id.clone(), "region".into(), Value::Str(c.region.clone())));
        }
        for a in &self.access_points {
            out.push((a.id.clone(), "technology".into(), Value::Str(a.technology.clone())));
        }
        for s in &self.service_points {
            out.push((s.id.clone(), "hosted_at".into(), Value::Str(s.datacenter.clone())));
        }
        for u in &self.ues {
            if let Some(r) = self.region_of_cell(&u.cell) {
                out.push((u.id.clone(), "region".into(), Value::Str(r.to_string())));
            }
            out.push((u.id.clone(), "connected_gw".into(), Value::Str(u.anchor.clone())));
            out.push((u.id.clone(), "access_point".into(), Value::Str(u.access_point.clone())));
            if let Some(app) = u.apps.first() {
                out.push((u.id.clone(), "app".into(), Value::Str(app.clone())));
            }
        }
        out
    }
}

/// Build a static fact carrying state asserted from outside the pipeline;
/// `origin` names who asserted it (the topology loader or a network
/// function re-describing the wiring after a change).
pub fn bootstrap_fact(
    n: u64,
    subject: &str,
    attribute: &str,
    value: Value,
    origin: &str,
    now: i64,
) -> Fact {
    Fact {
        fact_id: format!("boot-{n}"),
        subject: subject.to_string(),
        attribute: attribute.to_string(),
        value,
        asserted_at: now,
        ttl_ms: STATIC_FACT_TTL_MS,
        provenance: vec![format!("bootstrap:{origin}")],
    }
}
