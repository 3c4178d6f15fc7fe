//! Telemetry synthesis: each tick, every monitored quantity becomes one
//! sample on its own topic. Levels come from the (script-mutated) topology;
//! noise is Gaussian with a deviation proportional to the level.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::topology::Topology;

/// One raw sample to publish this tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Reading {
    pub topic: String,
    pub value: f64,
    pub unit: &'static str,
}

/// User-perceived quality for a delivered delay against a required one:
/// 1 when within the requirement, falling linearly to 0 at three times it.
pub fn qoe(delay_ms: f64, required_ms: f64) -> f64 {
    if delay_ms <= required_ms {
        1.0
    } else {
        (1.0 - (delay_ms - required_ms) / (2.0 * required_ms)).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Generators {
    pub sigma: f64,
}

impl Generators {
    pub fn new(sigma: f64) -> Generators {
        Generators { sigma }
    }

    fn noisy(&self, base: f64, rng: &mut impl Rng) -> f64 {
        let dev = self.sigma * base.abs();
        if dev <= 0.0 {
            return base;
        }
        let normal = Normal::new(0.0, dev).expect("deviation is finite and positive");
        base + normal.sample(rng)
    }

    /// Produce this tick's readings in a fixed order: cells, then regions,
    /// then gateways, then access points, then service points.
    pub fn tick(&self, topo: &Topology, rng: &mut impl Rng) -> Vec<Reading> {
        let mut out = Vec::new();
        let mut region_sums: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();

        for c in &topo.cells {
            let v = self.noisy(c.throughput_mbps, rng).max(0.0);
            region_sums
                .entry(c.region.as_str())
                .and_modify(|s| *s += v)
                .or_insert(v);
            out.push(Reading { topic: format!("raw/cell/{}/throughput", c.id), value: v, unit: "Mbps" });
        }
        for (region, sum) in region_sums {
            out.push(Reading {
                topic: format!("raw/region/{region}/throughput"),
                value: sum,
                unit: "Mbps",
            });
        }
        for g in &topo.gateways {
            let base = g.path_delay_ms + g.jitter_ms * g.load;
            out.push(Reading {
                topic: format!("raw/gw/{}/latency_ms", g.id),
                value: self.noisy(base, rng).max(0.0),
                unit: "ms",
            });
        }
        for a in &topo.access_points {
            out.push(Reading {
                topic: format!("raw/ap/{}/load", a.id),
                value: self.noisy(a.load, rng).clamp(0.0, 1.0),
                unit: "ratio",
            });
        }
        for s in &topo.service_points {
            let delay = topo.datacenter(&s.datacenter).map(|d| d.delay_ms).unwrap_or(0.0);
            let required = topo.application(&s.app).map(|a| a.required_delay_ms).unwrap_or(delay);
            out.push(Reading {
                topic: format!("raw/svc/{}/qoe", s.id),
                value: self.noisy(qoe(delay, required), rng).clamp(0.0, 1.0),
                unit: "qoe",
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn topo() -> Topology {
        let mut t: Topology = serde_json::from_value(serde_json::json!({
            "regions": ["Y"],
            "cells": [
                {"id": "c1", "region": "Y", "capacity_mbps": 600.0, "throughput_mbps": 350.0},
                {"id": "c2", "region": "Y", "capacity_mbps": 400.0, "throughput_mbps": 250.0}
            ],
            "access_points": [{
                "id": "ap1", "technology": "cellular", "cell": "c1", "gateway": "gw1",
                "bandwidth_mbps": 100.0, "qos_classes": ["gold"], "protocols": ["ipv4"], "load": 0.4
            }],
            "gateways": [{"id": "gw1", "capacity_mbps": 500.0, "load": 0.5, "jitter_ms": 10.0, "path_delay_ms": 8.0}],
            "datacenters": [{"id": "dc1", "headroom": 2.0, "delay_ms": 20.0}],
            "service_points": [{"id": "svc1", "datacenter": "dc1", "app": "appA"}],
            "applications": [{"id": "appA", "required_delay_ms": 40.0}],
            "ues": []
        }))
        .unwrap();
        t.normalize();
        t
    }

    #[test]
    fn noiseless_readings_are_exact_levels() {
        let g = Generators::new(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let readings = g.tick(&topo(), &mut rng);
        let find = |t: &str| readings.iter().find(|r| r.topic == t).unwrap().value;
        assert_eq!(find("raw/cell/c1/throughput"), 350.0);
        assert_eq!(find("raw/region/Y/throughput"), 600.0);
        assert_eq!(find("raw/gw/gw1/latency_ms"), 8.0 + 10.0 * 0.5);
        assert_eq!(find("raw/ap/ap1/load"), 0.4);
        assert_eq!(find("raw/svc/svc1/qoe"), 1.0);
    }

    #[test]
    fn reading_order_is_stable() {
        let g = Generators::new(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let topics: Vec<String> = g.tick(&topo(), &mut rng).into_iter().map(|r| r.topic).collect();
        assert_eq!(
            topics,
            vec![
                "raw/cell/c1/throughput",
                "raw/cell/c2/throughput",
                "raw/region/Y/throughput",
                "raw/gw/gw1/latency_ms",
                "raw/ap/ap1/load",
                "raw/svc/svc1/qoe",
            ]
        );
    }

    #[test]
    fn same_seed_same_noise() {
        let g = Generators::new(0.05);
        let a = g.tick(&topo(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = g.tick(&topo(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn qoe_is_piecewise_linear() {
        assert_eq!(qoe(30.0, 40.0), 1.0);
        assert_eq!(qoe(40.0, 40.0), 1.0);
        assert_eq!(qoe(80.0, 40.0), 0.5);
        assert_eq!(qoe(120.0, 40.0), 0.0);
        assert_eq!(qoe(500.0, 40.0), 0.0);
    }
}
