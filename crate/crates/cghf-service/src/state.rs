//! Shared state for both service fronts: the node, its northbound guard,
//! and the clock they agree on.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use cghf_core::nbi::{Nbi, NbiConfig};
use cghf_core::node::{CghfNode, TickReport};
use cghf_core::Bus;

/// Milliseconds since the unix epoch.
pub fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// The tick is the only thing that advances time here. Under the
/// self-ticker that means wall clock; under manual ticks it means whatever
/// timeline the driver uses. Expiry checks on fetch then agree with the
/// timestamps the node wrote, instead of comparing a virtual timeline
/// against the wall clock.
#[derive(Clone)]
pub struct ServiceState {
    pub nbi: Arc<Mutex<Nbi>>,
    admin_token: Option<String>,
    clock: Arc<AtomicI64>,
}

impl ServiceState {
    /// Stand up a bus, a node with `rules` installed, and the northbound
    /// guard around them. Rule errors name the offending file.
    pub fn build(config: NbiConfig, rules: &[(String, String)]) -> Result<ServiceState, String> {
        let bus = Bus::new("cghf");
        let mut node = CghfNode::new(bus).map_err(|e| e.to_string())?;
        for (file, text) in rules {
            node.install_rules(text).map_err(|e| format!("{file}: {e}"))?;
        }
        let admin_token = config.admin_token.clone();
        let nbi = Nbi::new(Arc::new(Mutex::new(node)), config)?;
        Ok(ServiceState {
            nbi: Arc::new(Mutex::new(nbi)),
            admin_token,
            clock: Arc::new(AtomicI64::new(0)),
        })
    }

    pub fn is_admin(&self, token: &str) -> bool {
        self.admin_token.as_deref() == Some(token)
    }

    /// The node's current time: the latest tick instant.
    pub fn now(&self) -> i64 {
        self.clock.load(Ordering::Relaxed)
    }

    /// Run one node cycle, outside the northbound lock. Time never moves
    /// backward: a stale `now` reuses the newest one seen.
    pub fn tick(&self, now: i64) -> TickReport {
        let prev = self.clock.fetch_max(now, Ordering::Relaxed);
        let effective = prev.max(now);
        let node = self.nbi.lock().unwrap().node().clone();
        let report = node.lock().unwrap().tick(effective);
        report
    }
}
