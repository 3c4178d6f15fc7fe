//! Simulated mobile core: topology, scripted scenarios, stream generators,
//! network-function reactions, and an event log that metrics are derived
//! from. Runs are deterministic for a given scenario and seed.

pub mod engine;
pub mod generators;
pub mod metrics;
pub mod nf;
pub mod replay;
pub mod scenario;
pub mod topology;
pub mod trace;

pub use engine::{RunOptions, RunSummary, Simulation};
pub use metrics::MetricsReport;
pub use scenario::Scenario;
pub use topology::Topology;
pub use trace::LogRecord;
