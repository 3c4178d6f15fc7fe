//! Fact generation: raw sample storage, windowed aggregates, and the
//! classification pipeline that turns aggregate values into facts.

mod aggregate;
mod pipeline;
mod storage;
mod types;

pub use aggregate::AggregateFn;
pub use pipeline::{FactGenerator, PipelineDiagnostic};
pub use storage::FactStore;
pub use types::{Fact, FactsError, Sample};

/// Static bootstrap facts (topology, identity) must outlive any run but the
/// fact contract requires a positive ttl.
pub const STATIC_FACT_TTL_MS: u64 = 1_000_000_000_000_000;
