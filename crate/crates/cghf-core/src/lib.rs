//! Core of a context generation and handling function (CGHF) for mobile core
//! networks: a topic-based publish/subscribe bus with peer federation, a fact
//! generation pipeline over raw telemetry streams, an event-condition-action
//! rule language, a forward-chaining inference engine, and a token-scoped
//! northbound interface for external stakeholders.

pub mod bus;
pub mod envelope;
pub mod facts;
pub mod inference;
pub mod nbi;
pub mod node;
pub mod rules;
pub mod topic;
pub mod value;

pub use bus::{Bus, BusError, Receipt, SubId};
pub use envelope::{Envelope, EnvelopeDraft};
pub use facts::{Fact, FactStore, Sample};
pub use inference::{Context, Engine};
pub use topic::{Topic, TopicPattern};
pub use value::{PayloadValue, Value};
