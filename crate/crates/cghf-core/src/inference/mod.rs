//! Forward-chaining inference over the fact base. Each cycle matches every
//! rule against working memory, picks one activation by conflict
//! resolution, fires it, and repeats until quiescence or the firing budget
//! runs out. Refraction keeps an activation from firing twice unless newer
//! evidence re-derives it.

mod engine;
mod kb;

pub use engine::{fact_fields, Context, CycleReport, Engine, EngineDiagnostic, Firing, FIRING_BUDGET};
pub use kb::KnowledgeBase;
