//! Serves a context node over two fronts: an HTTP/JSON API and a
//! newline-delimited JSON line protocol on a second TCP port. Both fronts
//! drive the same northbound interface instance.

pub mod config;
pub mod http;
pub mod line;
pub mod serve;
pub mod state;

pub use config::ServiceConfig;
pub use serve::{start, Running};
pub use state::ServiceState;
