//! Thin async client for the service's HTTP API.

mod client;

pub use client::{Client, ClientError};
