use cghf_core::Envelope;
use cghf_core::nbi::{RegistrationReceipt, ServiceManifest};
use serde::de::DeserializeOwned;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with `ok: false`; carries the error name and detail.
    #[error("{name}: {detail}")]
    Api { name: String, detail: String },
    #[error("unexpected response shape: {0}")]
    Shape(String),
}

/// Talks to one service instance on behalf of one principal.
pub struct Client {
    http: reqwest::Client,
    base: String,
    token: String,
}

impl Client {
    /// `base` like `http://127.0.0.1:8080`, without a trailing slash.
    pub fn new(base: &str, token: &str) -> Client {
        Client {
            http: reqwest::Client::new(),
            base: base.trim_end_matches('/').to_string(),
            token: token.to_string(),
        }
    }

    async fn call<T: DeserializeOwned>(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<T, ClientError> {
        let response = self
            .http
            .post(format!("{}{path}", self.base))
            .bearer_auth(&self.token)
            .json(&body)
            .send()
            .await?;
        let value: serde_json::Value = response.json().await?;
        if value.get("ok").and_then(|v| v.as_bool()) == Some(true) {
            serde_json::from_value(value).map_err(|e| ClientError::Shape(e.to_string()))
        } else {
            Err(ClientError::Api {
                name: value
                    .get("error")
                    .and_then(|v| v.as_str())
                    .unwrap_or("unknown")
                    .to_string(),
                detail: value
                    .get("detail")
                    .and_then(|v| v.as_str())
                    .unwrap_or_default()
                    .to_string(),
            })
        }
    }

    pub async fn register(
        &self,
        manifest: &ServiceManifest,
    ) -> Result<RegistrationReceipt, ClientError> {
        #[derive(serde::Deserialize)]
        struct Reply {
            registration_id: String,
            installed_rules: Vec<String>,
            installed_factdefs: Vec<String>,
        }
        let reply: Reply = self.call("/v1/register", json!({ "manifest": manifest })).await?;
        Ok(RegistrationReceipt {
            registration_id: reply.registration_id,
            installed_rules: reply.installed_rules,
            installed_factdefs: reply.installed_factdefs,
        })
    }

    pub async fn push(
        &self,
        topic: &str,
        value: f64,
        unit: &str,
        ts: i64,
    ) -> Result<String, ClientError> {
        #[derive(serde::Deserialize)]
        struct Reply {
            msg_id: String,
        }
        let reply: Reply = self
            .call("/v1/push", json!({ "topic": topic, "value": value, "unit": unit, "ts": ts }))
            .await?;
        Ok(reply.msg_id)
    }

    pub async fn subscribe(&self, pattern: &str) -> Result<String, ClientError> {
        #[derive(serde::Deserialize)]
        struct Reply {
            handle: String,
        }
        let reply: Reply = self.call("/v1/subscribe", json!({ "pattern": pattern })).await?;
        Ok(reply.handle)
    }

    pub async fn fetch(&self, handle: &str, max_n: usize) -> Result<Vec<Envelope>, ClientError> {
        #[derive(serde::Deserialize)]
        struct Reply {
            envelopes: Vec<Envelope>,
        }
        let reply: Reply =
            self.call("/v1/fetch", json!({ "handle": handle, "max_n": max_n })).await?;
        Ok(reply.envelopes)
    }

    pub async fn revoke(&self, registration_id: &str) -> Result<(), ClientError> {
        let _: serde_json::Value = self
            .call("/v1/revoke", json!({ "registration_id": registration_id }))
            .await?;
        Ok(())
    }

    /// Ask the node to run one processing step at `now`; admin surface.
    pub async fn tick(&self, now: i64) -> Result<(), ClientError> {
        let _: serde_json::Value = self.call("/v1/admin/tick", json!({ "now": now })).await?;
        Ok(())
    }
}
