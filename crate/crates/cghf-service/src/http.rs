//! HTTP front: every operation is a POST under `/v1` carrying JSON and a
//! bearer token. Replies are always JSON with an `ok` flag; callers that
//! only read the body never need to look at the status line.

use axum::body::Bytes;
use axum::extract::State;
use axum::http::HeaderMap;
use axum::routing::{get, post};
use axum::{Json, Router};
use cghf_core::nbi::ServiceManifest;
use serde_json::{json, Value};

use crate::state::ServiceState;

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/register", post(register))
        .route("/v1/push", post(push))
        .route("/v1/subscribe", post(subscribe))
        .route("/v1/fetch", post(fetch))
        .route("/v1/revoke", post(revoke))
        .route("/v1/admin/tick", post(tick))
        .with_state(state)
}

fn bearer(headers: &HeaderMap) -> String {
    headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or_default()
        .to_string()
}

fn fail(name: &str, detail: impl std::fmt::Display) -> Json<Value> {
    Json(json!({ "ok": false, "error": name, "detail": detail.to_string() }))
}

fn parse_body(body: &Bytes) -> Result<Value, Json<Value>> {
    serde_json::from_slice(body).map_err(|e| fail("BadRequest", e))
}

fn str_field(req: &Value, name: &str) -> Result<String, Json<Value>> {
    req.get(name)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| fail("BadRequest", format!("`{name}` must be a string")))
}

fn f64_field(req: &Value, name: &str) -> Result<f64, Json<Value>> {
    req.get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| fail("BadRequest", format!("`{name}` must be a number")))
}

fn i64_field(req: &Value, name: &str) -> Result<i64, Json<Value>> {
    req.get(name)
        .and_then(Value::as_i64)
        .ok_or_else(|| fail("BadRequest", format!("`{name}` must be an integer")))
}

async fn register(
    State(state): State<ServiceState>,
    headers: HeaderMap,
    body: Bytes,
) -> Json<Value> {
    let req = match parse_body(&body) {
        Ok(v) => v,
        Err(e) => return e,
    };
    let manifest: ServiceManifest =
        match serde_json::from_value(req.get("manifest").cloned().unwrap_or(Value::Null)) {
            Ok(m) => m,
            Err(e) => return fail("BadRequest", format!("manifest: {e}")),
        };
    match state.nbi.lock().unwrap().register(&bearer(&headers), manifest, state.now()) {
        Ok(r) => Json(json!({
            "ok": true,
            "registration_id": r.registration_id,
            "installed_rules": r.installed_rules,
            "installed_factdefs": r.installed_factdefs,
        })),
        Err(e) => fail(e.name(), e),
    }
}

async fn push(State(state): State<ServiceState>, headers: HeaderMap, body: Bytes) -> Json<Value> {
    let req = match parse_body(&body) {
        Ok(v) => v,
        Err(e) => return e,
    };
    let (topic, value, ts) = match (str_field(&req, "topic"), f64_field(&req, "value"), i64_field(&req, "ts")) {
        (Ok(t), Ok(v), Ok(ts)) => (t, v, ts),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
    };
    let unit = req.get("unit").and_then(Value::as_str).unwrap_or_default();
    match state.nbi.lock().unwrap().push(&bearer(&headers), &topic, value, unit, ts, state.now()) {
        Ok(receipt) => Json(json!({ "ok": true, "msg_id": receipt.msg_id, "matched": receipt.matched })),
        Err(e) => fail(e.name(), e),
    }
}

async fn subscribe(
    State(state): State<ServiceState>,
    headers: HeaderMap,
    body: Bytes,
) -> Json<Value> {
    let req = match parse_body(&body) {
        Ok(v) => v,
        Err(e) => return e,
    };
    let pattern = match str_field(&req, "pattern") {
        Ok(p) => p,
        Err(e) => return e,
    };
    match state.nbi.lock().unwrap().subscribe(&bearer(&headers), &pattern, state.now()) {
        Ok(handle) => Json(json!({ "ok": true, "handle": handle })),
        Err(e) => fail(e.name(), e),
    }
}

async fn fetch(State(state): State<ServiceState>, headers: HeaderMap, body: Bytes) -> Json<Value> {
    let req = match parse_body(&body) {
        Ok(v) => v,
        Err(e) => return e,
    };
    let handle = match str_field(&req, "handle") {
        Ok(h) => h,
        Err(e) => return e,
    };
    let max_n = req.get("max_n").and_then(Value::as_u64).unwrap_or(u64::MAX) as usize;
    match state.nbi.lock().unwrap().fetch(&bearer(&headers), &handle, max_n, state.now()) {
        Ok(envelopes) => Json(json!({ "ok": true, "envelopes": envelopes })),
        Err(e) => fail(e.name(), e),
    }
}

async fn revoke(State(state): State<ServiceState>, headers: HeaderMap, body: Bytes) -> Json<Value> {
    let req = match parse_body(&body) {
        Ok(v) => v,
        Err(e) => return e,
    };
    let registration_id = match str_field(&req, "registration_id") {
        Ok(r) => r,
        Err(e) => return e,
    };
    match state.nbi.lock().unwrap().revoke(&bearer(&headers), &registration_id, state.now()) {
        Ok(()) => Json(json!({ "ok": true })),
        Err(e) => fail(e.name(), e),
    }
}

/// Run one node cycle. Gated on the admin token, and the clock used is the
/// caller's `now` so tests can drive virtual time.
async fn tick(State(state): State<ServiceState>, headers: HeaderMap, body: Bytes) -> Json<Value> {
    if !state.is_admin(&bearer(&headers)) {
        return fail("Unauthorized", "tick needs the admin token");
    }
    let req = match parse_body(&body) {
        Ok(v) => v,
        Err(e) => return e,
    };
    let now = match i64_field(&req, "now") {
        Ok(n) => n,
        Err(e) => return e,
    };
    let report = state.tick(now);
    Json(json!({
        "ok": true,
        "ingested": report.ingested,
        "generated": report.generated.len(),
        "contexts": report.cycle.contexts.len(),
    }))
}
