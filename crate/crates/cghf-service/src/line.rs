//! Line-protocol front: one JSON object per line over plain TCP. Requests
//! carry `op` and `token` fields; every reply is a single JSON line with
//! an `ok` flag, so a session is a strict request/reply alternation.

use cghf_core::nbi::ServiceManifest;
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

use crate::state::ServiceState;

fn fail(name: &str, detail: impl std::fmt::Display) -> Value {
    json!({ "ok": false, "error": name, "detail": detail.to_string() })
}

/// Answer one request line. Pure request-in, reply-out; the TCP session
/// and in-process tests share it.
pub fn handle_line(line: &str, state: &ServiceState) -> Value {
    let req: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return fail("BadRequest", e),
    };
    let op = req.get("op").and_then(Value::as_str).unwrap_or_default().to_string();
    let token = req.get("token").and_then(Value::as_str).unwrap_or_default().to_string();
    let now = state.now();
    match op.as_str() {
        "auth" => match state.nbi.lock().unwrap().authenticate(&token) {
            Ok(principal) => json!({ "ok": true, "principal": principal }),
            Err(e) => fail(e.name(), e),
        },
        "register" => {
            let manifest: ServiceManifest =
                match serde_json::from_value(req.get("manifest").cloned().unwrap_or(Value::Null)) {
                    Ok(m) => m,
                    Err(e) => return fail("BadRequest", format!("manifest: {e}")),
                };
            match state.nbi.lock().unwrap().register(&token, manifest, now) {
                Ok(r) => json!({
                    "ok": true,
                    "registration_id": r.registration_id,
                    "installed_rules": r.installed_rules,
                    "installed_factdefs": r.installed_factdefs,
                }),
                Err(e) => fail(e.name(), e),
            }
        }
        "push" => {
            let env = req.get("envelope").cloned().unwrap_or(Value::Null);
            let (Some(topic), Some(value), Some(ts)) = (
                env.get("topic").and_then(Value::as_str),
                env.get("value").and_then(Value::as_f64),
                env.get("ts").and_then(Value::as_i64),
            ) else {
                return fail("BadRequest", "envelope needs `topic`, `value`, and `ts`");
            };
            let unit = env.get("unit").and_then(Value::as_str).unwrap_or_default();
            match state.nbi.lock().unwrap().push(&token, topic, value, unit, ts, now) {
                Ok(r) => json!({ "ok": true, "msg_id": r.msg_id, "matched": r.matched }),
                Err(e) => fail(e.name(), e),
            }
        }
        "subscribe" => {
            let Some(pattern) = req.get("pattern").and_then(Value::as_str) else {
                return fail("BadRequest", "`pattern` must be a string");
            };
            match state.nbi.lock().unwrap().subscribe(&token, pattern, now) {
                Ok(handle) => json!({ "ok": true, "handle": handle }),
                Err(e) => fail(e.name(), e),
            }
        }
        "fetch" => {
            let Some(handle) = req.get("handle").and_then(Value::as_str) else {
                return fail("BadRequest", "`handle` must be a string");
            };
            let max_n = req.get("max_n").and_then(Value::as_u64).unwrap_or(u64::MAX) as usize;
            match state.nbi.lock().unwrap().fetch(&token, handle, max_n, now) {
                Ok(envelopes) => json!({ "ok": true, "envelopes": envelopes }),
                Err(e) => fail(e.name(), e),
            }
        }
        "revoke" => {
            let Some(registration_id) = req.get("registration_id").and_then(Value::as_str) else {
                return fail("BadRequest", "`registration_id` must be a string");
            };
            match state.nbi.lock().unwrap().revoke(&token, registration_id, now) {
                Ok(()) => json!({ "ok": true }),
                Err(e) => fail(e.name(), e),
            }
        }
        "tick" => {
            if !state.is_admin(&token) {
                return fail("Unauthorized", "tick needs the admin token");
            }
            let at = req.get("now").and_then(Value::as_i64).unwrap_or(now);
            let report = state.tick(at);
            json!({
                "ok": true,
                "ingested": report.ingested,
                "generated": report.generated.len(),
                "contexts": report.cycle.contexts.len(),
            })
        }
        other => fail("BadRequest", format!("unknown op `{other}`")),
    }
}

/// Accept connections until the listener dies.
pub async fn serve(listener: TcpListener, state: ServiceState) {
    loop {
        let Ok((socket, _)) = listener.accept().await else { break };
        let state = state.clone();
        tokio::spawn(session(socket, state));
    }
}

async fn session(socket: TcpStream, state: ServiceState) {
    let (reader, mut writer) = socket.into_split();
    let mut lines = BufReader::new(reader).lines();
    while let Ok(Some(line)) = lines.next_line().await {
        if line.trim().is_empty() {
            continue;
        }
        let mut reply = handle_line(&line, &state).to_string();
        reply.push('\n');
        if writer.write_all(reply.as_bytes()).await.is_err() {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cghf_core::nbi::{NbiConfig, PrincipalConfig};

    fn state() -> ServiceState {
        let config = NbiConfig {
            principals: vec![PrincipalConfig {
                principal_id: "probe".into(),
                token: "tok".into(),
                publish_scope: vec!["raw/#".into()],
                subscribe_scope: vec!["context/#".into()],
            }],
            admin_token: Some("admin".into()),
        };
        ServiceState::build(config, &[]).unwrap()
    }

    #[test]
    fn auth_distinguishes_tokens() {
        let state = state();
        let ok = handle_line(r#"{"op":"auth","token":"tok"}"#, &state);
        assert_eq!(ok["ok"], true);
        assert_eq!(ok["principal"], "probe");
        let bad = handle_line(r#"{"op":"auth","token":"nope"}"#, &state);
        assert_eq!(bad["ok"], false);
        assert_eq!(bad["error"], "Unauthorized");
    }

    #[test]
    fn garbage_and_unknown_ops_are_bad_requests() {
        let state = state();
        assert_eq!(handle_line("not json", &state)["error"], "BadRequest");
        assert_eq!(handle_line(r#"{"op":"frobnicate"}"#, &state)["error"], "BadRequest");
        assert_eq!(handle_line(r#"{"op":"push","token":"tok"}"#, &state)["error"], "BadRequest");
    }

    #[test]
    fn push_requires_a_registration() {
        let state = state();
        let reply = handle_line(
            r#"{"op":"push","token":"tok","envelope":{"topic":"raw/cell/a/load","value":1.0,"ts":5}}"#,
            &state,
        );
        assert_eq!(reply["error"], "UndeclaredStream");
        let reg = handle_line(
            r#"{"op":"register","token":"tok","manifest":{"service_name":"probe","streams":[{"topic":"raw/cell/a/load","unit":"ratio","value_type":"number"}]}}"#,
            &state,
        );
        assert_eq!(reg["ok"], true, "{reg}");
        let reply = handle_line(
            r#"{"op":"push","token":"tok","envelope":{"topic":"raw/cell/a/load","value":1.0,"ts":5}}"#,
            &state,
        );
        assert_eq!(reply["ok"], true, "{reply}");
        assert!(reply["msg_id"].as_str().unwrap().starts_with("cghf-"));
    }
}
