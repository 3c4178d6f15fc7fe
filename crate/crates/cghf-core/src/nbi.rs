//! Northbound interface: the operations external services use to feed
//! streams in, install rules, and consume contexts. Every operation
//! authenticates a bearer token, enforces the principal's topic scopes,
//! and lands in an audit log.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Bus, BusError, Receipt, SubId};
use crate::envelope::{Envelope, EnvelopeDraft};
use crate::node::CghfNode;
use crate::topic::{Topic, TopicPattern};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum NbiError {
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("scope violation: {0}")]
    ScopeViolation(String),
    #[error("undeclared stream: {0}")]
    UndeclaredStream(String),
    #[error("validation failed: {}", .0.join("; "))]
    ValidationFailed(Vec<String>),
    #[error("unknown handle: {0}")]
    UnknownHandle(String),
    #[error("unknown registration: {0}")]
    UnknownRegistration(String),
    #[error(transparent)]
    Bus(#[from] BusError),
}

impl NbiError {
    /// Stable machine-readable name, used on the wire.
    pub fn name(&self) -> &'static str {
        match self {
            NbiError::Unauthorized(_) => "Unauthorized",
            NbiError::ScopeViolation(_) => "ScopeViolation",
            NbiError::UndeclaredStream(_) => "UndeclaredStream",
            NbiError::ValidationFailed(_) => "ValidationFailed",
            NbiError::UnknownHandle(_) => "UnknownHandle",
            NbiError::UnknownRegistration(_) => "UnknownRegistration",
            NbiError::Bus(e) => e.name(),
        }
    }
}

/// Static access-control entry, loaded from configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrincipalConfig {
    pub principal_id: String,
    pub token: String,
    /// Topic patterns the principal may publish raw samples under.
    pub publish_scope: Vec<String>,
    /// Topic patterns its context subscriptions must stay within.
    pub subscribe_scope: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NbiConfig {
    pub principals: Vec<PrincipalConfig>,
    /// Token for administrative operations (principal revocation).
    #[serde(default)]
    pub admin_token: Option<String>,
}

/// A stream a service commits to in its manifest; pushes are checked
/// against these declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredStream {
    pub topic: String,
    #[serde(default)]
    pub unit: String,
    #[serde(default = "default_value_type")]
    pub value_type: String,
}

fn default_value_type() -> String {
    "number".to_string()
}

/// What a service brings when it registers: the streams it will feed and,
/// optionally, rules text to install on the node.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ServiceManifest {
    pub service_name: String,
    #[serde(default)]
    pub streams: Vec<DeclaredStream>,
    #[serde(default)]
    pub rules: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationReceipt {
    pub registration_id: String,
    pub installed_rules: Vec<String>,
    pub installed_factdefs: Vec<String>,
}

/// Everything an operator needs to see about one principal.
#[derive(Debug, Clone, Serialize)]
pub struct PrincipalInfo {
    pub principal_id: String,
    pub publish_scope: Vec<String>,
    pub subscribe_scope: Vec<String>,
    pub revoked: bool,
    pub registrations: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub at: i64,
    pub principal: String,
    pub op: String,
    /// "ok" or the error name.
    pub outcome: String,
    pub detail: String,
}

struct Principal {
    config: PrincipalConfig,
    publish_scope: Vec<TopicPattern>,
    subscribe_scope: Vec<TopicPattern>,
    revoked: bool,
}

struct Registration {
    principal_id: String,
    manifest: ServiceManifest,
    installed: crate::node::InstalledItems,
}

struct Handle {
    principal_id: String,
    sub: SubId,
}

pub struct Nbi {
    node: Arc<Mutex<CghfNode>>,
    bus: Arc<Bus>,
    principals: Vec<Principal>,
    admin_token: Option<String>,
    registrations: BTreeMap<String, Registration>,
    handles: BTreeMap<String, Handle>,
    push_seq: BTreeMap<(String, String), u64>,
    next_registration: u64,
    next_handle: u64,
    audit: Vec<AuditRecord>,
}

impl Nbi {
    /// Build from configuration. Fails when two principals share a token
    /// or id, or a publish scope could reach the reserved `facts` or
    /// `context` roots (those are the node's own output namespaces).
    pub fn new(node: Arc<Mutex<CghfNode>>, config: NbiConfig) -> Result<Nbi, String> {
        let bus = node.lock().expect("node lock").bus().clone();
        let mut principals = Vec::new();
        let mut seen_tokens = BTreeMap::new();
        let mut seen_ids = BTreeMap::new();
        for p in config.principals {
            if seen_ids.insert(p.principal_id.clone(), ()).is_some() {
                return Err(format!("duplicate principal id `{}`", p.principal_id));
            }
            if seen_tokens.insert(p.token.clone(), ()).is_some() {
                return Err(format!("principals share a token (id `{}`)", p.principal_id));
            }
            let publish_scope = parse_scope(&p.principal_id, "publish", &p.publish_scope)?;
            for pattern in &publish_scope {
                let prefix = pattern.fixed_prefix();
                let root = prefix.first().copied();
                if root.is_none() || root == Some("facts") || root == Some("context") {
                    return Err(format!(
                        "principal `{}`: publish scope `{pattern}` reaches a reserved root",
                        p.principal_id
                    ));
                }
            }
            let subscribe_scope = parse_scope(&p.principal_id, "subscribe", &p.subscribe_scope)?;
            principals.push(Principal {
                config: p,
                publish_scope,
                subscribe_scope,
                revoked: false,
            });
        }
        Ok(Nbi {
            node,
            bus,
            principals,
            admin_token: config.admin_token,
            registrations: BTreeMap::new(),
            handles: BTreeMap::new(),
            push_seq: BTreeMap::new(),
            next_registration: 0,
            next_handle: 0,
            audit: Vec::new(),
        })
    }

    /// Valid token for an unrevoked principal, or its id for auditing.
    pub fn authenticate(&self, token: &str) -> Result<String, NbiError> {
        match self.principals.iter().find(|p| p.config.token == token) {
            Some(p) if !p.revoked => Ok(p.config.principal_id.clone()),
            Some(p) => Err(NbiError::Unauthorized(format!(
                "principal `{}` is revoked",
                p.config.principal_id
            ))),
            None => Err(NbiError::Unauthorized("unknown token".to_string())),
        }
    }

    /// Register a service: declare its streams and install its rules.
    pub fn register(
        &mut self,
        token: &str,
        manifest: ServiceManifest,
        now: i64,
    ) -> Result<RegistrationReceipt, NbiError> {
        let result = self.do_register(token, manifest, now);
        self.record(token, "register", now, &result);
        result
    }

    fn do_register(
        &mut self,
        token: &str,
        manifest: ServiceManifest,
        now: i64,
    ) -> Result<RegistrationReceipt, NbiError> {
        let principal_id = self.authenticate(token)?;
        let mut problems = Vec::new();
        for s in &manifest.streams {
            if let Err(e) = Topic::parse(&s.topic) {
                problems.push(format!("stream `{}`: {e}", s.topic));
            }
        }
        if !problems.is_empty() {
            return Err(NbiError::ValidationFailed(problems));
        }
        let installed = match &manifest.rules {
            Some(text) => {
                let mut node = self.node.lock().expect("node lock");
                node.install_rules(text).map_err(|e| NbiError::ValidationFailed(e.details()))?
            }
            None => Default::default(),
        };
        self.next_registration += 1;
        let registration_id = format!("reg-{}", self.next_registration);
        let receipt = RegistrationReceipt {
            registration_id: registration_id.clone(),
            installed_rules: installed.rules.clone(),
            installed_factdefs: installed.factdefs.clone(),
        };
        self.registrations.insert(
            registration_id,
            Registration { principal_id, manifest, installed },
        );
        let _ = now;
        Ok(receipt)
    }

    /// Publish one raw sample. Checked in order: token, topic shape,
    /// scope (the `facts` and `context` roots are never pushable), then
    /// that some active registration of this principal declared the stream.
    pub fn push(
        &mut self,
        token: &str,
        topic: &str,
        value: f64,
        unit: &str,
        ts: i64,
        now: i64,
    ) -> Result<Receipt, NbiError> {
        let result = self.do_push(token, topic, value, unit, ts);
        self.record(token, "push", now, &result);
        result
    }

    fn do_push(
        &mut self,
        token: &str,
        topic: &str,
        value: f64,
        unit: &str,
        ts: i64,
    ) -> Result<Receipt, NbiError> {
        let principal_id = self.authenticate(token)?;
        let parsed = Topic::parse(topic)?;
        if parsed.root() == "facts" || parsed.root() == "context" {
            return Err(NbiError::ScopeViolation(format!(
                "`{topic}` is under the reserved `{}` root",
                parsed.root()
            )));
        }
        let principal = self.principal(&principal_id);
        if !principal.publish_scope.iter().any(|p| p.matches(&parsed)) {
            return Err(NbiError::ScopeViolation(format!(
                "`{topic}` is outside the publish scope of `{principal_id}`"
            )));
        }
        let declared = self.registrations.values().any(|r| {
            r.principal_id == principal_id && r.manifest.streams.iter().any(|s| s.topic == topic)
        });
        if !declared {
            return Err(NbiError::UndeclaredStream(format!(
                "`{topic}` is not declared by any registration of `{principal_id}`"
            )));
        }
        let seq = {
            let counter = self
                .push_seq
                .entry((principal_id.clone(), topic.to_string()))
                .or_insert(0);
            *counter += 1;
            *counter
        };
        let draft = EnvelopeDraft::new(topic, &principal_id, ts, seq)
            .field("value", Value::Number(value))
            .field("unit", Value::Str(unit.to_string()));
        Ok(self.bus.publish(draft)?)
    }

    /// Open a context subscription. The pattern must sit under the
    /// `context` root and inside the principal's subscribe scope.
    pub fn subscribe(&mut self, token: &str, pattern: &str, now: i64) -> Result<String, NbiError> {
        let result = self.do_subscribe(token, pattern);
        self.record(token, "subscribe", now, &result);
        result
    }

    fn do_subscribe(&mut self, token: &str, pattern: &str) -> Result<String, NbiError> {
        let principal_id = self.authenticate(token)?;
        let parsed = TopicPattern::parse(pattern)?;
        if parsed.fixed_prefix().first().copied() != Some("context") {
            return Err(NbiError::ScopeViolation(format!(
                "`{pattern}` must start with the literal `context` segment"
            )));
        }
        let principal = self.principal(&principal_id);
        if !principal.subscribe_scope.iter().any(|scope| scope.contains(&parsed)) {
            return Err(NbiError::ScopeViolation(format!(
                "`{pattern}` is outside the subscribe scope of `{principal_id}`"
            )));
        }
        let sub = self.bus.subscribe(pattern, &principal_id)?;
        self.next_handle += 1;
        let handle = format!("h-{}", self.next_handle);
        self.handles.insert(handle.clone(), Handle { principal_id, sub });
        Ok(handle)
    }

    /// Drain up to `max_n` pending contexts from a subscription.
    pub fn fetch(
        &mut self,
        token: &str,
        handle: &str,
        max_n: usize,
        now: i64,
    ) -> Result<Vec<Envelope>, NbiError> {
        let result = self.do_fetch(token, handle, max_n, now);
        let outcome = result.as_ref().map(|_| ()).map_err(clone_name);
        self.record_outcome(token, "fetch", now, outcome);
        result
    }

    fn do_fetch(
        &mut self,
        token: &str,
        handle: &str,
        max_n: usize,
        now: i64,
    ) -> Result<Vec<Envelope>, NbiError> {
        let principal_id = self.authenticate(token)?;
        let entry = self
            .handles
            .get(handle)
            .filter(|h| h.principal_id == principal_id)
            .ok_or_else(|| NbiError::UnknownHandle(handle.to_string()))?;
        Ok(self.bus.poll(entry.sub, max_n, now)?)
    }

    /// Tear down one registration: uninstall its rules and close every
    /// subscription the principal holds.
    pub fn revoke(&mut self, token: &str, registration_id: &str, now: i64) -> Result<(), NbiError> {
        let result = self.do_revoke(token, registration_id);
        self.record(token, "revoke", now, &result);
        result
    }

    fn do_revoke(&mut self, token: &str, registration_id: &str) -> Result<(), NbiError> {
        let principal_id = self.authenticate(token)?;
        let owned = self
            .registrations
            .get(registration_id)
            .map(|r| r.principal_id == principal_id)
            .unwrap_or(false);
        if !owned {
            return Err(NbiError::UnknownRegistration(registration_id.to_string()));
        }
        let registration = self.registrations.remove(registration_id).expect("checked");
        self.node.lock().expect("node lock").remove_items(&registration.installed);
        self.close_handles_of(&principal_id);
        Ok(())
    }

    /// Administrative kill switch: revoke the principal's token, all its
    /// registrations, and all its subscriptions.
    pub fn revoke_principal(
        &mut self,
        admin_token: &str,
        principal_id: &str,
        now: i64,
    ) -> Result<(), NbiError> {
        let result = self.do_revoke_principal(admin_token, principal_id);
        self.audit.push(AuditRecord {
            at: now,
            principal: principal_id.to_string(),
            op: "revoke_principal".to_string(),
            outcome: result.as_ref().map(|_| "ok".to_string()).unwrap_or_else(|e| e.name().to_string()),
            detail: result.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
        });
        result
    }

    fn do_revoke_principal(&mut self, admin_token: &str, principal_id: &str) -> Result<(), NbiError> {
        if self.admin_token.as_deref() != Some(admin_token) {
            return Err(NbiError::Unauthorized("admin token required".to_string()));
        }
        let Some(principal) = self
            .principals
            .iter_mut()
            .find(|p| p.config.principal_id == principal_id)
        else {
            return Err(NbiError::Unauthorized(format!("no principal `{principal_id}`")));
        };
        principal.revoked = true;
        let regs: Vec<String> = self
            .registrations
            .iter()
            .filter(|(_, r)| r.principal_id == principal_id)
            .map(|(id, _)| id.clone())
            .collect();
        for id in regs {
            let registration = self.registrations.remove(&id).expect("listed");
            self.node.lock().expect("node lock").remove_items(&registration.installed);
        }
        self.close_handles_of(principal_id);
        Ok(())
    }

    pub fn principal_info(&self) -> Vec<PrincipalInfo> {
        self.principals
            .iter()
            .map(|p| PrincipalInfo {
                principal_id: p.config.principal_id.clone(),
                publish_scope: p.config.publish_scope.clone(),
                subscribe_scope: p.config.subscribe_scope.clone(),
                revoked: p.revoked,
                registrations: self
                    .registrations
                    .iter()
                    .filter(|(_, r)| r.principal_id == p.config.principal_id)
                    .map(|(id, _)| id.clone())
                    .collect(),
            })
            .collect()
    }

    pub fn audit_log(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn node(&self) -> &Arc<Mutex<CghfNode>> {
        &self.node
    }

    fn principal(&self, id: &str) -> &Principal {
        self.principals
            .iter()
            .find(|p| p.config.principal_id == id)
            .expect("authenticated principal exists")
    }

    fn close_handles_of(&mut self, principal_id: &str) {
        let owned: Vec<String> = self
            .handles
            .iter()
            .filter(|(_, h)| h.principal_id == principal_id)
            .map(|(k, _)| k.clone())
            .collect();
        for handle in owned {
            if let Some(h) = self.handles.remove(&handle) {
                let _ = self.bus.unsubscribe(h.sub);
            }
        }
    }

    fn record<T>(&mut self, token: &str, op: &str, now: i64, result: &Result<T, NbiError>) {
        let outcome = result.as_ref().map(|_| ()).map_err(clone_name);
        self.record_outcome(token, op, now, outcome);
    }

    fn record_outcome(
        &mut self,
        token: &str,
        op: &str,
        now: i64,
        outcome: Result<(), (String, String)>,
    ) {
        let principal = self
            .principals
            .iter()
            .find(|p| p.config.token == token)
            .map(|p| p.config.principal_id.clone())
            .unwrap_or_else(|| "<unknown>".to_string());
        let (outcome, detail) = match outcome {
            Ok(()) => ("ok".to_string(), String::new()),
            Err((name, detail)) => (name, detail),
        };
        self.audit.push(AuditRecord { at: now, principal, op: op.to_string(), outcome, detail });
    }
}

fn clone_name(e: &NbiError) -> (String, String) {
    (e.name().to_string(), e.to_string())
}

fn parse_scope(
    principal: &str,
    kind: &str,
    raw: &[String],
) -> Result<Vec<TopicPattern>, String> {
    raw.iter()
        .map(|s| {
            TopicPattern::parse(s).map_err(|e| {
                format!("principal `{principal}`: bad {kind} scope pattern `{s}`: {e}")
            })
        })
        .collect()
}
