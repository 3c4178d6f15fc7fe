//! Topic-based publish/subscribe bus with peer federation.
//!
//! Delivery is pull-based: subscribers poll their queue. Each published
//! envelope is enqueued exactly once per matching subscription, in FIFO
//! order per (source, topic). There are no retained messages: a
//! subscription only sees envelopes published after it was created.
//! Envelope TTLs are enforced at poll time.
//!
//! Federated peers exchange matching publishes through per-peer import
//! inboxes: `publish` pushes matching envelopes into each linked peer's
//! inbox synchronously, and a bus integrates its inbox at the start of its
//! next operation. Per-bus and per-link seen sets keep delivery exactly-once
//! per remote subscription across acyclic and cyclic link topologies.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, Weak};

use thiserror::Error;

use crate::envelope::{Envelope, EnvelopeDraft};
use crate::topic::{Topic, TopicPattern};

/// Queue capacity per subscription; on overflow the oldest envelope is
/// dropped and counted.
pub const DEFAULT_QUEUE_CAPACITY: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("malformed topic: {0}")]
    MalformedTopic(String),
    #[error("malformed pattern: {0}")]
    MalformedPattern(String),
    #[error("seq {seq} does not advance past {last} for ({publisher}, {topic})")]
    SeqRegression { publisher: String, topic: String, seq: u64, last: u64 },
    #[error("unknown subscription handle {0}")]
    UnknownHandle(String),
    #[error("cannot federate a bus with itself: {0}")]
    SelfFederation(String),
}

impl BusError {
    /// Stable error name used verbatim on the northbound wire.
    pub fn name(&self) -> &'static str {
        match self {
            BusError::MalformedTopic(_) => "MalformedTopic",
            BusError::MalformedPattern(_) => "MalformedPattern",
            BusError::SeqRegression { .. } => "SeqRegression",
            BusError::UnknownHandle(_) => "UnknownHandle",
            BusError::SelfFederation(_) => "SelfFederation",
        }
    }
}

/// Subscription handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubId(pub u64);

impl std::fmt::Display for SubId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sub-{}", self.0)
    }
}

/// Outcome of a publish. `matched` counts local subscriptions whose pattern
/// matched; it is observability only and no subscriber affects acceptance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub msg_id: String,
    pub matched: usize,
}

/// One federation link as seen from the bus `federate` was called on.
#[derive(Debug, Clone)]
pub struct PeerLink {
    pub local: String,
    pub peer: String,
    pub export_scope: TopicPattern,
    pub import_scope: TopicPattern,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropStats {
    pub total: u64,
    pub per_subscription: BTreeMap<u64, u64>,
}

struct SubState {
    pattern: TopicPattern,
    subscriber: String,
    queue: VecDeque<Envelope>,
    dropped: u64,
}

struct Link {
    peer_id: String,
    peer: Weak<Bus>,
    scope: TopicPattern,
    /// msg_ids already sent over (or received over) this link.
    seen: HashSet<String>,
}

struct Import {
    env: Envelope,
    via: String,
}

struct Inner {
    next_msg: u64,
    next_sub: u64,
    last_seq: BTreeMap<(String, String), u64>,
    subs: BTreeMap<u64, SubState>,
    links: Vec<Link>,
    /// Every msg_id this bus has accepted (local or imported).
    seen: HashSet<String>,
    capacity: usize,
}

pub struct Bus {
    id: String,
    inner: Mutex<Inner>,
    /// Envelopes pushed by peers, integrated on the next operation. Kept
    /// outside `inner` so cross-bus pushes never nest bus locks.
    inbox: Mutex<VecDeque<Import>>,
}

impl Bus {
    pub fn new(id: &str) -> Arc<Bus> {
        Bus::with_capacity(id, DEFAULT_QUEUE_CAPACITY)
    }

    pub fn with_capacity(id: &str, capacity: usize) -> Arc<Bus> {
        Arc::new(Bus {
            id: id.to_string(),
            inner: Mutex::new(Inner {
                next_msg: 0,
                next_sub: 0,
                last_seq: BTreeMap::new(),
                subs: BTreeMap::new(),
                links: Vec::new(),
                seen: HashSet::new(),
                capacity,
            }),
            inbox: Mutex::new(VecDeque::new()),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Publish an envelope. The bus validates the topic, enforces that `seq`
    /// strictly increases per (source, topic), assigns the `msg_id`, and
    /// enqueues the envelope on every matching local subscription and into
    /// every matching federation link. Acceptance and msg_id assignment do
    /// not depend on the current subscriber set.
    pub fn publish(self: &Arc<Self>, draft: EnvelopeDraft) -> Result<Receipt, BusError> {
        let topic = Topic::parse(&draft.topic)?;
        let mut inner = self.inner.lock().unwrap();
        self.integrate_inbox(&mut inner);
        let key = (draft.source.clone(), draft.topic.clone());
        if let Some(&last) = inner.last_seq.get(&key) {
            if draft.seq <= last {
                return Err(BusError::SeqRegression {
                    publisher: draft.source,
                    topic: draft.topic,
                    seq: draft.seq,
                    last,
                });
            }
        }
        inner.last_seq.insert(key, draft.seq);
        inner.next_msg += 1;
        let env = Envelope {
            topic,
            source: draft.source,
            timestamp: draft.timestamp,
            seq: draft.seq,
            payload: draft.payload,
            ttl_ms: draft.ttl_ms,
            msg_id: format!("{}-{}", self.id, inner.next_msg),
        };
        let msg_id = env.msg_id.clone();
        let matched = self.process(&mut inner, env, None);
        Ok(Receipt { msg_id, matched })
    }

    /// Create a subscription. Pending imports are integrated first, so a new
    /// subscription never receives envelopes published before it existed.
    pub fn subscribe(self: &Arc<Self>, pattern: &str, subscriber: &str) -> Result<SubId, BusError> {
        let pattern = TopicPattern::parse(pattern)?;
        let mut inner = self.inner.lock().unwrap();
        self.integrate_inbox(&mut inner);
        inner.next_sub += 1;
        let id = inner.next_sub;
        inner.subs.insert(
            id,
            SubState { pattern, subscriber: subscriber.to_string(), queue: VecDeque::new(), dropped: 0 },
        );
        Ok(SubId(id))
    }

    pub fn unsubscribe(self: &Arc<Self>, handle: SubId) -> Result<(), BusError> {
        let mut inner = self.inner.lock().unwrap();
        inner
            .subs
            .remove(&handle.0)
            .map(|_| ())
            .ok_or_else(|| BusError::UnknownHandle(handle.to_string()))
    }

    /// Take up to `max_n` envelopes in delivery order. Envelopes whose TTL
    /// lapsed before `now` are discarded, not returned.
    pub fn poll(self: &Arc<Self>, handle: SubId, max_n: usize, now: i64) -> Result<Vec<Envelope>, BusError> {
        let mut inner = self.inner.lock().unwrap();
        self.integrate_inbox(&mut inner);
        let sub = inner
            .subs
            .get_mut(&handle.0)
            .ok_or_else(|| BusError::UnknownHandle(handle.to_string()))?;
        let mut out = Vec::new();
        while out.len() < max_n {
            match sub.queue.pop_front() {
                Some(env) if env.expired_at(now) => continue,
                Some(env) => out.push(env),
                None => break,
            }
        }
        Ok(out)
    }

    /// Link two buses. Publishes on `self` matching `export_scope` replay
    /// into `peer`, and publishes on `peer` matching `import_scope` replay
    /// into `self`, preserving msg_id and per-(source, topic) order. A
    /// msg_id crosses a given link at most once and is never re-exported to
    /// the peer it arrived from, so cyclic topologies stay loop-free.
    pub fn federate(
        self: &Arc<Self>,
        peer: &Arc<Bus>,
        export_scope: &str,
        import_scope: &str,
    ) -> Result<PeerLink, BusError> {
        if Arc::ptr_eq(self, peer) || self.id == peer.id {
            return Err(BusError::SelfFederation(self.id.clone()));
        }
        let export = TopicPattern::parse(export_scope)?;
        let import = TopicPattern::parse(import_scope)?;
        {
            let mut inner = self.inner.lock().unwrap();
            inner.links.push(Link {
                peer_id: peer.id.clone(),
                peer: Arc::downgrade(peer),
                scope: export.clone(),
                seen: HashSet::new(),
            });
        }
        {
            let mut inner = peer.inner.lock().unwrap();
            inner.links.push(Link {
                peer_id: self.id.clone(),
                peer: Arc::downgrade(self),
                scope: import.clone(),
                seen: HashSet::new(),
            });
        }
        Ok(PeerLink {
            local: self.id.clone(),
            peer: peer.id.clone(),
            export_scope: export,
            import_scope: import,
        })
    }

    /// Integrate any pending peer imports without publishing or polling.
    pub fn pump(self: &Arc<Self>) {
        let mut inner = self.inner.lock().unwrap();
        self.integrate_inbox(&mut inner);
    }

    pub fn drop_stats(&self) -> DropStats {
        let inner = self.inner.lock().unwrap();
        let per_subscription: BTreeMap<u64, u64> = inner
            .subs
            .iter()
            .filter(|(_, s)| s.dropped > 0)
            .map(|(id, s)| (*id, s.dropped))
            .collect();
        DropStats { total: per_subscription.values().sum(), per_subscription }
    }

    pub fn subscription_pattern(&self, handle: SubId) -> Option<TopicPattern> {
        let inner = self.inner.lock().unwrap();
        inner.subs.get(&handle.0).map(|s| s.pattern.clone())
    }

    pub fn subscriber_of(&self, handle: SubId) -> Option<String> {
        let inner = self.inner.lock().unwrap();
        inner.subs.get(&handle.0).map(|s| s.subscriber.clone())
    }

    fn integrate_inbox(self: &Arc<Self>, inner: &mut Inner) {
        loop {
            let batch: Vec<Import> = {
                let mut inbox = self.inbox.lock().unwrap();
                inbox.drain(..).collect()
            };
            if batch.is_empty() {
                return;
            }
            for import in batch {
                self.process(inner, import.env, Some(&import.via));
            }
        }
    }

    /// Deliver one envelope locally and forward it over links. Returns the
    /// number of matching local subscriptions.
    fn process(self: &Arc<Self>, inner: &mut Inner, env: Envelope, via: Option<&str>) -> usize {
        if !inner.seen.insert(env.msg_id.clone()) {
            // Duplicate arrival over another path; remember not to send it
            // back where it just came from, then drop it.
            if let Some(via) = via {
                for link in inner.links.iter_mut().filter(|l| l.peer_id == via) {
                    link.seen.insert(env.msg_id.clone());
                }
            }
            return 0;
        }

        let mut matched = 0;
        let capacity = inner.capacity;
        for sub in inner.subs.values_mut() {
            if sub.pattern.matches(&env.topic) {
                matched += 1;
                if sub.queue.len() >= capacity {
                    sub.queue.pop_front();
                    sub.dropped += 1;
                }
                sub.queue.push_back(env.clone());
            }
        }

        // Forward: pushes go into peer inboxes (leaf locks only), so holding
        // our own state lock here cannot deadlock, and inbox order follows
        // our publish order.
        for link in inner.links.iter_mut() {
            if via == Some(link.peer_id.as_str()) {
                link.seen.insert(env.msg_id.clone());
                continue;
            }
            if !link.scope.matches(&env.topic) {
                continue;
            }
            if !link.seen.insert(env.msg_id.clone()) {
                continue;
            }
            if let Some(peer) = link.peer.upgrade() {
                let mut inbox = peer.inbox.lock().unwrap();
                inbox.push_back(Import { env: env.clone(), via: self.id.clone() });
            }
        }
        matched
    }
}
