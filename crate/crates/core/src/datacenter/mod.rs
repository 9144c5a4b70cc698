//! Simulated physical storage: nodes, replicated objects, failure and
//! recovery, autoscaling, and metering on a logical clock.
//!
//! Every mutation records [`StorageEffect`]s describing exactly which
//! replicas were written or removed. Callers drain them with
//! [`DataCenter::take_effects`] and persist them next to the command that
//! caused them, which lets an independent reader rebuild per-node usage.

mod metering;
mod mirror;
mod placement;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use bytes::Bytes;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::{base64_bytes, sha256_hex};
use crate::domain::{Error, ErrorCode, Result};

pub use metering::{UsageEntry, UsageLedger, UsageReport, MIB};
pub use mirror::sync_node_dirs;
pub use placement::{fnv1a64, rendezvous_score, Candidate, PlacementPlan, PlacementPolicy, Rendezvous};

pub const GIB: u64 = 1 << 30;

/// Largest clock advance accepted in one call; bounds ledger growth.
pub const MAX_TICKS_PER_ADVANCE: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('n')
            .and_then(|n| n.parse::<u64>().ok())
            .filter(|n| *n > 0 && !s[1..].starts_with('0'))
            .map(NodeId)
            .ok_or_else(|| Error::validation(format!("invalid node id {s:?}")))
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn from_seq(seq: u64) -> Self {
        ObjectId(format!("obj-{seq}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ObjectId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("obj-").map(str::parse::<u64>) {
            Some(Ok(_)) => Ok(ObjectId(s.to_owned())),
            _ => Err(Error::validation(format!("invalid object id {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeStatus {
    Up,
    Down,
}

impl FromStr for NodeStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Up" | "up" => Ok(NodeStatus::Up),
            "Down" | "down" => Ok(NodeStatus::Down),
            _ => Err(Error::validation(format!("invalid node status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StorageNode {
    pub id: NodeId,
    pub capacity_bytes: u64,
    pub used_bytes: u64,
    pub status: NodeStatus,
    replicas: BTreeMap<ObjectId, Bytes>,
}

impl StorageNode {
    pub fn is_up(&self) -> bool {
        self.status == NodeStatus::Up
    }

    pub fn free_bytes(&self) -> u64 {
        self.capacity_bytes - self.used_bytes
    }

    pub fn replica_ids(&self) -> impl Iterator<Item = &ObjectId> {
        self.replicas.keys()
    }

    pub fn replica(&self, object: &ObjectId) -> Option<&Bytes> {
        self.replicas.get(object)
    }

    fn candidate(&self) -> Candidate {
        Candidate {
            id: self.id,
            up: self.is_up(),
            free_bytes: self.free_bytes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredObject {
    pub id: ObjectId,
    pub size_bytes: u64,
    pub checksum: String,
    pub replication: u8,
    pub replicas: BTreeSet<NodeId>,
    pub created_at_tick: u64,
}

/// A single observable change to storage, in the order it happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StorageEffect {
    NodeAdded {
        node: NodeId,
        capacity_bytes: u64,
    },
    NodeStatus {
        node: NodeId,
        status: NodeStatus,
    },
    ObjectStored {
        object: ObjectId,
        size_bytes: u64,
        checksum: String,
    },
    ObjectDeleted {
        object: ObjectId,
    },
    ReplicaWritten {
        node: NodeId,
        object: ObjectId,
        size_bytes: u64,
    },
    ReplicaRemoved {
        node: NodeId,
        object: ObjectId,
        size_bytes: u64,
    },
    ClockAdvanced {
        ticks: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCenterConfig {
    /// Replication factor used by higher layers, 1 through 5.
    pub replication: u8,
    pub autoscale: bool,
    pub autoscale_node_capacity: u64,
    pub max_nodes: usize,
    pub rate_micro_per_mib_tick: u64,
}

impl Default for DataCenterConfig {
    fn default() -> Self {
        DataCenterConfig {
            replication: 2,
            autoscale: false,
            autoscale_node_capacity: GIB,
            max_nodes: 64,
            rate_micro_per_mib_tick: 1,
        }
    }
}

impl DataCenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.replication) {
            return Err(Error::validation("replication must be between 1 and 5"));
        }
        if self.autoscale_node_capacity == 0 {
            return Err(Error::validation("autoscale node capacity must be positive"));
        }
        if self.max_nodes == 0 {
            return Err(Error::validation("max_nodes must be positive"));
        }
        Ok(())
    }
}

/// Result detail of [`DataCenter::rereplicate`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Replicas copied onto new nodes.
    pub repaired: u64,
    /// Surplus or corrupt replicas dropped.
    pub trimmed: u64,
    /// Objects left with fewer than R Up replicas.
    pub degraded: Vec<ObjectId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub ok: bool,
    pub degraded_objects: u64,
    pub up_nodes: u64,
}

#[derive(Clone)]
pub struct DataCenter {
    config: DataCenterConfig,
    policy: Arc<dyn PlacementPolicy>,
    tick: u64,
    next_node: u64,
    next_object: u64,
    nodes: BTreeMap<NodeId, StorageNode>,
    objects: BTreeMap<ObjectId, StoredObject>,
    ledger: UsageLedger,
    effects: Vec<StorageEffect>,
}

impl fmt::Debug for DataCenter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DataCenter")
            .field("tick", &self.tick)
            .field("nodes", &self.nodes.len())
            .field("objects", &self.objects.len())
            .finish_non_exhaustive()
    }
}

impl DataCenter {
    pub fn new(config: DataCenterConfig) -> Self {
        Self::with_policy(config, Arc::new(Rendezvous))
    }

    pub fn with_policy(config: DataCenterConfig, policy: Arc<dyn PlacementPolicy>) -> Self {
        DataCenter {
            config,
            policy,
            tick: 0,
            next_node: 1,
            next_object: 1,
            nodes: BTreeMap::new(),
            objects: BTreeMap::new(),
            ledger: UsageLedger::default(),
            effects: Vec::new(),
        }
    }

    pub fn config(&self) -> &DataCenterConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn nodes(&self) -> impl Iterator<Item = &StorageNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: NodeId) -> Option<&StorageNode> {
        self.nodes.get(&id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &StoredObject> {
        self.objects.values()
    }

    pub fn object(&self, id: &ObjectId) -> Option<&StoredObject> {
        self.objects.get(id)
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn up_node_count(&self) -> usize {
        self.nodes.values().filter(|n| n.is_up()).count()
    }

    /// Drains the effects recorded since the previous call.
    pub fn take_effects(&mut self) -> Vec<StorageEffect> {
        std::mem::take(&mut self.effects)
    }

    pub fn add_node(&mut self, capacity_bytes: i64) -> Result<NodeId> {
        if capacity_bytes <= 0 {
            return Err(Error::validation("node capacity must be positive"));
        }
        Ok(self.register_node(capacity_bytes as u64))
    }

    fn register_node(&mut self, capacity_bytes: u64) -> NodeId {
        let id = NodeId(self.next_node);
        self.next_node += 1;
        self.nodes.insert(
            id,
            StorageNode {
                id,
                capacity_bytes,
                used_bytes: 0,
                status: NodeStatus::Up,
                replicas: BTreeMap::new(),
            },
        );
        self.effects.push(StorageEffect::NodeAdded {
            node: id,
            capacity_bytes,
        });
        id
    }

    pub fn set_node_status(&mut self, id: NodeId, status: NodeStatus) -> Result<()> {
        let node = self
            .nodes
            .get_mut(&id)
            .ok_or_else(|| Error::not_found(format!("unknown node {id}")))?;
        if node.status == status {
            return Ok(());
        }
        node.status = status;
        self.effects.push(StorageEffect::NodeStatus { node: id, status });
        if status == NodeStatus::Up {
            // Deletions that happened while the node was down reconcile now.
            let orphans: Vec<ObjectId> = node
                .replicas
                .keys()
                .filter(|o| {
                    self.objects
                        .get(*o)
                        .is_none_or(|obj| !obj.replicas.contains(&id))
                })
                .cloned()
                .collect();
            for object in orphans {
                self.remove_replica(id, &object);
            }
        }
        Ok(())
    }

    /// Plans placement for `object_id` against the current nodes.
    pub fn place(&self, object_id: &ObjectId, size_bytes: u64, r: usize) -> Result<PlacementPlan> {
        let candidates: Vec<Candidate> = self.nodes.values().map(StorageNode::candidate).collect();
        self.policy.place(object_id, size_bytes, r, &candidates)
    }

    pub fn put_object(&mut self, payload: Bytes, r: u8) -> Result<ObjectId> {
        if payload.is_empty() {
            return Err(Error::validation("payload must not be empty"));
        }
        if r == 0 {
            return Err(Error::validation("replication factor must be at least 1"));
        }
        let size = payload.len() as u64;
        let object_id = ObjectId::from_seq(self.next_object);

        // Plan first, including any autoscaled nodes, so a failed put leaves
        // the cluster untouched.
        let mut candidates: Vec<Candidate> =
            self.nodes.values().map(StorageNode::candidate).collect();
        let mut added = 0u64;
        let plan = loop {
            match self.policy.place(&object_id, size, r.into(), &candidates) {
                Ok(plan) => break plan,
                Err(_) if self.can_autoscale(size, candidates.len()) => {
                    candidates.push(Candidate {
                        id: NodeId(self.next_node + added),
                        up: true,
                        free_bytes: self.config.autoscale_node_capacity,
                    });
                    added += 1;
                }
                Err(_) => {
                    let up = candidates.iter().filter(|c| c.up).count();
                    return Err(if up < usize::from(r) {
                        Error::new(
                            ErrorCode::InsufficientNodes,
                            format!("{up} Up node(s), replication {r} required"),
                        )
                    } else {
                        Error::new(
                            ErrorCode::CapacityExceeded,
                            format!("no room for {size} bytes on {r} node(s)"),
                        )
                    });
                }
            }
        };

        for _ in 0..added {
            self.register_node(self.config.autoscale_node_capacity);
        }
        let checksum = sha256_hex(&payload);
        self.next_object += 1;
        self.effects.push(StorageEffect::ObjectStored {
            object: object_id.clone(),
            size_bytes: size,
            checksum: checksum.clone(),
        });
        for node in &plan.replicas {
            self.write_replica(*node, &object_id, payload.clone());
        }
        self.objects.insert(
            object_id.clone(),
            StoredObject {
                id: object_id.clone(),
                size_bytes: size,
                checksum,
                replication: r,
                replicas: plan.replicas.into_iter().collect(),
                created_at_tick: self.tick,
            },
        );
        Ok(object_id)
    }

    fn can_autoscale(&self, size: u64, node_count: usize) -> bool {
        self.config.autoscale
            && node_count < self.config.max_nodes
            && size <= self.config.autoscale_node_capacity
    }

    /// Reads from the lowest-numbered Up replica whose bytes verify.
    pub fn get_object(&self, id: &ObjectId) -> Result<Bytes> {
        self.read_verified(id).map(|(_, bytes)| bytes)
    }

    /// Like [`get_object`](Self::get_object), also reporting the serving node.
    pub fn read_verified(&self, id: &ObjectId) -> Result<(NodeId, Bytes)> {
        let object = self
            .objects
            .get(id)
            .ok_or_else(|| Error::not_found(format!("unknown object {id}")))?;
        object
            .replicas
            .iter()
            .filter_map(|n| self.nodes.get(n))
            .filter(|n| n.is_up())
            .find_map(|n| {
                n.replicas
                    .get(id)
                    .filter(|b| sha256_hex(b) == object.checksum)
                    .map(|b| (n.id, b.clone()))
            })
            .ok_or_else(|| {
                Error::new(
                    ErrorCode::Degraded,
                    format!("no readable replica of {id} is available"),
                )
            })
    }

    pub fn delete_object(&mut self, id: &ObjectId) -> Result<()> {
        let object = self
            .objects
            .remove(id)
            .ok_or_else(|| Error::not_found(format!("unknown object {id}")))?;
        self.effects.push(StorageEffect::ObjectDeleted { object: id.clone() });
        for node in &object.replicas {
            if self.nodes.get(node).is_some_and(StorageNode::is_up) {
                self.remove_replica(*node, id);
            }
        }
        Ok(())
    }

    /// Restores every object to exactly its replication factor of Up,
    /// checksum-valid replicas where capacity allows, autoscaling if enabled.
    pub fn rereplicate(&mut self) -> RepairReport {
        let mut report = RepairReport::default();
        let ids: Vec<ObjectId> = self.objects.keys().cloned().collect();
        for id in ids {
            let object = &self.objects[&id];
            let target = usize::from(object.replication);
            let checksum = object.checksum.clone();
            let size = object.size_bytes;

            let mut healthy = Vec::new();
            let mut corrupt = Vec::new();
            for node_id in &object.replicas {
                let node = &self.nodes[node_id];
                if !node.is_up() {
                    continue;
                }
                match node.replicas.get(&id) {
                    Some(bytes) if sha256_hex(bytes) == checksum => healthy.push(*node_id),
                    _ => corrupt.push(*node_id),
                }
            }
            for node_id in corrupt {
                self.drop_holder(node_id, &id);
                report.trimmed += 1;
            }

            if healthy.is_empty() {
                report.degraded.push(id);
                continue;
            }

            if healthy.len() > target {
                let ranked = self.policy.rank(&id, &healthy);
                for node_id in &ranked[target..] {
                    self.drop_holder(*node_id, &id);
                    report.trimmed += 1;
                }
                continue;
            }

            if healthy.len() < target {
                let (candidates, eligible) = loop {
                    let holders = &self.objects[&id].replicas;
                    let candidates: Vec<Candidate> = self
                        .nodes
                        .values()
                        .filter(|n| !holders.contains(&n.id))
                        .map(StorageNode::candidate)
                        .collect();
                    let eligible = candidates
                        .iter()
                        .filter(|c| c.up && c.free_bytes >= size)
                        .count();
                    if healthy.len() + eligible >= target || !self.can_autoscale(size, self.nodes.len()) {
                        break (candidates, eligible);
                    }
                    self.register_node(self.config.autoscale_node_capacity);
                };
                let wanted = (target - healthy.len()).min(eligible);
                if wanted > 0 {
                    let plan = self
                        .policy
                        .place(&id, size, wanted, &candidates)
                        .expect("wanted never exceeds eligible candidates");
                    let source = self.nodes[&healthy[0]].replicas[&id].clone();
                    for node_id in plan.replicas {
                        self.write_replica(node_id, &id, source.clone());
                        self.objects
                            .get_mut(&id)
                            .expect("object exists")
                            .replicas
                            .insert(node_id);
                        report.repaired += 1;
                    }
                }
                if healthy.len() + wanted < target {
                    report.degraded.push(id);
                }
            }
        }
        report
    }

    fn drop_holder(&mut self, node: NodeId, object: &ObjectId) {
        self.remove_replica(node, object);
        if let Some(obj) = self.objects.get_mut(object) {
            obj.replicas.remove(&node);
        }
    }

    fn write_replica(&mut self, node_id: NodeId, object: &ObjectId, payload: Bytes) {
        let node = self.nodes.get_mut(&node_id).expect("planned node exists");
        let size = payload.len() as u64;
        debug_assert!(node.free_bytes() >= size);
        node.used_bytes += size;
        node.replicas.insert(object.clone(), payload);
        self.effects.push(StorageEffect::ReplicaWritten {
            node: node_id,
            object: object.clone(),
            size_bytes: size,
        });
    }

    fn remove_replica(&mut self, node_id: NodeId, object: &ObjectId) {
        let node = self.nodes.get_mut(&node_id).expect("replica node exists");
        if let Some(bytes) = node.replicas.remove(object) {
            let size = bytes.len() as u64;
            node.used_bytes -= size;
            self.effects.push(StorageEffect::ReplicaRemoved {
                node: node_id,
                object: object.clone(),
                size_bytes: size,
            });
        }
    }

    /// Advances the logical clock, charging one ledger entry per Up node per
    /// elapsed tick.
    pub fn advance_clock(&mut self, ticks: i64) -> Result<()> {
        if ticks < 0 {
            return Err(Error::validation("ticks must not be negative"));
        }
        if ticks > MAX_TICKS_PER_ADVANCE {
            return Err(Error::validation(format!(
                "at most {MAX_TICKS_PER_ADVANCE} ticks per advance"
            )));
        }
        if ticks == 0 {
            return Ok(());
        }
        let ticks = ticks as u64;
        for tick in self.tick..self.tick + ticks {
            for node in self.nodes.values().filter(|n| n.is_up()) {
                self.ledger.push(UsageEntry {
                    tick,
                    node: node.id,
                    bytes: node.used_bytes,
                });
            }
        }
        self.tick += ticks;
        self.effects.push(StorageEffect::ClockAdvanced { ticks });
        Ok(())
    }

    pub fn usage_report(&self, from_tick: u64, to_tick: u64) -> Result<UsageReport> {
        self.ledger.report(from_tick, to_tick)
    }

    pub fn up_replica_count(&self, object: &StoredObject) -> usize {
        object
            .replicas
            .iter()
            .filter(|n| self.nodes.get(n).is_some_and(StorageNode::is_up))
            .count()
    }

    pub fn health(&self) -> Health {
        let degraded = self
            .objects
            .values()
            .filter(|o| self.up_replica_count(o) < usize::from(o.replication))
            .count() as u64;
        Health {
            ok: degraded == 0,
            degraded_objects: degraded,
            up_nodes: self.up_node_count() as u64,
        }
    }

    /// Flips one byte of a resident replica. Fault injection for tests and
    /// operators; the object's recorded checksum is left as is.
    pub fn corrupt_replica(&mut self, node: NodeId, object: &ObjectId) -> Result<()> {
        let bytes = self
            .nodes
            .get_mut(&node)
            .and_then(|n| n.replicas.get_mut(object))
            .ok_or_else(|| Error::not_found(format!("no replica of {object} on {node}")))?;
        let mut damaged = bytes.to_vec();
        damaged[0] ^= 0xff;
        *bytes = Bytes::from(damaged);
        Ok(())
    }

    /// Verifies byte accounting: each node's `used_bytes` equals the sum of
    /// its resident replicas and never exceeds capacity, and each object's
    /// holder set matches the nodes that actually hold it.
    pub fn check_conservation(&self) -> std::result::Result<(), String> {
        for node in self.nodes.values() {
            let resident: u64 = node.replicas.values().map(|b| b.len() as u64).sum();
            if resident != node.used_bytes {
                return Err(format!(
                    "{}: used_bytes {} but replicas sum to {resident}",
                    node.id, node.used_bytes
                ));
            }
            if node.used_bytes > node.capacity_bytes {
                return Err(format!("{}: over capacity", node.id));
            }
        }
        for object in self.objects.values() {
            for holder in &object.replicas {
                if !self.nodes[holder].replicas.contains_key(&object.id) {
                    return Err(format!("{} lists {holder} but it holds no replica", object.id));
                }
            }
            for node in self.nodes.values() {
                if node.replicas.contains_key(&object.id) && !object.replicas.contains(&node.id) {
                    return Err(format!("{} holds unlisted replica of {}", node.id, object.id));
                }
            }
        }
        Ok(())
    }

    pub fn to_state(&self) -> DataCenterState {
        let mut blobs = BTreeMap::new();
        let nodes = self
            .nodes
            .values()
            .map(|n| {
                let replicas = n
                    .replicas
                    .iter()
                    .map(|(id, bytes)| {
                        let sum = sha256_hex(bytes);
                        blobs
                            .entry(sum.clone())
                            .or_insert_with(|| Blob(bytes.clone()));
                        (id.clone(), sum)
                    })
                    .collect();
                (
                    n.id,
                    NodeState {
                        capacity_bytes: n.capacity_bytes,
                        used_bytes: n.used_bytes,
                        status: n.status,
                        replicas,
                    },
                )
            })
            .collect();
        DataCenterState {
            tick: self.tick,
            next_node: self.next_node,
            next_object: self.next_object,
            nodes,
            objects: self.objects.clone(),
            blobs,
            ledger: self.ledger.entries().to_vec(),
        }
    }

    pub fn from_state(config: DataCenterConfig, state: DataCenterState) -> Result<Self> {
        let mut dc = DataCenter::new(config);
        dc.tick = state.tick;
        dc.next_node = state.next_node;
        dc.next_object = state.next_object;
        for (id, node) in state.nodes {
            let replicas = node
                .replicas
                .into_iter()
                .map(|(object, sum)| {
                    state
                        .blobs
                        .get(&sum)
                        .map(|b| (object, b.0.clone()))
                        .ok_or_else(|| Error::validation(format!("missing blob {sum}")))
                })
                .collect::<Result<_>>()?;
            dc.nodes.insert(
                id,
                StorageNode {
                    id,
                    capacity_bytes: node.capacity_bytes,
                    used_bytes: node.used_bytes,
                    status: node.status,
                    replicas,
                },
            );
        }
        dc.objects = state.objects;
        dc.ledger = UsageLedger::from_entries(state.ledger);
        dc.check_conservation().map_err(Error::validation)?;
        Ok(dc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blob(#[serde(with = "base64_bytes")] pub Bytes);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub capacity_bytes: u64,
    pub used_bytes: u64,
    pub status: NodeStatus,
    /// Object id to checksum of the bytes this node actually holds.
    pub replicas: BTreeMap<ObjectId, String>,
}

/// Serializable form of the whole data center. Payloads are stored once per
/// distinct content in `blobs`, keyed by checksum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataCenterState {
    pub tick: u64,
    pub next_node: u64,
    pub next_object: u64,
    pub nodes: BTreeMap<NodeId, NodeState>,
    pub objects: BTreeMap<ObjectId, StoredObject>,
    pub blobs: BTreeMap<String, Blob>,
    pub ledger: Vec<UsageEntry>,
}
