//! Multi-replica causally consistent key-value store with highly available
//! transactions.
//!
//! A [`Cluster`] holds every replica of the simulated store together with the
//! queue of commits still travelling between replicas. Nothing happens in the
//! background: commits move only when the driver calls [`Cluster::deliver`],
//! [`Cluster::deliver_message`], or [`Cluster::flush`].
//!
//! Transactions read from the snapshot taken at [`Cluster::begin`], overlaid
//! with their own buffered updates. A commit is applied at its origin
//! immediately and at every other replica once its dependencies are there,
//! always as a single atomic step.

mod clock;

pub use clock::VectorClock;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crdt::{Bytes, CrdtError, CrdtState, CrdtType, Dot, Effect, ObjectState, ReadResult, ReplicaId, UpdateOp};

/// Address of one CRDT instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BoundObject {
    pub bucket: Bytes,
    pub key: Bytes,
    pub crdt_type: CrdtType,
}

impl BoundObject {
    pub fn new(bucket: impl Into<Bytes>, key: impl Into<Bytes>, crdt_type: CrdtType) -> Self {
        BoundObject {
            bucket: bucket.into(),
            key: key.into(),
            crdt_type,
        }
    }
}

impl fmt::Display for BoundObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}:{}",
            String::from_utf8_lossy(&self.bucket),
            String::from_utf8_lossy(&self.key).escape_debug(),
            self.crdt_type
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommitId {
    pub origin: ReplicaId,
    pub seq: u64,
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.origin, self.seq)
    }
}

/// The replicated unit of a transaction: all of its effects, applied together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionCommit {
    pub origin: ReplicaId,
    pub effects: Vec<(BoundObject, Effect)>,
    pub snapshot_clock: VectorClock,
    pub commit_clock: VectorClock,
}

impl TransactionCommit {
    pub fn id(&self) -> CommitId {
        CommitId {
            origin: self.origin,
            seq: self.commit_clock.get(self.origin),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Consistency {
    /// Commits are applied only after everything they depend on.
    Causal,
    /// Causality check disabled; remote commits apply on arrival.
    Eventual,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("unknown replica {0}")]
    UnknownReplica(ReplicaId),
    #[error("transaction is no longer open")]
    TransactionClosed,
    #[error("{object}: {source}")]
    TypeMismatch {
        object: BoundObject,
        #[source]
        source: CrdtError,
    },
    #[error("no message at queue index {0}")]
    NoSuchMessage(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    /// The commit and `unblocked` previously buffered commits were applied.
    Applied {
        unblocked: usize,
    },
    /// Dependencies are missing; the commit waits in the pending buffer.
    Buffered,
    Duplicate,
    SelfDelivery,
}

#[derive(Clone, Debug)]
struct ObjectHistory {
    current: ObjectState,
    /// Effects with the log position of the commit that carried them.
    effects: Vec<(usize, Effect)>,
}

impl ObjectHistory {
    fn new(ty: CrdtType) -> Self {
        ObjectHistory {
            current: ObjectState::new(ty),
            effects: Vec::new(),
        }
    }

    /// State made of the commits at log positions `< position`.
    fn state_at(&self, ty: CrdtType, position: usize) -> ObjectState {
        if self.effects.last().is_none_or(|(p, _)| *p < position) {
            return self.current.clone();
        }
        let mut state = ObjectState::new(ty);
        for (_, e) in self.effects.iter().take_while(|(p, _)| *p < position) {
            state
                .apply_effect(e)
                .expect("logged effects were type-checked when generated");
        }
        state
    }
}

#[derive(Clone, Debug)]
pub struct Replica {
    id: ReplicaId,
    applied_clock: VectorClock,
    objects: BTreeMap<BoundObject, ObjectHistory>,
    pending: Vec<Arc<TransactionCommit>>,
    /// Commits in application order.
    log: Vec<CommitId>,
    applied: BTreeSet<CommitId>,
    next_dot: u64,
}

impl Replica {
    fn new(id: ReplicaId) -> Self {
        Replica {
            id,
            applied_clock: VectorClock::new(),
            objects: BTreeMap::new(),
            pending: Vec::new(),
            log: Vec::new(),
            applied: BTreeSet::new(),
            next_dot: 0,
        }
    }

    pub fn id(&self) -> ReplicaId {
        self.id
    }

    pub fn applied_clock(&self) -> &VectorClock {
        &self.applied_clock
    }

    /// Commit ids in the order this replica applied them.
    pub fn log(&self) -> &[CommitId] {
        &self.log
    }

    /// Delivery to this replica alone; see [`Cluster::deliver`].
    pub(crate) fn receive(&mut self, commit: &Arc<TransactionCommit>, mode: Consistency) -> Delivery {
        if commit.origin == self.id {
            return Delivery::SelfDelivery;
        }
        let id = commit.id();
        if self.applied.contains(&id) || self.pending.iter().any(|c| c.id() == id) {
            return Delivery::Duplicate;
        }
        if self.deliverable(commit, mode) {
            self.apply(commit);
            let unblocked = self.drain_pending(mode);
            Delivery::Applied { unblocked }
        } else {
            self.pending.push(Arc::clone(commit));
            Delivery::Buffered
        }
    }

    pub fn has_applied(&self, id: CommitId) -> bool {
        self.applied.contains(&id)
    }

    pub fn pending(&self) -> impl Iterator<Item = &TransactionCommit> {
        self.pending.iter().map(|c| c.as_ref())
    }

    /// Latest local state of every object this replica has seen.
    pub fn objects(&self) -> impl Iterator<Item = (&BoundObject, &CrdtState)> {
        self.objects.iter().map(|(o, h)| (o, h.current.state()))
    }

    /// Reads the latest local state, outside any transaction.
    pub fn read_current(&self, object: &BoundObject) -> ReadResult {
        self.objects
            .get(object)
            .map(|h| h.current.read())
            .unwrap_or_else(|| ReadResult::empty(object.crdt_type))
    }

    fn state_at(&self, object: &BoundObject, position: usize) -> ObjectState {
        self.objects
            .get(object)
            .map(|h| h.state_at(object.crdt_type, position))
            .unwrap_or_else(|| ObjectState::new(object.crdt_type))
    }

    fn deliverable(&self, commit: &TransactionCommit, mode: Consistency) -> bool {
        match mode {
            Consistency::Eventual => true,
            Consistency::Causal => {
                let id = commit.id();
                self.applied_clock.get(id.origin) + 1 == id.seq && commit.snapshot_clock.leq(&self.applied_clock)
            }
        }
    }

    fn apply(&mut self, commit: &TransactionCommit) {
        let position = self.log.len();
        for (object, effect) in &commit.effects {
            let history = self
                .objects
                .entry(object.clone())
                .or_insert_with(|| ObjectHistory::new(object.crdt_type));
            if history
                .current
                .apply_effect(effect)
                .expect("effects were type-checked when generated")
            {
                history.effects.push((position, effect.clone()));
            }
        }
        let id = commit.id();
        if self.applied_clock.get(id.origin) < id.seq {
            self.applied_clock.set(id.origin, id.seq);
        }
        self.log.push(id);
        self.applied.insert(id);
    }

    /// Applies every buffered commit whose dependencies are now satisfied.
    fn drain_pending(&mut self, mode: Consistency) -> usize {
        let mut applied = 0;
        while let Some(i) = self.pending.iter().position(|c| self.deliverable(c, mode)) {
            let c = self.pending.remove(i);
            self.apply(&c);
            applied += 1;
        }
        applied
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxStatus {
    Open,
    Committed,
    Aborted,
}

/// Handle of an open transaction. Counters record how many reads and updates
/// went through the handle.
#[derive(Clone, Debug)]
pub struct Transaction {
    replica: ReplicaId,
    snapshot_clock: VectorClock,
    position: usize,
    local: BTreeMap<BoundObject, ObjectState>,
    effects: Vec<(BoundObject, Effect)>,
    status: TxStatus,
    reads: u64,
    updates: u64,
}

impl Transaction {
    pub fn replica(&self) -> ReplicaId {
        self.replica
    }

    pub fn snapshot_clock(&self) -> &VectorClock {
        &self.snapshot_clock
    }

    pub fn status(&self) -> TxStatus {
        self.status
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffered_effects(&self) -> &[(BoundObject, Effect)] {
        &self.effects
    }

    fn ensure_open(&self) -> Result<(), StoreError> {
        match self.status {
            TxStatus::Open => Ok(()),
            _ => Err(StoreError::TransactionClosed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Message {
    pub to: ReplicaId,
    pub commit: Arc<TransactionCommit>,
}

/// All replicas of the store plus the commits in transit between them.
#[derive(Clone, Debug)]
pub struct Cluster {
    mode: Consistency,
    replicas: Vec<Replica>,
    in_flight: Vec<Message>,
}

impl Cluster {
    /// Creates replicas `r0 .. r{count-1}`.
    pub fn new(count: u32, mode: Consistency) -> Self {
        Cluster {
            mode,
            replicas: (0..count).map(|i| Replica::new(ReplicaId(i))).collect(),
            in_flight: Vec::new(),
        }
    }

    pub fn mode(&self) -> Consistency {
        self.mode
    }

    pub fn replica_ids(&self) -> impl Iterator<Item = ReplicaId> + '_ {
        self.replicas.iter().map(|r| r.id)
    }

    pub fn replica(&self, id: ReplicaId) -> Result<&Replica, StoreError> {
        self.replicas.get(id.0 as usize).ok_or(StoreError::UnknownReplica(id))
    }

    fn replica_mut(&mut self, id: ReplicaId) -> Result<&mut Replica, StoreError> {
        self.replicas
            .get_mut(id.0 as usize)
            .ok_or(StoreError::UnknownReplica(id))
    }

    pub fn begin(&self, replica: ReplicaId) -> Result<Transaction, StoreError> {
        let r = self.replica(replica)?;
        Ok(Transaction {
            replica,
            snapshot_clock: r.applied_clock.clone(),
            position: r.log.len(),
            local: BTreeMap::new(),
            effects: Vec::new(),
            status: TxStatus::Open,
            reads: 0,
            updates: 0,
        })
    }

    /// Reads `object` as of the transaction snapshot plus the transaction's
    /// own updates. Unknown objects read as the empty state of their type.
    pub fn read(&self, tx: &mut Transaction, object: &BoundObject) -> Result<ReadResult, StoreError> {
        tx.ensure_open()?;
        tx.reads += 1;
        if let Some(state) = tx.local.get(object) {
            return Ok(state.read());
        }
        Ok(self.replica(tx.replica)?.state_at(object, tx.position).read())
    }

    /// Buffers an update; it stays invisible outside `tx` until commit.
    pub fn update(&mut self, tx: &mut Transaction, object: &BoundObject, op: UpdateOp) -> Result<(), StoreError> {
        tx.ensure_open()?;
        if op.crdt_type() != object.crdt_type {
            return Err(StoreError::TypeMismatch {
                object: object.clone(),
                source: CrdtError::TypeMismatch {
                    expected: object.crdt_type,
                    found: op.crdt_type(),
                },
            });
        }
        let replica = self.replica_mut(tx.replica)?;
        if !tx.local.contains_key(object) {
            let state = replica.state_at(object, tx.position);
            tx.local.insert(object.clone(), state);
        }
        let state = tx.local.get_mut(object).expect("inserted above");
        replica.next_dot += 1;
        let dot = Dot {
            replica: replica.id,
            counter: replica.next_dot,
        };
        let effect = state
            .generate_effect(op, dot)
            .map_err(|source| StoreError::TypeMismatch {
                object: object.clone(),
                source,
            })?;
        state
            .apply_effect(&effect)
            .expect("effect generated against this state");
        tx.effects.push((object.clone(), effect));
        tx.updates += 1;
        Ok(())
    }

    /// Applies the transaction at its origin and queues it for every other
    /// replica. Never waits on remote replicas.
    pub fn commit(&mut self, tx: &mut Transaction) -> Result<Arc<TransactionCommit>, StoreError> {
        tx.ensure_open()?;
        let origin = tx.replica;
        let replica = self.replica_mut(origin)?;
        let seq = replica.applied_clock.get(origin) + 1;
        let mut commit_clock = tx.snapshot_clock.clone();
        commit_clock.set(origin, seq);
        let commit = Arc::new(TransactionCommit {
            origin,
            effects: std::mem::take(&mut tx.effects),
            snapshot_clock: tx.snapshot_clock.clone(),
            commit_clock,
        });
        replica.apply(&commit);
        tx.status = TxStatus::Committed;
        tx.local.clear();
        for r in &self.replicas {
            if r.id != origin {
                self.in_flight.push(Message {
                    to: r.id,
                    commit: Arc::clone(&commit),
                });
            }
        }
        Ok(commit)
    }

    /// Discards the buffered updates.
    pub fn abort(&self, tx: &mut Transaction) -> Result<(), StoreError> {
        tx.ensure_open()?;
        tx.status = TxStatus::Aborted;
        tx.effects.clear();
        tx.local.clear();
        Ok(())
    }

    /// Hands `commit` to `to`. Under causal consistency a commit whose
    /// dependencies are missing is buffered and applied once they arrive.
    pub fn deliver(&mut self, to: ReplicaId, commit: &Arc<TransactionCommit>) -> Result<Delivery, StoreError> {
        let mode = self.mode;
        Ok(self.replica_mut(to)?.receive(commit, mode))
    }

    /// Messages not yet handed to their destination, oldest first.
    pub fn in_flight(&self) -> &[Message] {
        &self.in_flight
    }

    /// Removes the message at `index` from the queue and delivers it.
    pub fn deliver_message(&mut self, index: usize) -> Result<Delivery, StoreError> {
        if index >= self.in_flight.len() {
            return Err(StoreError::NoSuchMessage(index));
        }
        let msg = self.in_flight.remove(index);
        self.deliver(msg.to, &msg.commit)
    }

    /// Delivers every queued message in FIFO order.
    pub fn flush(&mut self) -> Result<usize, StoreError> {
        let mut n = 0;
        while !self.in_flight.is_empty() {
            self.deliver_message(0)?;
            n += 1;
        }
        Ok(n)
    }

    /// Whether every replica holds identical object states.
    pub fn converged(&self) -> bool {
        let mut replicas = self.replicas.iter();
        let Some(first) = replicas.next() else {
            return true;
        };
        let reference: Vec<_> = first.objects().collect();
        replicas.all(|r| r.objects().collect::<Vec<_>>() == reference)
    }
}
