//! Access-control monitor over the store's transaction interface.
//!
//! A [`SecureCluster`] wraps a [`Cluster`] and hands out
//! [`SecuredTransaction`]s bound to one acting user and one
//! [`DecisionProcedure`]. Every data read, data update, policy read, and
//! policy assignment resolves the requested security layers and asks the
//! procedure first, using the same snapshot the operation then runs on.
//!
//! Permission sets live next to the data in the store, in buckets prefixed
//! with `acl$` (see [`policy_storage_key`]), so policy and data changes of one
//! transaction commit atomically and travel under the same causal order.

mod keys;
mod procedure;

pub use keys::{check_data_object, is_policy_bucket, policy_storage_key, POLICY_BUCKET_PREFIX, RESERVED_BUCKET_BYTE};
pub use procedure::{AllowAll, DecisionProcedure, DenyAll, LayerDefinition, LayerSpec, ResolvedLayer, SecurityLayers};

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::crdt::{Bytes, Permissions, ReadResult, ReplicaId, UpdateOp};
use crate::store::{BoundObject, Cluster, Delivery, Message, StoreError, Transaction, TransactionCommit, TxStatus};

/// Identity of the acting user. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(Bytes);

impl UserId {
    pub fn new(id: impl Into<Bytes>) -> Result<Self, AclError> {
        let id = id.into();
        if id.is_empty() {
            return Err(AclError::EmptyUserId);
        }
        Ok(UserId(id))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Action {
    Read,
    Update,
    PolicyRead,
    PolicyAssign,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AclError {
    #[error("{action:?} of {object} denied for {user}")]
    Denied {
        user: UserId,
        action: Action,
        object: BoundObject,
    },
    #[error("user id must not be empty")]
    EmptyUserId,
    #[error("bucket {:?} is reserved", String::from_utf8_lossy(.0))]
    ReservedBucket(Bytes),
    #[error("{0}: policy-typed objects cannot be used as data")]
    PolicyTypedData(BoundObject),
    #[error("layer {0:?} defined twice")]
    DuplicateLayer(String),
    #[error("policy bootstrap is only possible before the first secured transaction")]
    BootstrapClosed,
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl AclError {
    pub fn is_denied(&self) -> bool {
        matches!(self, AclError::Denied { .. })
    }
}

/// Operation counts of the monitor.
///
/// `data_reads + data_updates + policy_reads + policy_assigns == allowed`:
/// nothing reaches the store on behalf of the application without an
/// allowing decision. `decision_reads` are the extra reads issued to feed
/// decisions (layer policies, layer values, and the old policy of an
/// assignment).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AclCounters {
    pub decisions: u64,
    pub allowed: u64,
    pub denied: u64,
    pub data_reads: u64,
    pub data_updates: u64,
    pub policy_reads: u64,
    pub policy_assigns: u64,
    pub decision_reads: u64,
}

impl AclCounters {
    pub fn add(&mut self, other: &AclCounters) {
        self.decisions += other.decisions;
        self.allowed += other.allowed;
        self.denied += other.denied;
        self.data_reads += other.data_reads;
        self.data_updates += other.data_updates;
        self.policy_reads += other.policy_reads;
        self.policy_assigns += other.policy_assigns;
        self.decision_reads += other.decision_reads;
    }

    /// Operations issued by the application, excluding decision support reads.
    pub fn app_ops(&self) -> u64 {
        self.data_reads + self.data_updates + self.policy_reads + self.policy_assigns
    }
}

/// A transaction executed under the name of one user.
pub struct SecuredTransaction<'p, P: DecisionProcedure> {
    inner: Transaction,
    user: UserId,
    procedure: &'p P,
    user_data: P::UserData,
    counters: AclCounters,
}

impl<'p, P: DecisionProcedure> SecuredTransaction<'p, P> {
    pub fn user(&self) -> &UserId {
        &self.user
    }

    pub fn replica(&self) -> ReplicaId {
        self.inner.replica()
    }

    pub fn inner(&self) -> &Transaction {
        &self.inner
    }

    pub fn user_data(&self) -> &P::UserData {
        &self.user_data
    }

    pub fn counters(&self) -> &AclCounters {
        &self.counters
    }

    fn ensure_open(&self) -> Result<(), AclError> {
        match self.inner.status() {
            TxStatus::Open => Ok(()),
            _ => Err(StoreError::TransactionClosed.into()),
        }
    }
}

/// The store cluster behind the access-control monitor.
#[derive(Clone, Debug)]
pub struct SecureCluster {
    cluster: Cluster,
    sealed: bool,
    counters: AclCounters,
}

impl SecureCluster {
    pub fn new(cluster: Cluster) -> Self {
        SecureCluster {
            cluster,
            sealed: false,
            counters: AclCounters::default(),
        }
    }

    /// Read-only view of the underlying store.
    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    /// Totals over all finished secured transactions.
    pub fn counters(&self) -> &AclCounters {
        &self.counters
    }

    /// Writes an initial permission set without any decision. Only possible
    /// before the first secured transaction starts.
    pub fn bootstrap_policy(
        &mut self,
        replica: ReplicaId,
        object: &BoundObject,
        user: &UserId,
        permissions: Permissions,
    ) -> Result<Arc<TransactionCommit>, AclError> {
        if self.sealed {
            return Err(AclError::BootstrapClosed);
        }
        check_data_object(object)?;
        let mut tx = self.cluster.begin(replica)?;
        let key = policy_storage_key(object, user);
        self.cluster
            .update(&mut tx, &key, UpdateOp::PolicyAssign(permissions))?;
        Ok(self.cluster.commit(&mut tx)?)
    }

    pub fn start<'p, P: DecisionProcedure>(
        &mut self,
        replica: ReplicaId,
        user: UserId,
        procedure: &'p P,
        user_data: P::UserData,
    ) -> Result<SecuredTransaction<'p, P>, AclError> {
        let inner = self.cluster.begin(replica)?;
        self.sealed = true;
        Ok(SecuredTransaction {
            inner,
            user,
            procedure,
            user_data,
            counters: AclCounters::default(),
        })
    }

    /// Reads every layer's permission set for the acting user, plus the layer
    /// value where requested, from the transaction snapshot.
    pub fn resolve_layers<P: DecisionProcedure>(
        &self,
        stx: &mut SecuredTransaction<'_, P>,
        definition: &LayerDefinition,
    ) -> Result<SecurityLayers, AclError> {
        stx.ensure_open()?;
        let mut names = BTreeSet::new();
        let mut layers = SecurityLayers::default();
        let user = stx.user.clone();
        for spec in &definition.layers {
            if !names.insert(spec.name.as_str()) {
                return Err(AclError::DuplicateLayer(spec.name.clone()));
            }
            check_data_object(&spec.object)?;
            let permissions = self.read_permissions(stx, &spec.object, &user)?;
            let value = if spec.with_value {
                stx.counters.decision_reads += 1;
                Some(self.cluster.read(&mut stx.inner, &spec.object)?)
            } else {
                None
            };
            layers.insert(
                spec.name.clone(),
                ResolvedLayer {
                    object: spec.object.clone(),
                    permissions,
                    value,
                },
            );
        }
        Ok(layers)
    }

    fn read_permissions<P: DecisionProcedure>(
        &self,
        stx: &mut SecuredTransaction<'_, P>,
        object: &BoundObject,
        user: &UserId,
    ) -> Result<Permissions, AclError> {
        stx.counters.decision_reads += 1;
        match self.cluster.read(&mut stx.inner, &policy_storage_key(object, user))? {
            ReadResult::Permissions(p) => Ok(p),
            other => unreachable!("policy object read as {other:?}"),
        }
    }

    fn layers_for<P: DecisionProcedure>(
        &self,
        stx: &mut SecuredTransaction<'_, P>,
        object: &BoundObject,
    ) -> Result<SecurityLayers, AclError> {
        stx.ensure_open()?;
        check_data_object(object)?;
        let definition = stx.procedure.requested_policies(&stx.user, object);
        self.resolve_layers(stx, &definition)
    }

    fn record<P: DecisionProcedure>(
        stx: &mut SecuredTransaction<'_, P>,
        allowed: bool,
        action: Action,
        object: &BoundObject,
    ) -> Result<(), AclError> {
        stx.counters.decisions += 1;
        if allowed {
            stx.counters.allowed += 1;
            Ok(())
        } else {
            stx.counters.denied += 1;
            Err(AclError::Denied {
                user: stx.user.clone(),
                action,
                object: object.clone(),
            })
        }
    }

    /// Reads a data object if the procedure allows it. A denial leaves the
    /// transaction open.
    pub fn read<P: DecisionProcedure>(
        &self,
        stx: &mut SecuredTransaction<'_, P>,
        object: &BoundObject,
    ) -> Result<ReadResult, AclError> {
        let layers = self.layers_for(stx, object)?;
        let allowed = stx.procedure.decide_read(&stx.user, object, &stx.user_data, &layers);
        Self::record(stx, allowed, Action::Read, object)?;
        stx.counters.data_reads += 1;
        Ok(self.cluster.read(&mut stx.inner, object)?)
    }

    pub fn update<P: DecisionProcedure>(
        &mut self,
        stx: &mut SecuredTransaction<'_, P>,
        object: &BoundObject,
        op: UpdateOp,
    ) -> Result<(), AclError> {
        if op.crdt_type() != object.crdt_type {
            // Surface the store's type error without consulting the procedure.
            return Ok(self.cluster.update(&mut stx.inner, object, op)?);
        }
        let layers = self.layers_for(stx, object)?;
        let allowed = stx
            .procedure
            .decide_update(&stx.user, object, &op, &stx.user_data, &layers);
        Self::record(stx, allowed, Action::Update, object)?;
        stx.counters.data_updates += 1;
        Ok(self.cluster.update(&mut stx.inner, object, op)?)
    }

    /// Assigns the permission set of `target_user` on `object`. The decision
    /// sees the current permissions read from the same snapshot.
    pub fn assign_policy<P: DecisionProcedure>(
        &mut self,
        stx: &mut SecuredTransaction<'_, P>,
        object: &BoundObject,
        target_user: &UserId,
        permissions: Permissions,
    ) -> Result<(), AclError> {
        let layers = self.layers_for(stx, object)?;
        let old = self.read_permissions(stx, object, target_user)?;
        let allowed = stx.procedure.decide_policy_assign(
            &stx.user,
            object,
            target_user,
            &permissions,
            &old,
            &stx.user_data,
            &layers,
        );
        Self::record(stx, allowed, Action::PolicyAssign, object)?;
        stx.counters.policy_assigns += 1;
        let key = policy_storage_key(object, target_user);
        Ok(self
            .cluster
            .update(&mut stx.inner, &key, UpdateOp::PolicyAssign(permissions))?)
    }

    /// Reads the permission set of `target_user` on `object`; unset reads as
    /// empty.
    pub fn read_policy<P: DecisionProcedure>(
        &self,
        stx: &mut SecuredTransaction<'_, P>,
        object: &BoundObject,
        target_user: &UserId,
    ) -> Result<Permissions, AclError> {
        let layers = self.layers_for(stx, object)?;
        let allowed = stx
            .procedure
            .decide_policy_read(&stx.user, object, target_user, &stx.user_data, &layers);
        Self::record(stx, allowed, Action::PolicyRead, object)?;
        stx.counters.policy_reads += 1;
        match self
            .cluster
            .read(&mut stx.inner, &policy_storage_key(object, target_user))?
        {
            ReadResult::Permissions(p) => Ok(p),
            other => unreachable!("policy object read as {other:?}"),
        }
    }

    pub fn commit<P: DecisionProcedure>(
        &mut self,
        stx: &mut SecuredTransaction<'_, P>,
    ) -> Result<Arc<TransactionCommit>, AclError> {
        let commit = self.cluster.commit(&mut stx.inner)?;
        self.counters.add(&stx.counters);
        Ok(commit)
    }

    pub fn abort<P: DecisionProcedure>(&mut self, stx: &mut SecuredTransaction<'_, P>) -> Result<(), AclError> {
        self.cluster.abort(&mut stx.inner)?;
        self.counters.add(&stx.counters);
        Ok(())
    }

    pub fn deliver(&mut self, to: ReplicaId, commit: &Arc<TransactionCommit>) -> Result<Delivery, AclError> {
        Ok(self.cluster.deliver(to, commit)?)
    }

    pub fn in_flight(&self) -> &[Message] {
        self.cluster.in_flight()
    }

    pub fn deliver_message(&mut self, index: usize) -> Result<Delivery, AclError> {
        Ok(self.cluster.deliver_message(index)?)
    }

    pub fn flush(&mut self) -> Result<usize, AclError> {
        Ok(self.cluster.flush()?)
    }
}

#[cfg(test)]
mod tests;
