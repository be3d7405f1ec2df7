use std::collections::BTreeMap;

use crate::crdt::{Permissions, ReadResult, UpdateOp};
use crate::store::BoundObject;

use super::UserId;

/// One named level of an object hierarchy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub object: BoundObject,
    /// Also read the layer object's data value for the decision.
    pub with_value: bool,
}

/// Which objects contribute permissions to a decision about one object.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LayerDefinition {
    pub layers: Vec<LayerSpec>,
}

impl LayerDefinition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layer(mut self, name: impl Into<String>, object: BoundObject) -> Self {
        self.layers.push(LayerSpec {
            name: name.into(),
            object,
            with_value: false,
        });
        self
    }

    pub fn layer_with_value(mut self, name: impl Into<String>, object: BoundObject) -> Self {
        self.layers.push(LayerSpec {
            name: name.into(),
            object,
            with_value: true,
        });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedLayer {
    pub object: BoundObject,
    pub permissions: Permissions,
    pub value: Option<ReadResult>,
}

/// Permissions of the acting user on every layer, read from the transaction
/// snapshot.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SecurityLayers {
    layers: BTreeMap<String, ResolvedLayer>,
}

static NO_PERMISSIONS: Permissions = Permissions::new();

impl SecurityLayers {
    pub(crate) fn insert(&mut self, name: String, layer: ResolvedLayer) {
        self.layers.insert(name, layer);
    }

    pub fn get(&self, name: &str) -> Option<&ResolvedLayer> {
        self.layers.get(name)
    }

    /// Permissions on one layer; empty when the layer is not defined.
    pub fn permissions(&self, name: &str) -> &Permissions {
        self.layers.get(name).map_or(&NO_PERMISSIONS, |l| &l.permissions)
    }

    pub fn has(&self, name: &str, token: &str) -> bool {
        self.permissions(name).contains(token.as_bytes())
    }

    /// Data value of a layer object, when requested in the definition.
    pub fn value(&self, name: &str) -> Option<&ReadResult> {
        self.layers.get(name).and_then(|l| l.value.as_ref())
    }

    /// Effective permissions: the union over all layers.
    pub fn union(&self) -> Permissions {
        self.layers
            .values()
            .flat_map(|l| l.permissions.iter().cloned())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ResolvedLayer)> {
        self.layers.iter().map(|(n, l)| (n.as_str(), l))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Application policy consulted for every operation of a secured
/// transaction. Implementations must base decisions only on their arguments.
#[allow(clippy::too_many_arguments)]
pub trait DecisionProcedure {
    /// Caller context passed through untouched.
    type UserData;

    fn decide_read(
        &self,
        current_user: &UserId,
        object: &BoundObject,
        user_data: &Self::UserData,
        layers: &SecurityLayers,
    ) -> bool;

    fn decide_update(
        &self,
        current_user: &UserId,
        object: &BoundObject,
        op: &UpdateOp,
        user_data: &Self::UserData,
        layers: &SecurityLayers,
    ) -> bool;

    fn decide_policy_read(
        &self,
        current_user: &UserId,
        object: &BoundObject,
        target_user: &UserId,
        user_data: &Self::UserData,
        layers: &SecurityLayers,
    ) -> bool;

    /// `old_permissions` is the current (intersection) read of the target's
    /// policy on `object`.
    fn decide_policy_assign(
        &self,
        current_user: &UserId,
        object: &BoundObject,
        target_user: &UserId,
        new_permissions: &Permissions,
        old_permissions: &Permissions,
        user_data: &Self::UserData,
        layers: &SecurityLayers,
    ) -> bool;

    fn requested_policies(&self, current_user: &UserId, object: &BoundObject) -> LayerDefinition;
}

/// Allows everything and requests no layers.
#[derive(Clone, Copy, Debug, Default)]
pub struct AllowAll;

impl DecisionProcedure for AllowAll {
    type UserData = ();

    fn decide_read(&self, _: &UserId, _: &BoundObject, _: &(), _: &SecurityLayers) -> bool {
        true
    }

    fn decide_update(&self, _: &UserId, _: &BoundObject, _: &UpdateOp, _: &(), _: &SecurityLayers) -> bool {
        true
    }

    fn decide_policy_read(&self, _: &UserId, _: &BoundObject, _: &UserId, _: &(), _: &SecurityLayers) -> bool {
        true
    }

    fn decide_policy_assign(
        &self,
        _: &UserId,
        _: &BoundObject,
        _: &UserId,
        _: &Permissions,
        _: &Permissions,
        _: &(),
        _: &SecurityLayers,
    ) -> bool {
        true
    }

    fn requested_policies(&self, _: &UserId, _: &BoundObject) -> LayerDefinition {
        LayerDefinition::new()
    }
}

/// Denies everything and requests no layers.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenyAll;

impl DecisionProcedure for DenyAll {
    type UserData = ();

    fn decide_read(&self, _: &UserId, _: &BoundObject, _: &(), _: &SecurityLayers) -> bool {
        false
    }

    fn decide_update(&self, _: &UserId, _: &BoundObject, _: &UpdateOp, _: &(), _: &SecurityLayers) -> bool {
        false
    }

    fn decide_policy_read(&self, _: &UserId, _: &BoundObject, _: &UserId, _: &(), _: &SecurityLayers) -> bool {
        false
    }

    fn decide_policy_assign(
        &self,
        _: &UserId,
        _: &BoundObject,
        _: &UserId,
        _: &Permissions,
        _: &Permissions,
        _: &(),
        _: &SecurityLayers,
    ) -> bool {
        false
    }

    fn requested_policies(&self, _: &UserId, _: &BoundObject) -> LayerDefinition {
        LayerDefinition::new()
    }
}
