//! Operation-based CRDTs with dotted effects.
//!
//! Every update is split in two phases. [`CrdtState::generate_effect`] runs at
//! the replica that issues the update and records which dots of the current
//! state the update supersedes. [`CrdtState::apply_effect`] then runs at every
//! replica, in causal order, and is commutative for concurrent effects.
//!
//! The Policy CRDT is a multi-value register of permission sets whose read
//! returns the intersection of all concurrently assigned sets.

mod oracle;

pub use oracle::{for_each_linear_extension, merge_equivalence_oracle, OracleError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque byte string used for keys, values, and permission tokens.
pub type Bytes = Vec<u8>;

/// A set of permission tokens.
pub type Permissions = BTreeSet<Bytes>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReplicaId(pub u32);

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Unique tag of one update's contribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dot {
    pub replica: ReplicaId,
    pub counter: u64,
}

impl Dot {
    pub fn new(replica: u32, counter: u64) -> Self {
        Dot {
            replica: ReplicaId(replica),
            counter,
        }
    }
}

impl fmt::Display for Dot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.replica, self.counter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CrdtType {
    MvReg,
    Policy,
    OrSet,
    Map,
    Counter,
    /// Enable-wins flag.
    Flag,
}

impl fmt::Display for CrdtType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CrdtType::MvReg => "mvreg",
            CrdtType::Policy => "policy",
            CrdtType::OrSet => "orset",
            CrdtType::Map => "map",
            CrdtType::Counter => "counter",
            CrdtType::Flag => "flag",
        };
        f.write_str(name)
    }
}

/// Client-side description of an update.
///
/// Set and map updates are batches: one set update may add and remove
/// elements, one map update may update several keys and remove others. The
/// constraint language inspects these batches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpdateOp {
    Assign(Bytes),
    PolicyAssign(Permissions),
    Set {
        adds: BTreeSet<Bytes>,
        removes: BTreeSet<Bytes>,
    },
    Map {
        updates: BTreeMap<Bytes, UpdateOp>,
        removes: BTreeSet<Bytes>,
    },
    CounterInc(i64),
    FlagSet(bool),
}

impl UpdateOp {
    pub fn assign(value: impl Into<Bytes>) -> Self {
        UpdateOp::Assign(value.into())
    }

    pub fn policy_assign<I, T>(perms: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<Bytes>,
    {
        UpdateOp::PolicyAssign(perms.into_iter().map(Into::into).collect())
    }

    pub fn set_add<I, T>(elems: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<Bytes>,
    {
        UpdateOp::Set {
            adds: elems.into_iter().map(Into::into).collect(),
            removes: BTreeSet::new(),
        }
    }

    pub fn set_remove<I, T>(elems: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<Bytes>,
    {
        UpdateOp::Set {
            adds: BTreeSet::new(),
            removes: elems.into_iter().map(Into::into).collect(),
        }
    }

    /// Map update touching a single key.
    pub fn map_update(key: impl Into<Bytes>, op: UpdateOp) -> Self {
        UpdateOp::Map {
            updates: BTreeMap::from([(key.into(), op)]),
            removes: BTreeSet::new(),
        }
    }

    pub fn map_updates<I, K>(updates: I) -> Self
    where
        I: IntoIterator<Item = (K, UpdateOp)>,
        K: Into<Bytes>,
    {
        UpdateOp::Map {
            updates: updates.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            removes: BTreeSet::new(),
        }
    }

    pub fn map_remove<I, T>(keys: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<Bytes>,
    {
        UpdateOp::Map {
            updates: BTreeMap::new(),
            removes: keys.into_iter().map(Into::into).collect(),
        }
    }

    pub fn crdt_type(&self) -> CrdtType {
        match self {
            UpdateOp::Assign(_) => CrdtType::MvReg,
            UpdateOp::PolicyAssign(_) => CrdtType::Policy,
            UpdateOp::Set { .. } => CrdtType::OrSet,
            UpdateOp::Map { .. } => CrdtType::Map,
            UpdateOp::CounterInc(_) => CrdtType::Counter,
            UpdateOp::FlagSet(_) => CrdtType::Flag,
        }
    }
}

/// Replicated form of an update: the op, its dot, and the dots it supersedes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    pub op: UpdateOp,
    pub dot: Dot,
    pub observed: BTreeSet<Dot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrdtError {
    #[error("type mismatch: object is {expected}, operation is {found}")]
    TypeMismatch { expected: CrdtType, found: CrdtType },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MvRegState {
    entries: BTreeMap<Dot, Bytes>,
}

impl MvRegState {
    pub fn entries(&self) -> impl Iterator<Item = (&Dot, &Bytes)> {
        self.entries.iter()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PolicyState {
    entries: BTreeMap<Dot, Permissions>,
}

impl PolicyState {
    pub fn entries(&self) -> impl Iterator<Item = (&Dot, &Permissions)> {
        self.entries.iter()
    }

    /// Intersection of all concurrently assigned permission sets; an unset
    /// policy grants nothing.
    pub fn read(&self) -> Permissions {
        let mut sets = self.entries.values();
        let Some(first) = sets.next() else {
            return Permissions::new();
        };
        sets.fold(first.clone(), |acc, s| acc.intersection(s).cloned().collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OrSetState {
    elements: BTreeMap<Bytes, BTreeSet<Dot>>,
}

impl OrSetState {
    pub fn tags(&self, elem: &[u8]) -> Option<&BTreeSet<Dot>> {
        self.elements.get(elem)
    }
}

/// Map of nested CRDTs keyed by (key, type).
///
/// A binding is present while its nested state holds at least one live dot.
/// Removal drops the observed dots, so a concurrent update keeps the binding
/// alive (update wins).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MapState {
    bindings: BTreeMap<(Bytes, CrdtType), CrdtState>,
}

impl MapState {
    pub fn get(&self, key: &[u8], ty: CrdtType) -> Option<&CrdtState> {
        self.bindings.get(&(key.to_vec(), ty))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CounterState {
    increments: BTreeMap<Dot, i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FlagState {
    enables: BTreeSet<Dot>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CrdtState {
    MvReg(MvRegState),
    Policy(PolicyState),
    OrSet(OrSetState),
    Map(MapState),
    Counter(CounterState),
    Flag(FlagState),
}

/// Result of reading a CRDT.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadResult {
    /// All concurrently assigned register values.
    Values(BTreeSet<Bytes>),
    Permissions(Permissions),
    Set(BTreeSet<Bytes>),
    Map(BTreeMap<(Bytes, CrdtType), ReadResult>),
    Counter(i64),
    Flag(bool),
}

impl ReadResult {
    pub fn empty(ty: CrdtType) -> Self {
        CrdtState::empty(ty).read()
    }

    /// Looks up a nested binding of a map read.
    pub fn field(&self, key: &[u8], ty: CrdtType) -> Option<&ReadResult> {
        match self {
            ReadResult::Map(m) => m.get(&(key.to_vec(), ty)),
            _ => None,
        }
    }

    /// Flag value of a map binding; an absent flag reads as false.
    pub fn flag_field(&self, key: &[u8]) -> bool {
        matches!(self.field(key, CrdtType::Flag), Some(ReadResult::Flag(true)))
    }

    /// Elements of a set binding; an absent set reads as empty.
    pub fn set_field(&self, key: &[u8]) -> BTreeSet<Bytes> {
        match self.field(key, CrdtType::OrSet) {
            Some(ReadResult::Set(s)) => s.clone(),
            _ => BTreeSet::new(),
        }
    }

    /// Whether the read carries no data at all.
    pub fn is_empty(&self) -> bool {
        match self {
            ReadResult::Values(s) | ReadResult::Permissions(s) | ReadResult::Set(s) => s.is_empty(),
            ReadResult::Map(m) => m.is_empty(),
            ReadResult::Counter(c) => *c == 0,
            ReadResult::Flag(f) => !f,
        }
    }
}

impl CrdtState {
    pub fn empty(ty: CrdtType) -> Self {
        match ty {
            CrdtType::MvReg => CrdtState::MvReg(MvRegState::default()),
            CrdtType::Policy => CrdtState::Policy(PolicyState::default()),
            CrdtType::OrSet => CrdtState::OrSet(OrSetState::default()),
            CrdtType::Map => CrdtState::Map(MapState::default()),
            CrdtType::Counter => CrdtState::Counter(CounterState::default()),
            CrdtType::Flag => CrdtState::Flag(FlagState::default()),
        }
    }

    pub fn crdt_type(&self) -> CrdtType {
        match self {
            CrdtState::MvReg(_) => CrdtType::MvReg,
            CrdtState::Policy(_) => CrdtType::Policy,
            CrdtState::OrSet(_) => CrdtType::OrSet,
            CrdtState::Map(_) => CrdtType::Map,
            CrdtState::Counter(_) => CrdtType::Counter,
            CrdtState::Flag(_) => CrdtType::Flag,
        }
    }

    /// Prepares `op` for replication. The effect's observed set holds the
    /// dots of this state that the update supersedes.
    pub fn generate_effect(&self, op: UpdateOp, dot: Dot) -> Result<Effect, CrdtError> {
        let mut observed = BTreeSet::new();
        self.collect_observed(&op, &mut observed)?;
        Ok(Effect { op, dot, observed })
    }

    fn collect_observed(&self, op: &UpdateOp, out: &mut BTreeSet<Dot>) -> Result<(), CrdtError> {
        match (self, op) {
            (CrdtState::MvReg(s), UpdateOp::Assign(_)) => out.extend(s.entries.keys().copied()),
            (CrdtState::Policy(s), UpdateOp::PolicyAssign(_)) => out.extend(s.entries.keys().copied()),
            (CrdtState::OrSet(s), UpdateOp::Set { removes, .. }) => {
                for e in removes {
                    if let Some(tags) = s.elements.get(e) {
                        out.extend(tags.iter().copied());
                    }
                }
            }
            (CrdtState::Counter(_), UpdateOp::CounterInc(_)) => {}
            (CrdtState::Flag(s), UpdateOp::FlagSet(_)) => out.extend(s.enables.iter().copied()),
            (CrdtState::Map(s), UpdateOp::Map { updates, removes }) => {
                for ((k, _), nested) in &s.bindings {
                    if removes.contains(k) {
                        nested.live_dots(out);
                    }
                }
                for (k, nested_op) in updates {
                    let ty = nested_op.crdt_type();
                    match s.bindings.get(&(k.clone(), ty)) {
                        Some(nested) => nested.collect_observed(nested_op, out)?,
                        None => CrdtState::empty(ty).collect_observed(nested_op, out)?,
                    }
                }
            }
            (state, op) => {
                return Err(CrdtError::TypeMismatch {
                    expected: state.crdt_type(),
                    found: op.crdt_type(),
                })
            }
        }
        Ok(())
    }

    /// Applies a replicated effect. Concurrent effects commute once their
    /// causal predecessors have been applied.
    pub fn apply_effect(&mut self, effect: &Effect) -> Result<(), CrdtError> {
        self.apply_op(&effect.op, effect.dot, &effect.observed)
    }

    fn apply_op(&mut self, op: &UpdateOp, dot: Dot, observed: &BTreeSet<Dot>) -> Result<(), CrdtError> {
        match (&mut *self, op) {
            (CrdtState::MvReg(s), UpdateOp::Assign(v)) => {
                s.entries.retain(|d, _| !observed.contains(d));
                s.entries.insert(dot, v.clone());
            }
            (CrdtState::Policy(s), UpdateOp::PolicyAssign(p)) => {
                s.entries.retain(|d, _| !observed.contains(d));
                s.entries.insert(dot, p.clone());
            }
            (CrdtState::OrSet(s), UpdateOp::Set { adds, removes }) => {
                for e in removes {
                    if let Some(tags) = s.elements.get_mut(e) {
                        tags.retain(|d| !observed.contains(d));
                        if tags.is_empty() {
                            s.elements.remove(e);
                        }
                    }
                }
                for e in adds {
                    s.elements.entry(e.clone()).or_default().insert(dot);
                }
            }
            (CrdtState::Counter(s), UpdateOp::CounterInc(n)) => {
                s.increments.insert(dot, *n);
            }
            (CrdtState::Flag(s), UpdateOp::FlagSet(enable)) => {
                s.enables.retain(|d| !observed.contains(d));
                if *enable {
                    s.enables.insert(dot);
                }
            }
            (CrdtState::Map(s), UpdateOp::Map { updates, removes }) => {
                s.bindings.retain(|(k, _), nested| {
                    if removes.contains(k) {
                        nested.remove_dots(observed);
                        nested.has_live_dots()
                    } else {
                        true
                    }
                });
                for (k, nested_op) in updates {
                    let id = (k.clone(), nested_op.crdt_type());
                    let nested = s.bindings.entry(id.clone()).or_insert_with(|| CrdtState::empty(id.1));
                    nested.apply_op(nested_op, dot, observed)?;
                    if !nested.has_live_dots() {
                        s.bindings.remove(&id);
                    }
                }
            }
            (state, op) => {
                return Err(CrdtError::TypeMismatch {
                    expected: state.crdt_type(),
                    found: op.crdt_type(),
                })
            }
        }
        Ok(())
    }

    fn remove_dots(&mut self, observed: &BTreeSet<Dot>) {
        match self {
            CrdtState::MvReg(s) => s.entries.retain(|d, _| !observed.contains(d)),
            CrdtState::Policy(s) => s.entries.retain(|d, _| !observed.contains(d)),
            CrdtState::OrSet(s) => s.elements.retain(|_, tags| {
                tags.retain(|d| !observed.contains(d));
                !tags.is_empty()
            }),
            CrdtState::Counter(s) => s.increments.retain(|d, _| !observed.contains(d)),
            CrdtState::Flag(s) => s.enables.retain(|d| !observed.contains(d)),
            CrdtState::Map(s) => s.bindings.retain(|_, nested| {
                nested.remove_dots(observed);
                nested.has_live_dots()
            }),
        }
    }

    fn has_live_dots(&self) -> bool {
        match self {
            CrdtState::MvReg(s) => !s.entries.is_empty(),
            CrdtState::Policy(s) => !s.entries.is_empty(),
            CrdtState::OrSet(s) => !s.elements.is_empty(),
            CrdtState::Counter(s) => !s.increments.is_empty(),
            CrdtState::Flag(s) => !s.enables.is_empty(),
            CrdtState::Map(s) => !s.bindings.is_empty(),
        }
    }

    /// Collects every dot still contributing to the state.
    pub fn live_dots(&self, out: &mut BTreeSet<Dot>) {
        match self {
            CrdtState::MvReg(s) => out.extend(s.entries.keys().copied()),
            CrdtState::Policy(s) => out.extend(s.entries.keys().copied()),
            CrdtState::OrSet(s) => {
                for tags in s.elements.values() {
                    out.extend(tags.iter().copied());
                }
            }
            CrdtState::Counter(s) => out.extend(s.increments.keys().copied()),
            CrdtState::Flag(s) => out.extend(s.enables.iter().copied()),
            CrdtState::Map(s) => {
                for nested in s.bindings.values() {
                    nested.live_dots(out);
                }
            }
        }
    }

    pub fn read(&self) -> ReadResult {
        match self {
            CrdtState::MvReg(s) => ReadResult::Values(s.entries.values().cloned().collect()),
            CrdtState::Policy(s) => ReadResult::Permissions(s.read()),
            CrdtState::OrSet(s) => ReadResult::Set(s.elements.keys().cloned().collect()),
            CrdtState::Map(s) => ReadResult::Map(
                s.bindings
                    .iter()
                    .map(|(id, nested)| (id.clone(), nested.read()))
                    .collect(),
            ),
            CrdtState::Counter(s) => ReadResult::Counter(s.increments.values().sum()),
            CrdtState::Flag(s) => ReadResult::Flag(!s.enables.is_empty()),
        }
    }
}

/// A CRDT state plus the set of dots already applied to it, making
/// re-application of an effect a no-op.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObjectState {
    state: CrdtState,
    applied: BTreeSet<Dot>,
}

impl ObjectState {
    pub fn new(ty: CrdtType) -> Self {
        ObjectState {
            state: CrdtState::empty(ty),
            applied: BTreeSet::new(),
        }
    }

    pub fn state(&self) -> &CrdtState {
        &self.state
    }

    pub fn generate_effect(&self, op: UpdateOp, dot: Dot) -> Result<Effect, CrdtError> {
        self.state.generate_effect(op, dot)
    }

    /// Returns `Ok(false)` when the effect's dot was already applied.
    pub fn apply_effect(&mut self, effect: &Effect) -> Result<bool, CrdtError> {
        if self.applied.contains(&effect.dot) {
            return Ok(false);
        }
        self.state.apply_effect(effect)?;
        self.applied.insert(effect.dot);
        Ok(true)
    }

    pub fn read(&self) -> ReadResult {
        self.state.read()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(r: u32, c: u64) -> Dot {
        Dot::new(r, c)
    }

    fn perms(xs: &[&str]) -> Permissions {
        xs.iter().map(|x| x.as_bytes().to_vec()).collect()
    }

    fn apply_all(ty: CrdtType, effects: &[&Effect]) -> CrdtState {
        let mut s = CrdtState::empty(ty);
        for e in effects {
            s.apply_effect(e).unwrap();
        }
        s
    }

    #[test]
    fn assign_observes_visible_entry() {
        let mut reg = CrdtState::empty(CrdtType::MvReg);
        let e1 = reg.generate_effect(UpdateOp::assign("a"), d(0, 1)).unwrap();
        reg.apply_effect(&e1).unwrap();
        let e2 = reg.generate_effect(UpdateOp::assign("b"), d(0, 2)).unwrap();
        assert_eq!(e2.observed, BTreeSet::from([d(0, 1)]));
        assert_eq!(e2.op, UpdateOp::assign("b"));
    }

    #[test]
    fn policy_assign_on_empty_observes_nothing() {
        let p = CrdtState::empty(CrdtType::Policy);
        let e = p.generate_effect(UpdateOp::policy_assign(["r", "w"]), d(0, 1)).unwrap();
        assert!(e.observed.is_empty());
    }

    #[test]
    fn set_remove_observes_all_tags() {
        let mut s = CrdtState::empty(CrdtType::OrSet);
        let a1 = s.generate_effect(UpdateOp::set_add(["x"]), d(0, 1)).unwrap();
        let a2 = CrdtState::empty(CrdtType::OrSet)
            .generate_effect(UpdateOp::set_add(["x"]), d(1, 1))
            .unwrap();
        s.apply_effect(&a1).unwrap();
        s.apply_effect(&a2).unwrap();
        let r = s.generate_effect(UpdateOp::set_remove(["x"]), d(0, 3)).unwrap();
        assert_eq!(r.observed, BTreeSet::from([d(0, 1), d(1, 1)]));
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let s = CrdtState::empty(CrdtType::OrSet);
        let err = s.generate_effect(UpdateOp::assign("a"), d(0, 1)).unwrap_err();
        assert_eq!(
            err,
            CrdtError::TypeMismatch {
                expected: CrdtType::OrSet,
                found: CrdtType::MvReg
            }
        );
        let mut m = CrdtState::empty(CrdtType::Map);
        let bad = Effect {
            op: UpdateOp::CounterInc(1),
            dot: d(0, 1),
            observed: BTreeSet::new(),
        };
        assert!(m.apply_effect(&bad).is_err());
    }

    #[test]
    fn concurrent_assigns_are_retained_in_either_order() {
        let e1 = Effect {
            op: UpdateOp::assign("a"),
            dot: d(0, 1),
            observed: BTreeSet::new(),
        };
        let e2 = Effect {
            op: UpdateOp::assign("b"),
            dot: d(0, 2),
            observed: BTreeSet::from([d(0, 1)]),
        };
        let e3 = Effect {
            op: UpdateOp::assign("c"),
            dot: d(1, 1),
            observed: BTreeSet::from([d(0, 1)]),
        };
        let s1 = apply_all(CrdtType::MvReg, &[&e1, &e2, &e3]);
        let s2 = apply_all(CrdtType::MvReg, &[&e1, &e3, &e2]);
        assert_eq!(s1, s2);
        let CrdtState::MvReg(reg) = &s1 else { panic!() };
        let entries: Vec<_> = reg.entries().map(|(d, v)| (*d, v.clone())).collect();
        assert_eq!(entries, vec![(d(0, 2), b"b".to_vec()), (d(1, 1), b"c".to_vec())]);
    }

    #[test]
    fn policy_read_intersects_concurrent_sets() {
        let base = Effect {
            op: UpdateOp::policy_assign(["r"]),
            dot: d(0, 1),
            observed: BTreeSet::new(),
        };
        let a = Effect {
            op: UpdateOp::policy_assign(["r", "w"]),
            dot: d(0, 2),
            observed: BTreeSet::from([d(0, 1)]),
        };
        let b = Effect {
            op: UpdateOp::policy_assign(["w", "d"]),
            dot: d(1, 1),
            observed: BTreeSet::from([d(0, 1)]),
        };
        let s = apply_all(CrdtType::Policy, &[&base, &a, &b]);
        let CrdtState::Policy(p) = &s else { panic!() };
        assert_eq!(p.entries().count(), 2);
        assert_eq!(s.read(), ReadResult::Permissions(perms(&["w"])));

        let single = apply_all(CrdtType::Policy, &[&base, &a]);
        assert_eq!(single.read(), ReadResult::Permissions(perms(&["r", "w"])));
    }

    #[test]
    fn disjoint_concurrent_grants_read_empty() {
        let a = Effect {
            op: UpdateOp::policy_assign(["cA"]),
            dot: d(0, 2),
            observed: BTreeSet::new(),
        };
        let b = Effect {
            op: UpdateOp::policy_assign(["cB"]),
            dot: d(1, 3),
            observed: BTreeSet::new(),
        };
        let s = apply_all(CrdtType::Policy, &[&a, &b]);
        assert_eq!(s.read(), ReadResult::Permissions(Permissions::new()));
    }

    #[test]
    fn empty_policy_denies_everything() {
        assert_eq!(
            CrdtState::empty(CrdtType::Policy).read(),
            ReadResult::Permissions(Permissions::new())
        );
    }

    #[test]
    fn map_update_wins_over_concurrent_remove() {
        let mut base = CrdtState::empty(CrdtType::Map);
        let add = base
            .generate_effect(UpdateOp::map_update("k", UpdateOp::set_add(["x"])), d(0, 1))
            .unwrap();
        base.apply_effect(&add).unwrap();
        let rm = base.generate_effect(UpdateOp::map_remove(["k"]), d(0, 2)).unwrap();
        let upd = base
            .generate_effect(UpdateOp::map_update("k", UpdateOp::set_add(["y"])), d(1, 1))
            .unwrap();
        let mut s1 = base.clone();
        s1.apply_effect(&rm).unwrap();
        s1.apply_effect(&upd).unwrap();
        let mut s2 = base.clone();
        s2.apply_effect(&upd).unwrap();
        s2.apply_effect(&rm).unwrap();
        assert_eq!(s1, s2);
        let read = s1.read();
        assert_eq!(read.set_field(b"k"), BTreeSet::from([b"y".to_vec()]));

        // Sequential removal clears the binding.
        let mut s3 = s1.clone();
        let rm2 = s3.generate_effect(UpdateOp::map_remove(["k"]), d(0, 3)).unwrap();
        s3.apply_effect(&rm2).unwrap();
        assert_eq!(s3.read(), ReadResult::Map(BTreeMap::new()));
    }

    #[test]
    fn flag_is_enable_wins() {
        let mut base = CrdtState::empty(CrdtType::Flag);
        let on = base.generate_effect(UpdateOp::FlagSet(true), d(0, 1)).unwrap();
        base.apply_effect(&on).unwrap();
        let off = base.generate_effect(UpdateOp::FlagSet(false), d(0, 2)).unwrap();
        let on_again = base.generate_effect(UpdateOp::FlagSet(true), d(1, 1)).unwrap();
        let mut a = base.clone();
        a.apply_effect(&off).unwrap();
        a.apply_effect(&on_again).unwrap();
        let mut b = base.clone();
        b.apply_effect(&on_again).unwrap();
        b.apply_effect(&off).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.read(), ReadResult::Flag(true));
        base.apply_effect(&off).unwrap();
        assert_eq!(base.read(), ReadResult::Flag(false));
    }

    #[test]
    fn counter_sums_increments() {
        let mut c = CrdtState::empty(CrdtType::Counter);
        for (i, n) in [3, -1, 5].into_iter().enumerate() {
            let e = c.generate_effect(UpdateOp::CounterInc(n), d(0, i as u64 + 1)).unwrap();
            c.apply_effect(&e).unwrap();
        }
        assert_eq!(c.read(), ReadResult::Counter(7));
    }

    #[test]
    fn duplicate_effects_are_ignored() {
        let mut obj = ObjectState::new(CrdtType::OrSet);
        let add = obj.generate_effect(UpdateOp::set_add(["x"]), d(0, 1)).unwrap();
        assert!(obj.apply_effect(&add).unwrap());
        let rm = obj.generate_effect(UpdateOp::set_remove(["x"]), d(0, 2)).unwrap();
        assert!(obj.apply_effect(&rm).unwrap());
        assert!(!obj.apply_effect(&add).unwrap());
        assert_eq!(obj.read(), ReadResult::Set(BTreeSet::new()));
    }

    #[test]
    fn sequential_policy_assigns_read_last_set() {
        let mut p = CrdtState::empty(CrdtType::Policy);
        for (i, set) in [vec!["r"], vec!["r", "w"], vec!["x"]].into_iter().enumerate() {
            let e = p
                .generate_effect(UpdateOp::policy_assign(set.clone()), d(0, i as u64 + 1))
                .unwrap();
            p.apply_effect(&e).unwrap();
            assert_eq!(p.read(), ReadResult::Permissions(perms(&set)));
        }
    }

    fn random_op(ty: CrdtType, rng: &mut impl rand::Rng, v: usize) -> UpdateOp {
        let pick = |rng: &mut dyn rand::RngCore| -> Vec<&'static str> {
            ["x", "y", "z"]
                .into_iter()
                .filter(|_| rng.next_u32().is_multiple_of(2))
                .collect()
        };
        match ty {
            CrdtType::MvReg => UpdateOp::assign(format!("v{v}")),
            CrdtType::Policy => UpdateOp::policy_assign(pick(rng)),
            CrdtType::OrSet => UpdateOp::Set {
                adds: pick(rng).iter().map(|x| x.as_bytes().to_vec()).collect(),
                removes: pick(rng).iter().map(|x| x.as_bytes().to_vec()).collect(),
            },
            _ => {
                let mut updates = BTreeMap::new();
                if rng.gen_bool(0.6) {
                    updates.insert(b"a".to_vec(), random_op(CrdtType::MvReg, rng, v));
                }
                if rng.gen_bool(0.6) {
                    updates.insert(b"b".to_vec(), random_op(CrdtType::OrSet, rng, v));
                }
                let removes = ["a", "b"]
                    .into_iter()
                    .filter(|k| !updates.contains_key(k.as_bytes()) && rng.gen_bool(0.3))
                    .map(|k| k.as_bytes().to_vec())
                    .collect();
                UpdateOp::Map { updates, removes }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn every_causal_order_reaches_the_same_state(seed in proptest::prelude::any::<u64>(), ty_index in 0usize..4) {
            use rand::{Rng, SeedableRng};
            let ty = [CrdtType::MvReg, CrdtType::Policy, CrdtType::OrSet, CrdtType::Map][ty_index];
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut replicas = vec![(ObjectState::new(ty), Vec::<usize>::new()); 3];
            let mut effects: Vec<Effect> = Vec::new();
            let mut past: Vec<Vec<usize>> = Vec::new();
            for step in 0..rng.gen_range(1..16) {
                let r = rng.gen_range(0..3);
                if rng.gen_bool(0.6) {
                    let op = random_op(ty, &mut rng, step);
                    let e = replicas[r].0.generate_effect(op, d(r as u32, step as u64 + 1)).unwrap();
                    replicas[r].0.apply_effect(&e).unwrap();
                    past.push(replicas[r].1.clone());
                    replicas[r].1.push(effects.len());
                    effects.push(e);
                } else {
                    let from = rng.gen_range(0..3);
                    for i in replicas[from].1.clone() {
                        if !replicas[r].1.contains(&i) {
                            replicas[r].0.apply_effect(&effects[i]).unwrap();
                            replicas[r].1.push(i);
                        }
                    }
                }
            }
            let mut in_order = ObjectState::new(ty);
            for e in &effects {
                in_order.apply_effect(e).unwrap();
            }
            let mut shuffled = ObjectState::new(ty);
            let mut done = vec![false; effects.len()];
            for _ in 0..effects.len() {
                let ready: Vec<usize> =
                    (0..effects.len()).filter(|&i| !done[i] && past[i].iter().all(|&p| done[p])).collect();
                let i = ready[rng.gen_range(0..ready.len())];
                shuffled.apply_effect(&effects[i]).unwrap();
                done[i] = true;
            }
            proptest::prop_assert_eq!(&in_order, &shuffled);
            proptest::prop_assert_eq!(merge_equivalence_oracle(ty, &effects).unwrap(), shuffled.read());
        }

        #[test]
        fn concurrent_policies_read_as_intersection(
            base in proptest::collection::btree_set("[a-d]", 0..4),
            sets in proptest::collection::vec(proptest::collection::btree_set("[a-d]", 0..4), 1..4),
        ) {
            let mut root = ObjectState::new(CrdtType::Policy);
            let first = root.generate_effect(UpdateOp::policy_assign(base.iter().cloned()), d(9, 1)).unwrap();
            root.apply_effect(&first).unwrap();
            let concurrent: Vec<Effect> = sets
                .iter()
                .enumerate()
                .map(|(i, p)| root.generate_effect(UpdateOp::policy_assign(p.iter().cloned()), d(i as u32, 1)).unwrap())
                .collect();
            let mut merged = root.clone();
            for e in concurrent.iter().rev() {
                merged.apply_effect(e).unwrap();
            }
            let expected = sets
                .iter()
                .skip(1)
                .fold(sets[0].clone(), |acc, p| acc.intersection(p).cloned().collect::<BTreeSet<_>>());
            proptest::prop_assert_eq!(merged.read(), ReadResult::Permissions(perms(&expected.iter().map(String::as_str).collect::<Vec<_>>())));
        }
    }
}
