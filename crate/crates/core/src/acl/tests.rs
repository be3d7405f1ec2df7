use std::cell::RefCell;

use super::*;
use crate::crdt::CrdtType;
use crate::store::Consistency;

const R0: ReplicaId = ReplicaId(0);
const R1: ReplicaId = ReplicaId(1);

fn user(id: &str) -> UserId {
    UserId::new(id).unwrap()
}

fn perms(xs: &[&str]) -> Permissions {
    xs.iter().map(|x| x.as_bytes().to_vec()).collect()
}

fn doc(key: &str) -> BoundObject {
    BoundObject::new("app", key, CrdtType::OrSet)
}

fn folder() -> BoundObject {
    BoundObject::new("app", "folder", CrdtType::Map)
}

/// Layers: the object itself and a shared `folder` parent. Reads need `r`,
/// updates need `w`, policy operations need `admin` anywhere. Records every
/// call for inspection.
#[derive(Default)]
struct Recording {
    users: RefCell<Vec<UserId>>,
    old_permissions: RefCell<Vec<Permissions>>,
    layers: RefCell<Vec<SecurityLayers>>,
}

impl DecisionProcedure for Recording {
    type UserData = u32;

    fn decide_read(&self, u: &UserId, _: &BoundObject, _: &u32, layers: &SecurityLayers) -> bool {
        self.users.borrow_mut().push(u.clone());
        self.layers.borrow_mut().push(layers.clone());
        layers.union().contains(b"r".as_slice())
    }

    fn decide_update(&self, u: &UserId, _: &BoundObject, _: &UpdateOp, _: &u32, layers: &SecurityLayers) -> bool {
        self.users.borrow_mut().push(u.clone());
        layers.union().contains(b"w".as_slice())
    }

    fn decide_policy_read(
        &self,
        u: &UserId,
        _: &BoundObject,
        target: &UserId,
        _: &u32,
        layers: &SecurityLayers,
    ) -> bool {
        u == target || layers.union().contains(b"admin".as_slice())
    }

    fn decide_policy_assign(
        &self,
        _: &UserId,
        _: &BoundObject,
        _: &UserId,
        _: &Permissions,
        old: &Permissions,
        _: &u32,
        layers: &SecurityLayers,
    ) -> bool {
        self.old_permissions.borrow_mut().push(old.clone());
        layers.union().contains(b"admin".as_slice())
    }

    fn requested_policies(&self, _: &UserId, object: &BoundObject) -> LayerDefinition {
        LayerDefinition::new()
            .layer("object", object.clone())
            .layer_with_value("folder", folder())
    }
}

fn bootstrapped(mode: Consistency) -> SecureCluster {
    let mut sc = SecureCluster::new(Cluster::new(2, mode));
    sc.bootstrap_policy(R0, &folder(), &user("root"), perms(&["admin", "r", "w"]))
        .unwrap();
    sc.flush().unwrap();
    sc
}

fn grant(sc: &mut SecureCluster, p: &Recording, at: ReplicaId, object: &BoundObject, who: &str, set: &[&str]) {
    let mut stx = sc.start(at, user("root"), p, 0).unwrap();
    sc.assign_policy(&mut stx, object, &user(who), perms(set)).unwrap();
    sc.commit(&mut stx).unwrap();
}

#[test]
fn decisions_see_the_acting_user() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    let mut stx = sc.start(R0, user("alice"), &p, 7).unwrap();
    assert_eq!(*stx.user_data(), 7);
    let _ = sc.read(&mut stx, &doc("d"));
    assert_eq!(p.users.borrow().as_slice(), &[user("alice")]);
}

#[test]
fn transactions_share_snapshot_without_commits() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    let a = sc.start(R0, user("a"), &p, 0).unwrap();
    let b = sc.start(R0, user("b"), &p, 0).unwrap();
    assert_eq!(a.inner().snapshot_clock(), b.inner().snapshot_clock());
}

#[test]
fn new_policy_visible_in_later_layers() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    grant(&mut sc, &p, R0, &doc("d"), "alice", &["r"]);
    let mut stx = sc.start(R0, user("alice"), &p, 0).unwrap();
    let layers = sc
        .resolve_layers(&mut stx, &p.requested_policies(&user("alice"), &doc("d")))
        .unwrap();
    assert_eq!(layers.permissions("object"), &perms(&["r"]));
    assert!(layers.permissions("folder").is_empty());
    assert_eq!(layers.value("folder"), Some(&ReadResult::empty(CrdtType::Map)));
    assert_eq!(layers.value("object"), None);
}

#[test]
fn allow_all_passes_through_and_deny_all_reads_nothing() {
    let mut sc = SecureCluster::new(Cluster::new(1, Consistency::Causal));
    let mut stx = sc.start(R0, user("u"), &AllowAll, ()).unwrap();
    sc.update(&mut stx, &doc("d"), UpdateOp::set_add(["x"])).unwrap();
    assert_eq!(
        sc.read(&mut stx, &doc("d")).unwrap(),
        ReadResult::Set([b"x".to_vec()].into())
    );
    sc.commit(&mut stx).unwrap();

    let mut stx = sc.start(R0, user("u"), &DenyAll, ()).unwrap();
    let err = sc.read(&mut stx, &doc("d")).unwrap_err();
    assert!(err.is_denied());
    assert_eq!(stx.inner().reads(), 0);
    assert!(sc
        .update(&mut stx, &doc("d"), UpdateOp::set_add(["y"]))
        .unwrap_err()
        .is_denied());
    assert_eq!(stx.inner().updates(), 0);
}

#[test]
fn denial_keeps_transaction_usable() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    grant(&mut sc, &p, R0, &doc("open"), "bob", &["r", "w"]);
    let mut stx = sc.start(R0, user("bob"), &p, 0).unwrap();
    assert!(sc
        .update(&mut stx, &doc("secret"), UpdateOp::set_add(["x"]))
        .unwrap_err()
        .is_denied());
    sc.update(&mut stx, &doc("open"), UpdateOp::set_add(["y"])).unwrap();
    let commit = sc.commit(&mut stx).unwrap();
    assert_eq!(commit.effects.len(), 1);
    assert_eq!(
        sc.read(&mut stx, &doc("open")).unwrap_err(),
        AclError::Store(StoreError::TransactionClosed)
    );
}

#[test]
fn read_policy_semantics() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    let mut stx = sc.start(R0, user("root"), &p, 0).unwrap();
    assert!(sc.read_policy(&mut stx, &doc("d"), &user("bob")).unwrap().is_empty());

    grant(&mut sc, &p, R0, &doc("d"), "bob", &["r"]);
    grant(&mut sc, &p, R0, &doc("d"), "bob", &["r", "w"]);
    let mut stx = sc.start(R0, user("root"), &p, 0).unwrap();
    assert_eq!(
        sc.read_policy(&mut stx, &doc("d"), &user("bob")).unwrap(),
        perms(&["r", "w"])
    );
    sc.flush().unwrap();

    // Concurrent reassignments at both replicas.
    grant(&mut sc, &p, R0, &doc("d"), "bob", &["r", "w"]);
    grant(&mut sc, &p, R1, &doc("d"), "bob", &["w"]);
    sc.flush().unwrap();
    for r in [R0, R1] {
        let mut stx = sc.start(r, user("bob"), &p, 0).unwrap();
        assert_eq!(
            sc.read_policy(&mut stx, &doc("d"), &user("bob")).unwrap(),
            perms(&["w"])
        );
        assert!(sc
            .read_policy(&mut stx, &doc("d"), &user("carol"))
            .unwrap_err()
            .is_denied());
    }
}

#[test]
fn assign_sees_intersection_of_concurrent_grants_as_old() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    grant(&mut sc, &p, R0, &doc("d"), "bob", &["r", "w", "x"]);
    grant(&mut sc, &p, R1, &doc("d"), "bob", &["w", "x", "y"]);
    sc.flush().unwrap();
    p.old_permissions.borrow_mut().clear();
    grant(&mut sc, &p, R0, &doc("d"), "bob", &["r"]);
    assert_eq!(p.old_permissions.borrow().as_slice(), &[perms(&["w", "x"])]);
}

#[test]
fn unprivileged_self_grant_is_denied() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    let mut stx = sc.start(R0, user("mallory"), &p, 0).unwrap();
    let err = sc
        .assign_policy(&mut stx, &doc("d"), &user("mallory"), perms(&["r", "w", "admin"]))
        .unwrap_err();
    assert!(err.is_denied());
    assert_eq!(stx.inner().updates(), 0);
}

#[test]
fn grant_and_data_commit_atomically() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    let mut stx = sc.start(R0, user("root"), &p, 0).unwrap();
    sc.assign_policy(&mut stx, &doc("d"), &user("bob"), perms(&["r"]))
        .unwrap();
    sc.update(&mut stx, &doc("d"), UpdateOp::set_add(["x"])).unwrap();
    let commit = sc.commit(&mut stx).unwrap();
    let buckets: Vec<_> = commit.effects.iter().map(|(o, _)| o.bucket.clone()).collect();
    assert_eq!(buckets, vec![b"acl$app".to_vec(), b"app".to_vec()]);
    let r1 = sc.cluster().replica(R1).unwrap();
    assert!(r1.read_current(&doc("d")).is_empty());
    sc.flush().unwrap();
    let r1 = sc.cluster().replica(R1).unwrap();
    assert!(!r1.read_current(&doc("d")).is_empty());
    assert!(!r1.read_current(&policy_storage_key(&doc("d"), &user("bob"))).is_empty());
}

#[test]
fn layers_union_and_values() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    grant(&mut sc, &p, R0, &folder(), "bob", &["r"]);
    grant(&mut sc, &p, R0, &doc("d"), "bob", &["w"]);
    let mut stx = sc.start(R0, user("root"), &p, 0).unwrap();
    sc.update(
        &mut stx,
        &folder(),
        UpdateOp::map_update("open", UpdateOp::FlagSet(true)),
    )
    .unwrap();
    sc.commit(&mut stx).unwrap();

    let mut stx = sc.start(R0, user("bob"), &p, 0).unwrap();
    assert!(sc.resolve_layers(&mut stx, &LayerDefinition::new()).unwrap().is_empty());
    sc.read(&mut stx, &doc("d")).unwrap();
    let layers = p.layers.borrow().last().cloned().unwrap();
    assert_eq!(layers.union(), perms(&["r", "w"]));
    assert!(layers.value("folder").unwrap().flag_field(b"open"));

    let dup = LayerDefinition::new().layer("x", doc("a")).layer("x", doc("b"));
    assert_eq!(
        sc.resolve_layers(&mut stx, &dup).unwrap_err(),
        AclError::DuplicateLayer("x".into())
    );
}

#[test]
fn mediation_counters_balance() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    grant(&mut sc, &p, R0, &doc("a"), "bob", &["r", "w"]);
    let mut stx = sc.start(R0, user("bob"), &p, 0).unwrap();
    sc.read(&mut stx, &doc("a")).unwrap();
    sc.update(&mut stx, &doc("a"), UpdateOp::set_add(["x"])).unwrap();
    let _ = sc.read(&mut stx, &doc("b"));
    let _ = sc.update(&mut stx, &doc("b"), UpdateOp::set_add(["x"]));
    sc.read_policy(&mut stx, &doc("a"), &user("bob")).unwrap();
    let _ = sc.assign_policy(&mut stx, &doc("a"), &user("bob"), perms(&["r"]));
    let c = *stx.counters();
    assert_eq!(c.decisions, 6);
    assert_eq!(c.denied, 3);
    assert_eq!(c.allowed, c.app_ops());
    assert_eq!(c.data_reads + c.data_updates, 2);
    assert_eq!(stx.inner().reads(), c.data_reads + c.policy_reads + c.decision_reads);
    assert_eq!(stx.inner().updates(), c.data_updates + c.policy_assigns);
    // Each decision resolves two layers (policy reads) plus the folder value;
    // the assignment also reads the old policy.
    assert_eq!(c.decision_reads, 6 * 3 + 1);
}

#[test]
fn bootstrap_closes_after_first_secured_transaction() {
    let mut sc = SecureCluster::new(Cluster::new(1, Consistency::Causal));
    let _stx = sc.start(R0, user("u"), &AllowAll, ()).unwrap();
    assert_eq!(
        sc.bootstrap_policy(R0, &folder(), &user("u"), perms(&["admin"])),
        Err(AclError::BootstrapClosed)
    );
}

#[test]
fn policy_buckets_are_unreachable_as_data() {
    let mut sc = SecureCluster::new(Cluster::new(1, Consistency::Causal));
    let mut stx = sc.start(R0, user("u"), &AllowAll, ()).unwrap();
    let forged = policy_storage_key(&doc("d"), &user("u"));
    assert!(matches!(sc.read(&mut stx, &forged), Err(AclError::ReservedBucket(_))));
    let data_policy = BoundObject::new("app", "p", CrdtType::Policy);
    assert!(matches!(
        sc.update(&mut stx, &data_policy, UpdateOp::policy_assign(["r"])),
        Err(AclError::PolicyTypedData(_))
    ));
    assert!(matches!(
        sc.update(&mut stx, &doc("d"), UpdateOp::assign("v")),
        Err(AclError::Store(StoreError::TypeMismatch { .. }))
    ));
    assert_eq!(stx.counters().decisions, 0);
    assert!(UserId::new("").is_err());
}

#[test]
fn remote_commit_after_start_does_not_change_decision() {
    let p = Recording::default();
    let mut sc = bootstrapped(Consistency::Causal);
    grant(&mut sc, &p, R1, &doc("d"), "bob", &["r"]);
    sc.flush().unwrap();

    let mut stx = sc.start(R0, user("bob"), &p, 0).unwrap();
    // Revocation lands at r0 after bob's snapshot was taken.
    grant(&mut sc, &p, R1, &doc("d"), "bob", &[]);
    sc.flush().unwrap();
    assert!(sc.read(&mut stx, &doc("d")).is_ok());

    let mut later = sc.start(R0, user("bob"), &p, 0).unwrap();
    assert!(sc.read(&mut later, &doc("d")).unwrap_err().is_denied());
}
