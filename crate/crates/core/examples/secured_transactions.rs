//! A custom decision procedure over two security layers, and policy and
//! data changes committed together.

use causal_ac::acl::{DecisionProcedure, LayerDefinition, SecureCluster, SecurityLayers, UserId};
use causal_ac::crdt::{CrdtType, Permissions, ReadResult, ReplicaId, UpdateOp};
use causal_ac::store::{BoundObject, Cluster, Consistency};

/// Documents live in folders; a token on either grants it.
struct Folders;

fn folder_of(doc: &BoundObject) -> BoundObject {
    let key = String::from_utf8_lossy(&doc.key);
    let folder = key.split('/').next().unwrap_or_default();
    BoundObject::new("folders", folder, CrdtType::Map)
}

impl DecisionProcedure for Folders {
    type UserData = ();

    fn decide_read(&self, _: &UserId, _: &BoundObject, _: &(), layers: &SecurityLayers) -> bool {
        layers.union().contains(b"read".as_slice())
    }

    fn decide_update(&self, _: &UserId, _: &BoundObject, _: &UpdateOp, _: &(), layers: &SecurityLayers) -> bool {
        layers.union().contains(b"write".as_slice())
    }

    fn decide_policy_read(
        &self,
        user: &UserId,
        _: &BoundObject,
        target: &UserId,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        user == target || layers.has("folder", "owner")
    }

    fn decide_policy_assign(
        &self,
        _: &UserId,
        _: &BoundObject,
        _: &UserId,
        new: &Permissions,
        _: &Permissions,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        // Owners hand out anything but ownership.
        layers.has("folder", "owner") && !new.contains(b"owner".as_slice())
    }

    fn requested_policies(&self, _: &UserId, object: &BoundObject) -> LayerDefinition {
        LayerDefinition::new()
            .layer("folder", folder_of(object))
            .layer("document", object.clone())
    }
}

fn text<T: std::fmt::Debug, E: std::fmt::Display>(r: Result<T, E>) -> String {
    match r {
        Ok(v) => format!("ok {v:?}"),
        Err(e) => format!("error: {e}"),
    }
}

fn names(p: &Permissions) -> Vec<String> {
    p.iter().map(|t| String::from_utf8_lossy(t).into_owned()).collect()
}

fn perms(xs: &[&str]) -> Permissions {
    xs.iter().map(|x| x.as_bytes().to_vec()).collect()
}

fn main() {
    let r0 = ReplicaId(0);
    let mut store = SecureCluster::new(Cluster::new(1, Consistency::Causal));
    let (ann, ben) = (UserId::new("ann").unwrap(), UserId::new("ben").unwrap());
    let plan = BoundObject::new("docs", "project/plan", CrdtType::MvReg);
    let folder = folder_of(&plan);
    store
        .bootstrap_policy(r0, &folder, &ann, perms(&["owner", "read", "write"]))
        .unwrap();

    let procedure = Folders;
    let mut tx = store.start(r0, ann.clone(), &procedure, ()).unwrap();
    store.update(&mut tx, &plan, UpdateOp::assign("draft 1")).unwrap();
    store.assign_policy(&mut tx, &plan, &ben, perms(&["read"])).unwrap();
    let denied = store.assign_policy(&mut tx, &folder, &ben, perms(&["owner"]));
    println!("ann makes ben an owner: {}", text(denied));
    store.commit(&mut tx).unwrap();

    let mut tx = store.start(r0, ben.clone(), &procedure, ()).unwrap();
    match store.read(&mut tx, &plan) {
        Ok(ReadResult::Values(vs)) => println!("ben reads the plan: {:?}", names(&vs)),
        other => println!("ben reads the plan: {}", text(other)),
    }
    println!(
        "ben edits the plan: {}",
        text(store.update(&mut tx, &plan, UpdateOp::assign("mine")))
    );
    match store.read_policy(&mut tx, &plan, &ben) {
        Ok(p) => println!("ben's own policy: {:?}", names(&p)),
        Err(e) => println!("ben's own policy: {e}"),
    }
    println!("ann's policy: {}", text(store.read_policy(&mut tx, &folder, &ann)));
    println!("ben's counters: {:?}", tx.counters());
    store.abort(&mut tx).unwrap();

    println!("store-wide counters: {:?}", store.counters());
}
