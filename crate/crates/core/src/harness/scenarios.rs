use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::acl::{DecisionProcedure, LayerDefinition, SecureCluster, SecurityLayers, UserId};
use crate::crdt::{CrdtType, Permissions, ReadResult, ReplicaId, UpdateOp};
use crate::store::{BoundObject, Cluster, CommitId, Consistency};

use super::HarnessError;

fn consistency_name(mode: Consistency) -> &'static str {
    match mode {
        Consistency::Causal => "causal",
        Consistency::Eventual => "eventual",
    }
}

fn user(id: &str) -> UserId {
    UserId::new(id).expect("scenario ids are non-empty")
}

fn perms(xs: &[&str]) -> Permissions {
    xs.iter().map(|x| x.as_bytes().to_vec()).collect()
}

fn names(p: &Permissions) -> Vec<String> {
    p.iter().map(|t| String::from_utf8_lossy(t).into_owned()).collect()
}

/// Every ordering of `0..n`, lexicographic.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// All schedules, or a seeded sample of `limit` of them.
fn select<T>(mut all: Vec<T>, limit: usize, seed: u64) -> Vec<T> {
    if limit < all.len() {
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        all.truncate(limit);
    }
    all
}

fn deliver(store: &mut SecureCluster, id: CommitId, to: ReplicaId) -> Result<(), HarnessError> {
    let index = store
        .in_flight()
        .iter()
        .position(|m| m.commit.id() == id && m.to == to)
        .expect("message still in flight");
    store.deliver_message(index)?;
    Ok(())
}

/// Objects keyed `<owner>/<name>`: the owner may do anything, others may
/// read with the `read` token on the object.
#[derive(Clone, Copy, Debug, Default)]
pub struct OwnerPolicy;

impl OwnerPolicy {
    fn owns(user: &UserId, object: &BoundObject) -> bool {
        let owner = object.key.split(|b| *b == b'/').next().unwrap_or_default();
        owner == user.as_bytes()
    }
}

impl DecisionProcedure for OwnerPolicy {
    type UserData = ();

    fn decide_read(&self, u: &UserId, o: &BoundObject, _: &(), layers: &SecurityLayers) -> bool {
        Self::owns(u, o) || layers.has("object", "read")
    }

    fn decide_update(&self, u: &UserId, o: &BoundObject, _: &UpdateOp, _: &(), _: &SecurityLayers) -> bool {
        Self::owns(u, o)
    }

    fn decide_policy_read(&self, u: &UserId, o: &BoundObject, target: &UserId, _: &(), _: &SecurityLayers) -> bool {
        Self::owns(u, o) || u == target
    }

    fn decide_policy_assign(
        &self,
        u: &UserId,
        o: &BoundObject,
        _: &UserId,
        _: &Permissions,
        _: &Permissions,
        _: &(),
        _: &SecurityLayers,
    ) -> bool {
        Self::owns(u, o)
    }

    fn requested_policies(&self, _: &UserId, object: &BoundObject) -> LayerDefinition {
        LayerDefinition::new().layer("object", object.clone())
    }
}

/// Holders of `manager` on an object assign its policies; anyone with a
/// token on it may read it.
#[derive(Clone, Copy, Debug, Default)]
pub struct ManagerPolicy;

impl DecisionProcedure for ManagerPolicy {
    type UserData = ();

    fn decide_read(&self, _: &UserId, _: &BoundObject, _: &(), layers: &SecurityLayers) -> bool {
        !layers.union().is_empty()
    }

    fn decide_update(&self, _: &UserId, _: &BoundObject, _: &UpdateOp, _: &(), layers: &SecurityLayers) -> bool {
        layers.has("object", "manager")
    }

    fn decide_policy_read(
        &self,
        u: &UserId,
        _: &BoundObject,
        target: &UserId,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        u == target || layers.has("object", "manager")
    }

    fn decide_policy_assign(
        &self,
        _: &UserId,
        _: &BoundObject,
        _: &UserId,
        _: &Permissions,
        _: &Permissions,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        layers.has("object", "manager")
    }

    fn requested_policies(&self, _: &UserId, object: &BoundObject) -> LayerDefinition {
        LayerDefinition::new().layer("object", object.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AliceBobReport {
    pub kind: &'static str,
    pub mode: &'static str,
    pub seed: u64,
    pub schedules_total: usize,
    pub schedules_explored: usize,
    pub leaking_schedules: usize,
    pub reads_attempted: usize,
    pub reads_denied: usize,
    /// Reads returning the photo uploaded after the revocation.
    pub leaks: usize,
    /// Delivery order of the first leaking schedule.
    pub example_leak: Option<Vec<String>>,
}

/// Alice (replica 0) grants Bob read access to her album, revokes it, then
/// uploads a photo. Bob reads the album at replica 1 before and after every
/// delivery, for every delivery order of the three commits (or a seeded
/// sample of `schedule_count` orders).
pub fn run_alice_bob(mode: Consistency, schedule_count: usize, seed: u64) -> Result<AliceBobReport, HarnessError> {
    const CONFIDENTIAL: &[u8] = b"beach.jpg";
    let (alice, bob) = (user("alice"), user("bob"));
    let album = BoundObject::new("social", "alice/photos", CrdtType::OrSet);
    let (a, b) = (ReplicaId(0), ReplicaId(1));
    let policy = OwnerPolicy;

    let mut base = SecureCluster::new(Cluster::new(2, mode));
    let mut commits = Vec::new();
    let mut stx = base.start(a, alice.clone(), &policy, ())?;
    base.assign_policy(&mut stx, &album, &bob, perms(&["read"]))?;
    base.update(&mut stx, &album, UpdateOp::set_add(["holiday.jpg"]))?;
    commits.push(("grant", base.commit(&mut stx)?.id()));
    let mut stx = base.start(a, alice.clone(), &policy, ())?;
    base.assign_policy(&mut stx, &album, &bob, perms(&[]))?;
    commits.push(("revoke", base.commit(&mut stx)?.id()));
    let mut stx = base.start(a, alice, &policy, ())?;
    base.update(&mut stx, &album, UpdateOp::set_add([CONFIDENTIAL]))?;
    commits.push(("upload", base.commit(&mut stx)?.id()));

    let all = permutations(commits.len());
    let schedules_total = all.len();
    let schedules = select(all, schedule_count, seed);
    let mut report = AliceBobReport {
        kind: "alicebob",
        mode: consistency_name(mode),
        seed,
        schedules_total,
        schedules_explored: schedules.len(),
        leaking_schedules: 0,
        reads_attempted: 0,
        reads_denied: 0,
        leaks: 0,
        example_leak: None,
    };
    for order in &schedules {
        let mut store = base.clone();
        let mut leaked = false;
        for step in 0..=order.len() {
            if step > 0 {
                deliver(&mut store, commits[order[step - 1]].1, b)?;
            }
            let mut stx = store.start(b, bob.clone(), &policy, ())?;
            report.reads_attempted += 1;
            match store.read(&mut stx, &album) {
                Ok(ReadResult::Set(photos)) if photos.contains(CONFIDENTIAL) => {
                    report.leaks += 1;
                    leaked = true;
                }
                Ok(_) => {}
                Err(e) if e.is_denied() => report.reads_denied += 1,
                Err(e) => return Err(e.into()),
            }
            store.abort(&mut stx)?;
        }
        if leaked {
            report.leaking_schedules += 1;
            if report.example_leak.is_none() {
                report.example_leak = Some(order.iter().map(|&i| commits[i].0.to_string()).collect());
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CharlyReport {
    pub kind: &'static str,
    pub seed: u64,
    pub schedules: usize,
    /// Charly's permissions at each replica after concurrent grants converge.
    pub concurrent_final: Vec<Vec<String>>,
    /// The same after the second grant observed the first.
    pub sequential_final: Vec<Vec<String>>,
    pub states_observed: usize,
    pub both_granted_ever: bool,
    pub replicas_agree: bool,
}

/// Two managers on different replicas grant Charly consultant roles for
/// competing companies on one shared object, concurrently and sequentially.
/// Charly's permissions are read at every replica after every delivery.
pub fn run_charly(seed: u64) -> Result<CharlyReport, HarnessError> {
    let object = BoundObject::new("firm", "consultancy/portfolio", CrdtType::Map);
    let charly = user("charly");
    let managers = [
        (ReplicaId(0), user("manager-a"), "consultant-A"),
        (ReplicaId(1), user("manager-b"), "consultant-B"),
    ];
    let policy = ManagerPolicy;
    let conflict = perms(&["consultant-A", "consultant-B"]);

    let fresh = || -> Result<SecureCluster, HarnessError> {
        let mut store = SecureCluster::new(Cluster::new(2, Consistency::Causal));
        for (_, m, _) in &managers {
            store.bootstrap_policy(ReplicaId(0), &object, m, perms(&["manager"]))?;
        }
        store.flush()?;
        Ok(store)
    };
    let observe = |store: &mut SecureCluster, seen: &mut Vec<Permissions>| -> Result<Vec<Permissions>, HarnessError> {
        let mut at = Vec::new();
        for r in [ReplicaId(0), ReplicaId(1)] {
            let mut stx = store.start(r, charly.clone(), &policy, ())?;
            let p = store.read_policy(&mut stx, &object, &charly)?;
            store.abort(&mut stx)?;
            seen.push(p.clone());
            at.push(p);
        }
        Ok(at)
    };

    let mut seen = Vec::new();
    let mut concurrent_final = Vec::new();
    let mut schedules = 0;
    let mut base = fresh()?;
    let mut ids = Vec::new();
    for (r, m, role) in &managers {
        let mut stx = base.start(*r, m.clone(), &policy, ())?;
        base.assign_policy(&mut stx, &object, &charly, perms(&[role]))?;
        ids.push((base.commit(&mut stx)?.id(), ReplicaId(1 - r.0)));
    }
    for order in permutations(ids.len()) {
        schedules += 1;
        let mut store = base.clone();
        observe(&mut store, &mut seen)?;
        for i in order {
            deliver(&mut store, ids[i].0, ids[i].1)?;
            concurrent_final = observe(&mut store, &mut seen)?;
        }
    }

    let mut store = fresh()?;
    let mut sequential_final = Vec::new();
    for (r, m, role) in &managers {
        let mut stx = store.start(*r, m.clone(), &policy, ())?;
        store.assign_policy(&mut stx, &object, &charly, perms(&[role]))?;
        store.commit(&mut stx)?;
        observe(&mut store, &mut seen)?;
        store.flush()?;
        sequential_final = observe(&mut store, &mut seen)?;
    }

    let both_granted_ever = seen.iter().any(|p| conflict.is_subset(p));
    let replicas_agree =
        concurrent_final.windows(2).all(|w| w[0] == w[1]) && sequential_final.windows(2).all(|w| w[0] == w[1]);
    Ok(CharlyReport {
        kind: "charly",
        seed,
        schedules,
        concurrent_final: concurrent_final.iter().map(names).collect(),
        sequential_final: sequential_final.iter().map(names).collect(),
        states_observed: seen.len(),
        both_granted_ever,
        replicas_agree,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AtomicityReport {
    pub kind: &'static str,
    pub mode: &'static str,
    pub schedules: usize,
    pub reads_checked: usize,
    /// Reads where the two objects disagree on which commits they contain.
    pub partial_observations: usize,
    /// Transactions whose second read saw a delivery made after their first.
    pub snapshot_violations: usize,
}

/// Three replicas each commit one transaction writing the same tag to
/// registers `x` and `y`. For every delivery order of the six messages, every
/// replica is read before and after each delivery; an open transaction
/// reads `x`, sees one more delivery, then reads `y` and `x` again.
pub fn check_atomic_visibility(mode: Consistency) -> Result<AtomicityReport, HarnessError> {
    let x = BoundObject::new("atom", "x", CrdtType::MvReg);
    let y = BoundObject::new("atom", "y", CrdtType::MvReg);
    let replicas: Vec<ReplicaId> = (0..3).map(ReplicaId).collect();
    let mut base = Cluster::new(3, mode);
    for r in &replicas {
        let mut tx = base.begin(*r)?;
        let tag = format!("t{}", r.0);
        base.update(&mut tx, &x, UpdateOp::assign(tag.as_str()))?;
        base.update(&mut tx, &y, UpdateOp::assign(tag.as_str()))?;
        base.commit(&mut tx)?;
    }
    let messages: Vec<(CommitId, ReplicaId)> = base.in_flight().iter().map(|m| (m.commit.id(), m.to)).collect();
    let mut report = AtomicityReport {
        kind: "atomicity",
        mode: consistency_name(mode),
        schedules: 0,
        reads_checked: 0,
        partial_observations: 0,
        snapshot_violations: 0,
    };
    let values = |r: ReadResult| -> BTreeSet<Vec<u8>> {
        match r {
            ReadResult::Values(v) => v,
            other => unreachable!("register read as {other:?}"),
        }
    };
    for order in permutations(messages.len()) {
        report.schedules += 1;
        let mut store = base.clone();
        for step in 0..=order.len() {
            let mut open = Vec::new();
            for r in &replicas {
                let mut tx = store.begin(*r)?;
                let (vx, vy) = (values(store.read(&mut tx, &x)?), values(store.read(&mut tx, &y)?));
                report.reads_checked += 1;
                if vx != vy {
                    report.partial_observations += 1;
                }
                open.push((tx, vx));
            }
            if step == order.len() {
                break;
            }
            let (id, to) = messages[order[step]];
            let index = store
                .in_flight()
                .iter()
                .position(|m| m.commit.id() == id && m.to == to)
                .expect("message in flight");
            store.deliver_message(index)?;
            for (mut tx, before) in open {
                let vy = values(store.read(&mut tx, &y)?);
                let vx = values(store.read(&mut tx, &x)?);
                report.reads_checked += 1;
                if vy != before || vx != before {
                    report.snapshot_violations += 1;
                }
                store.abort(&mut tx)?;
            }
        }
    }
    Ok(report)
}
