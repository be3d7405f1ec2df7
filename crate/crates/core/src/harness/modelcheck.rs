use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;

use crate::acl::{policy_storage_key, SecureCluster, UserId};
use crate::crdt::{CrdtType, ReadResult, ReplicaId, UpdateOp};
use crate::store::{BoundObject, Cluster, CommitId, Consistency, TransactionCommit};

use super::scenarios::OwnerPolicy;
use super::HarnessError;

pub const MAX_HISTORY: usize = 5;
pub const MAX_REPLICAS: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommitKind {
    /// The owner gives the reader the `read` token.
    Grant,
    /// The owner assigns the reader the empty set.
    Revoke,
    /// The owner adds a fresh value to the document.
    Write,
}

const KINDS: [CommitKind; 3] = [CommitKind::Grant, CommitKind::Revoke, CommitKind::Write];

impl CommitKind {
    fn is_policy(self) -> bool {
        !matches!(self, CommitKind::Write)
    }

    fn name(self) -> &'static str {
        match self {
            CommitKind::Grant => "grant",
            CommitKind::Revoke => "revoke",
            CommitKind::Write => "write",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Commits in issue order, e.g. `c1 grant@r0`.
    pub history: Vec<String>,
    /// Issues and deliveries leading to the violating state.
    pub trace: Vec<String>,
    pub replica: String,
    pub write: String,
    /// Policy commits the write depended on that the replica lacks.
    pub missing: Vec<String>,
    /// The reader's secured read returned the protected value.
    pub leaked: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModelCheckReport {
    pub kind: &'static str,
    pub mode: &'static str,
    pub history_size: usize,
    pub replicas: u32,
    pub histories: u64,
    /// Distinct issue points: commits issued so far, what each replica had
    /// received when it issued, and what each commit saw.
    pub executions: u64,
    /// Distinct replica states checked at those points.
    pub states: u64,
    /// Replica states holding a write without a policy commit the write
    /// causally followed.
    pub violations: u64,
    /// Violating states where the reader's secured read returned a write
    /// issued while the reader had no access, and would not have once the
    /// replica caught up with the write's dependencies.
    pub leaks: u64,
    /// Enumeration stopped at the first leak.
    pub stopped_early: bool,
    pub counterexample: Option<Counterexample>,
}

struct History {
    kinds: Vec<CommitKind>,
    origins: Vec<u32>,
}

impl History {
    fn label(&self, i: usize) -> String {
        format!("c{} {}@r{}", i + 1, self.kinds[i].name(), self.origins[i])
    }
}

#[derive(Clone)]
struct Node {
    store: SecureCluster,
    commits: Vec<Arc<TransactionCommit>>,
    /// Commits applied at the origin of commit `i` when it was issued.
    visible: Vec<u8>,
    /// Write `i` was issued while the reader had no access there.
    confidential: Vec<bool>,
    /// Commits handed to each replica, applied or buffered.
    arrived: Vec<u8>,
}

impl Node {
    fn issued(&self) -> usize {
        self.commits.len()
    }

    fn issued_mask(&self) -> u8 {
        ((1u16 << self.issued()) - 1) as u8
    }

    fn key(&self) -> u128 {
        let mut k = self.issued() as u128;
        for m in self.arrived.iter().chain(&self.visible) {
            k = (k << 8) | *m as u128;
        }
        k
    }

    fn deliver(&mut self, to: ReplicaId, mask: u8) -> Result<(), HarnessError> {
        for j in bits(mask) {
            self.store.deliver(to, &self.commits[j])?;
        }
        self.arrived[to.0 as usize] |= mask;
        Ok(())
    }
}

fn bits(mask: u8) -> impl Iterator<Item = usize> {
    (0..8).filter(move |j| mask & (1 << j) != 0)
}

/// Every subset of `mask`, the empty one first.
fn subsets(mask: u8) -> impl Iterator<Item = u8> {
    let mut next = Some(0u8);
    std::iter::from_fn(move || {
        let s = next?;
        next = (s != mask).then(|| (s.wrapping_sub(mask)) & mask);
        Some(s)
    })
}

fn mask_of(commits: &[Arc<TransactionCommit>], applied: impl Fn(CommitId) -> bool) -> u8 {
    commits
        .iter()
        .enumerate()
        .filter(|(_, c)| applied(c.id()))
        .fold(0, |m, (j, _)| m | 1 << j)
}

/// `mask` plus everything its commits saw, transitively.
fn closure(visible: &[u8], mask: u8) -> u8 {
    let mut closed = mask;
    loop {
        let next = bits(closed).fold(closed, |m, j| m | visible[j]);
        if next == closed {
            return closed;
        }
        closed = next;
    }
}

struct Checker<'a> {
    history: &'a History,
    replicas: u32,
    stop_at_leak: bool,
    stopped: bool,
    executions: HashSet<u128>,
    checked: HashSet<u128>,
    violations: u64,
    leaks: u64,
    counterexample: Option<Counterexample>,
    trace: Vec<String>,
    owner: UserId,
    reader: UserId,
    document: BoundObject,
}

fn value(i: usize) -> Vec<u8> {
    format!("v{}", i + 1).into_bytes()
}

impl Checker<'_> {
    fn applied_mask(&self, node: &Node, r: ReplicaId) -> u8 {
        let replica = node.store.cluster().replica(r).expect("replica exists");
        mask_of(&node.commits, |id| replica.has_applied(id))
    }

    fn reader_has_access(&self, node: &Node, r: ReplicaId) -> bool {
        let key = policy_storage_key(&self.document, &self.reader);
        match node
            .store
            .cluster()
            .replica(r)
            .expect("replica exists")
            .read_current(&key)
        {
            ReadResult::Permissions(p) => p.contains(b"read".as_slice()),
            _ => false,
        }
    }

    fn issue(&self, node: &mut Node) -> Result<(), HarnessError> {
        let i = node.issued();
        let origin = ReplicaId(self.history.origins[i]);
        node.visible[i] = self.applied_mask(node, origin);
        node.confidential[i] = !self.reader_has_access(node, origin);
        let policy = OwnerPolicy;
        let mut stx = node.store.start(origin, self.owner.clone(), &policy, ())?;
        match self.history.kinds[i] {
            CommitKind::Grant => {
                node.store
                    .assign_policy(&mut stx, &self.document, &self.reader, [b"read".to_vec()].into())?
            }
            CommitKind::Revoke => {
                node.store
                    .assign_policy(&mut stx, &self.document, &self.reader, Default::default())?
            }
            CommitKind::Write => node
                .store
                .update(&mut stx, &self.document, UpdateOp::set_add([value(i)]))?,
        }
        let commit = node.store.commit(&mut stx)?;
        node.commits.push(commit);
        node.arrived[origin.0 as usize] |= 1 << i;
        Ok(())
    }

    /// Checks every state replica `r` can reach before the next issue: any
    /// further subset of the issued commits may arrive. Returns true to stop.
    fn check_replica(&mut self, node: &Node, r: ReplicaId) -> Result<bool, HarnessError> {
        let base = node.arrived[r.0 as usize];
        for extra in subsets(node.issued_mask() & !base) {
            let arrived = base | extra;
            // The replica's state depends only on what arrived and on what
            // those commits and their dependencies saw.
            let relevant = closure(&node.visible, arrived);
            let mut key = (r.0 as u128) << 8 | arrived as u128;
            for j in bits(relevant) {
                key = (key << 8) | node.visible[j] as u128;
            }
            key = (key << 8) | relevant as u128;
            if !self.checked.insert(key) {
                continue;
            }
            if self.check_state(node, r, extra)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn check_state(&mut self, node: &Node, r: ReplicaId, extra: u8) -> Result<bool, HarnessError> {
        let mut replica = node.store.cluster().replica(r)?.clone();
        let mode = node.store.cluster().mode();
        for j in bits(extra) {
            replica.receive(&node.commits[j], mode);
        }
        let applied = mask_of(&node.commits, |id| replica.has_applied(id));
        // Only a violation needs the secured read path and a full copy.
        let mut full: Option<Node> = None;
        let mut violating = false;
        let mut leaking = false;
        for w in bits(applied).filter(|&w| self.history.kinds[w] == CommitKind::Write) {
            let protecting = bits(node.visible[w])
                .filter(|&p| self.history.kinds[p].is_policy())
                .fold(0u8, |m, p| m | 1 << p);
            let missing = protecting & !applied;
            if missing == 0 {
                continue;
            }
            violating = true;
            let leaked = node.confidential[w] && {
                let state = match &mut full {
                    Some(state) => state,
                    None => {
                        let mut state = node.clone();
                        state.deliver(r, extra)?;
                        full.insert(state)
                    }
                };
                self.stale_policy_leaks(state, r, w, applied)?
            };
            leaking |= leaked;
            let better = match &self.counterexample {
                None => true,
                Some(c) => leaked && !c.leaked,
            };
            if better {
                let mut trace = self.trace.clone();
                trace.extend(bits(extra).map(|j| format!("deliver c{} to {r}", j + 1)));
                self.counterexample = Some(Counterexample {
                    history: (0..self.history.kinds.len()).map(|i| self.history.label(i)).collect(),
                    trace,
                    replica: r.to_string(),
                    write: self.history.label(w),
                    missing: bits(missing).map(|p| self.history.label(p)).collect(),
                    leaked,
                });
            }
        }
        self.violations += violating as u64;
        self.leaks += leaking as u64;
        Ok(leaking && self.stop_at_leak)
    }

    /// The reader sees write `w` at `r` but would not on a replica that
    /// applied the same commits and their dependencies in causal order.
    fn stale_policy_leaks(&self, node: &mut Node, r: ReplicaId, w: usize, applied: u8) -> Result<bool, HarnessError> {
        if !self.reader_sees(node, r, w)? {
            return Ok(false);
        }
        let reference = ReplicaId(self.replicas);
        let mut caught_up = Node {
            store: SecureCluster::new(Cluster::new(self.replicas + 1, Consistency::Causal)),
            commits: node.commits.clone(),
            visible: node.visible.clone(),
            confidential: node.confidential.clone(),
            arrived: vec![0; self.replicas as usize + 1],
        };
        caught_up.deliver(reference, closure(&node.visible, applied))?;
        Ok(!self.reader_sees(&mut caught_up, reference, w)?)
    }

    fn reader_sees(&self, node: &mut Node, r: ReplicaId, w: usize) -> Result<bool, HarnessError> {
        let policy = OwnerPolicy;
        let mut stx = node.store.start(r, self.reader.clone(), &policy, ())?;
        let seen = match node.store.read(&mut stx, &self.document) {
            Ok(ReadResult::Set(values)) => values.contains(&value(w)),
            Ok(_) => false,
            Err(e) if e.is_denied() => false,
            Err(e) => return Err(e.into()),
        };
        node.store.abort(&mut stx)?;
        Ok(seen)
    }

    /// Replica states only change by arrivals, and what a replica received
    /// matters to others only through the commits it issues. So branching
    /// on what the issuing replica has received just before each issue, and
    /// checking every later arrival set per replica, covers every schedule.
    fn explore(&mut self, node: Node) -> Result<bool, HarnessError> {
        if !self.executions.insert(node.key()) {
            return Ok(false);
        }
        for r in (0..self.replicas).map(ReplicaId) {
            if self.check_replica(&node, r)? {
                return Ok(true);
            }
        }
        let i = node.issued();
        if i == self.history.kinds.len() {
            return Ok(false);
        }
        let origin = ReplicaId(self.history.origins[i]);
        for extra in subsets(node.issued_mask() & !node.arrived[origin.0 as usize]) {
            let mut child = node.clone();
            child.deliver(origin, extra)?;
            self.issue(&mut child)?;
            let mark = self.trace.len();
            self.trace
                .extend(bits(extra).map(|j| format!("deliver c{} to {origin}", j + 1)));
            self.trace.push(format!("issue {}", self.history.label(i)));
            let stop = self.explore(child)?;
            self.trace.truncate(mark);
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn check_history(history: &History, replicas: u32, mode: Consistency) -> Result<Checker<'_>, HarnessError> {
    let history_size = history.kinds.len();
    let mut checker = Checker {
        history,
        replicas,
        stop_at_leak: mode == Consistency::Eventual,
        stopped: false,
        executions: HashSet::new(),
        checked: HashSet::new(),
        violations: 0,
        leaks: 0,
        counterexample: None,
        trace: Vec::new(),
        owner: UserId::new("owner")?,
        reader: UserId::new("reader")?,
        document: BoundObject::new("mc", "owner/doc", CrdtType::OrSet),
    };
    let root = Node {
        store: SecureCluster::new(Cluster::new(replicas, mode)),
        commits: Vec::new(),
        visible: vec![0; history_size],
        confidential: vec![false; history_size],
        arrived: vec![0; replicas as usize],
    };
    checker.stopped = checker.explore(root)?;
    Ok(checker)
}

/// Origin assignments up to renaming replicas: the first commit is at r0 and
/// each later one uses an already used replica or the next fresh one.
fn origin_patterns(n: usize, replicas: u32) -> Vec<Vec<u32>> {
    fn go(prefix: &mut Vec<u32>, n: usize, replicas: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next_fresh = prefix.iter().max().map_or(0, |m| m + 1);
        for r in 0..=next_fresh.min(replicas - 1) {
            prefix.push(r);
            go(prefix, n, replicas, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), n, replicas, &mut out);
    out
}

fn kind_sequences(n: usize) -> Vec<Vec<CommitKind>> {
    (0..3usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let k = KINDS[code % 3];
                    code /= 3;
                    k
                })
                .collect()
        })
        .collect()
}

/// Enumerates every history of `history_size` grant, revoke, and write
/// commits by one owner over `replicas` replicas, and every interleaving of
/// their issue and delivery. In each reachable state, every replica holding
/// a write must also hold every policy commit that was visible when the
/// write was issued; where it does not and the write was issued while the
/// reader lacked access, the reader's secured read at that replica is
/// checked for the written value.
///
/// Under eventual consistency the search stops at the first leak and keeps
/// its trace as the counterexample.
pub fn model_check_protection(
    history_size: usize,
    replicas: u32,
    mode: Consistency,
) -> Result<ModelCheckReport, HarnessError> {
    if history_size > MAX_HISTORY || replicas == 0 || replicas > MAX_REPLICAS {
        return Err(HarnessError::InvalidConfig(format!(
            "model checking supports up to {MAX_HISTORY} commits on 1 to {MAX_REPLICAS} replicas"
        )));
    }
    let mut report = ModelCheckReport {
        kind: "modelcheck",
        mode: match mode {
            Consistency::Causal => "causal",
            Consistency::Eventual => "eventual",
        },
        history_size,
        replicas,
        histories: 0,
        executions: 0,
        states: 0,
        violations: 0,
        leaks: 0,
        stopped_early: false,
        counterexample: None,
    };
    for origins in origin_patterns(history_size, replicas) {
        for kinds in kind_sequences(history_size) {
            report.histories += 1;
            let history = History {
                kinds,
                origins: origins.clone(),
            };
            let checker = check_history(&history, replicas, mode)?;
            report.executions += checker.executions.len() as u64;
            report.states += checker.checked.len() as u64;
            report.violations += checker.violations;
            report.leaks += checker.leaks;
            let better = match (&report.counterexample, &checker.counterexample) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(old), Some(new)) => new.leaked && !old.leaked,
            };
            if better {
                report.counterexample = checker.counterexample;
            }
            if checker.stopped {
                report.stopped_early = true;
                return Ok(report);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_patterns_count_set_partitions() {
        // Stirling numbers of the second kind: S(5,1)+S(5,2)+S(5,3).
        assert_eq!(origin_patterns(5, 3).len(), 1 + 15 + 25);
        assert_eq!(origin_patterns(3, 3).len(), 5);
        assert_eq!(origin_patterns(4, 1), vec![vec![0; 4]]);
        assert!(origin_patterns(5, 3).iter().all(|p| p[0] == 0));
    }

    #[test]
    fn subsets_enumerate_each_once() {
        let all: Vec<u8> = subsets(0b10110).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0], 0);
        assert!(all.iter().all(|s| s & !0b10110 == 0));
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 8);
        assert_eq!(subsets(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn kind_sequences_are_complete() {
        let all = kind_sequences(3);
        assert_eq!(all.len(), 27);
        let unique: HashSet<_> = all.iter().map(|k| format!("{k:?}")).collect();
        assert_eq!(unique.len(), 27);
    }

    #[test]
    fn causal_small_scale_is_clean() {
        let r = model_check_protection(3, 2, Consistency::Causal).unwrap();
        assert_eq!(r.histories, 27 * 4);
        assert!(r.states > r.executions && r.executions > r.histories);
        assert_eq!(r.violations, 0);
        assert_eq!(r.leaks, 0);
        assert!(r.counterexample.is_none());
    }

    #[test]
    fn eventual_small_scale_leaks() {
        let r = model_check_protection(3, 2, Consistency::Eventual).unwrap();
        assert!(r.stopped_early);
        let c = r.counterexample.unwrap();
        assert!(c.leaked);
        assert!(!c.missing.is_empty());
    }

    #[test]
    fn writes_only_are_vacuous() {
        for mode in [Consistency::Causal, Consistency::Eventual] {
            let history = History {
                kinds: vec![CommitKind::Write; 4],
                origins: vec![0, 1, 0, 2],
            };
            let c = check_history(&history, 3, mode).unwrap();
            assert!(c.checked.len() > 10);
            assert_eq!((c.violations, c.leaks), (0, 0));
        }
    }

    #[test]
    fn eventual_revoke_then_write_is_caught() {
        let history = History {
            kinds: vec![CommitKind::Grant, CommitKind::Revoke, CommitKind::Write],
            origins: vec![0, 0, 0],
        };
        let c = check_history(&history, 2, Consistency::Eventual).unwrap();
        assert!(c.stopped);
        let ce = c.counterexample.unwrap();
        assert_eq!(ce.missing, vec!["c2 revoke@r0"]);
        assert_eq!(ce.write, "c3 write@r0");
        let causal = check_history(&history, 2, Consistency::Causal).unwrap();
        assert_eq!(causal.violations, 0);
    }

    #[test]
    fn write_before_any_policy_is_not_confidential_leak() {
        // The reader never had access, but nothing protected the write
        // when it was issued, so there is nothing to violate.
        let history = History {
            kinds: vec![CommitKind::Write, CommitKind::Grant],
            origins: vec![0, 1],
        };
        let c = check_history(&history, 2, Consistency::Eventual).unwrap();
        assert_eq!(c.violations, 0);
    }

    #[test]
    fn bounds_are_enforced() {
        assert!(model_check_protection(6, 3, Consistency::Causal).is_err());
        assert!(model_check_protection(5, 4, Consistency::Causal).is_err());
        assert!(model_check_protection(2, 0, Consistency::Causal).is_err());
    }
}
