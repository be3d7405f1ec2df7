use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crdt::ReplicaId;

/// Per-replica commit counters. Absent entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VectorClock(BTreeMap<ReplicaId, u64>);

impl VectorClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, replica: ReplicaId) -> u64 {
        self.0.get(&replica).copied().unwrap_or(0)
    }

    pub fn set(&mut self, replica: ReplicaId, value: u64) {
        if value == 0 {
            self.0.remove(&replica);
        } else {
            self.0.insert(replica, value);
        }
    }

    /// Increments the entry for `replica` and returns the new value.
    pub fn increment(&mut self, replica: ReplicaId) -> u64 {
        let next = self.get(replica) + 1;
        self.set(replica, next);
        next
    }

    /// Pointwise maximum.
    pub fn merge(&mut self, other: &VectorClock) {
        for (&r, &v) in &other.0 {
            if v > self.get(r) {
                self.0.insert(r, v);
            }
        }
    }

    /// Pointwise `<=`.
    pub fn leq(&self, other: &VectorClock) -> bool {
        self.0.iter().all(|(&r, &v)| v <= other.get(r))
    }

    pub fn concurrent(&self, other: &VectorClock) -> bool {
        !self.leq(other) && !other.leq(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ReplicaId, u64)> + '_ {
        self.0.iter().map(|(&r, &v)| (r, v))
    }
}

impl PartialOrd for VectorClock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.leq(other), other.leq(self)) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }
}

impl fmt::Display for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (r, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}:{v}")?;
        }
        f.write_str("}")
    }
}

impl<const N: usize> From<[(u32, u64); N]> for VectorClock {
    fn from(entries: [(u32, u64); N]) -> Self {
        let mut vc = VectorClock::new();
        for (r, v) in entries {
            vc.set(ReplicaId(r), v);
        }
        vc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clock() -> impl Strategy<Value = VectorClock> {
        prop::collection::vec(0u64..4, 3).prop_map(|vs| {
            let mut vc = VectorClock::new();
            for (i, v) in vs.into_iter().enumerate() {
                vc.set(ReplicaId(i as u32), v);
            }
            vc
        })
    }

    #[test]
    fn absent_is_zero() {
        let vc = VectorClock::from([(0, 2)]);
        assert_eq!(vc.get(ReplicaId(1)), 0);
        assert!(VectorClock::new().leq(&vc));
        assert_eq!(vc, VectorClock::from([(0, 2), (1, 0)]));
    }

    #[test]
    fn ordering() {
        let a = VectorClock::from([(0, 1)]);
        let b = VectorClock::from([(0, 1), (1, 1)]);
        let c = VectorClock::from([(1, 2)]);
        assert!(a < b);
        assert!(a.concurrent(&c));
        assert_eq!(a.partial_cmp(&c), None);
        assert_eq!(b.to_string(), "{r0:1, r1:1}");
    }

    proptest! {
        #[test]
        fn merge_is_least_upper_bound(a in clock(), b in clock()) {
            let mut m = a.clone();
            m.merge(&b);
            prop_assert!(a.leq(&m) && b.leq(&m));
            let mut m2 = b.clone();
            m2.merge(&a);
            prop_assert_eq!(&m, &m2);
            for r in 0..3 {
                let r = ReplicaId(r);
                prop_assert_eq!(m.get(r), a.get(r).max(b.get(r)));
            }
        }
    }
}
