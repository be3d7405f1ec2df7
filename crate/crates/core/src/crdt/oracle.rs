use std::collections::BTreeMap;

use thiserror::Error;

use super::{CrdtError, CrdtState, CrdtType, Dot, Effect, ReadResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("causal order among effects contains a cycle")]
    CausalCycle,
    #[error("effect {0} observes dot {1} which is not part of the history")]
    NotCausallyClosed(Dot, Dot),
    #[error("duplicate dot {0}")]
    DuplicateDot(Dot),
    #[error(transparent)]
    Crdt(#[from] CrdtError),
}

/// Reads the state reached by applying `effects` in a topological order of
/// the causal relation implied by their observed sets.
///
/// Used to cross-check replica state under permuted delivery: any other
/// topological order must produce the same read.
pub fn merge_equivalence_oracle(ty: CrdtType, effects: &[Effect]) -> Result<ReadResult, OracleError> {
    let mut index = BTreeMap::new();
    for (i, e) in effects.iter().enumerate() {
        if index.insert(e.dot, i).is_some() {
            return Err(OracleError::DuplicateDot(e.dot));
        }
    }
    let mut preds = vec![Vec::new(); effects.len()];
    for (i, e) in effects.iter().enumerate() {
        for d in &e.observed {
            let j = *index.get(d).ok_or(OracleError::NotCausallyClosed(e.dot, *d))?;
            preds[i].push(j);
        }
    }

    // Kahn's algorithm, lowest index first.
    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut succs = vec![Vec::new(); effects.len()];
    for (i, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(i);
        }
    }
    let mut ready: Vec<usize> = (0..effects.len()).filter(|&i| indegree[i] == 0).collect();
    let mut state = CrdtState::empty(ty);
    let mut applied = 0;
    while let Some(pos) = ready.iter().enumerate().min_by_key(|(_, &i)| i).map(|(p, _)| p) {
        let i = ready.swap_remove(pos);
        state.apply_effect(&effects[i])?;
        applied += 1;
        for &s in &succs[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(s);
            }
        }
    }
    if applied != effects.len() {
        return Err(OracleError::CausalCycle);
    }
    Ok(state.read())
}

/// Calls `visit` with every ordering of `0..preds.len()` in which each item
/// comes after all of its predecessors.
pub fn for_each_linear_extension<F>(preds: &[Vec<usize>], mut visit: F)
where
    F: FnMut(&[usize]),
{
    fn go<F: FnMut(&[usize])>(preds: &[Vec<usize>], placed: &mut Vec<bool>, order: &mut Vec<usize>, visit: &mut F) {
        if order.len() == preds.len() {
            visit(order);
            return;
        }
        for i in 0..preds.len() {
            if !placed[i] && preds[i].iter().all(|&p| placed[p]) {
                placed[i] = true;
                order.push(i);
                go(preds, placed, order, visit);
                order.pop();
                placed[i] = false;
            }
        }
    }
    let mut placed = vec![false; preds.len()];
    let mut order = Vec::with_capacity(preds.len());
    go(preds, &mut placed, &mut order, &mut visit);
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::crdt::UpdateOp;

    fn eff(op: UpdateOp, dot: Dot, observed: &[Dot]) -> Effect {
        Effect {
            op,
            dot,
            observed: observed.iter().copied().collect(),
        }
    }

    fn values(xs: &[&str]) -> ReadResult {
        ReadResult::Values(xs.iter().map(|x| x.as_bytes().to_vec()).collect())
    }

    #[test]
    fn sequential_overwrite() {
        let d1 = Dot::new(0, 1);
        let d2 = Dot::new(0, 2);
        let h = [
            eff(UpdateOp::assign("a"), d1, &[]),
            eff(UpdateOp::assign("b"), d2, &[d1]),
        ];
        assert_eq!(merge_equivalence_oracle(CrdtType::MvReg, &h).unwrap(), values(&["b"]));
    }

    #[test]
    fn concurrent_assigns_both_survive() {
        let h = [
            eff(UpdateOp::assign("a"), Dot::new(0, 1), &[]),
            eff(UpdateOp::assign("b"), Dot::new(1, 1), &[]),
        ];
        assert_eq!(
            merge_equivalence_oracle(CrdtType::MvReg, &h).unwrap(),
            values(&["a", "b"])
        );
    }

    #[test]
    fn cycles_and_open_histories_are_rejected() {
        let d1 = Dot::new(0, 1);
        let d2 = Dot::new(0, 2);
        let cyclic = [
            eff(UpdateOp::assign("a"), d1, &[d2]),
            eff(UpdateOp::assign("b"), d2, &[d1]),
        ];
        assert_eq!(
            merge_equivalence_oracle(CrdtType::MvReg, &cyclic),
            Err(OracleError::CausalCycle)
        );
        let open = [eff(UpdateOp::assign("b"), d2, &[d1])];
        assert_eq!(
            merge_equivalence_oracle(CrdtType::MvReg, &open),
            Err(OracleError::NotCausallyClosed(d2, d1))
        );
    }

    #[test]
    fn linear_extensions_of_a_diamond() {
        let preds = vec![vec![], vec![0], vec![0], vec![1, 2]];
        let mut seen = Vec::new();
        for_each_linear_extension(&preds, |o| seen.push(o.to_vec()));
        assert_eq!(seen, vec![vec![0, 1, 2, 3], vec![0, 2, 1, 3]]);
    }

    /// Random 6-effect multi-value register histories read the same under
    /// every causal permutation.
    #[test]
    fn random_histories_agree_across_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            // Replicas build states independently and occasionally sync.
            let mut replicas = vec![CrdtState::empty(CrdtType::MvReg); 3];
            let mut seen: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); 3];
            let mut effects: Vec<Effect> = Vec::new();
            let mut preds: Vec<Vec<usize>> = Vec::new();
            while effects.len() < 6 {
                let r = rng.gen_range(0..3);
                if rng.gen_bool(0.4) && !effects.is_empty() {
                    // Pull everything another replica has seen, in causal order.
                    let from = rng.gen_range(0..3);
                    let missing: Vec<usize> = seen[from].difference(&seen[r]).copied().collect();
                    for i in missing {
                        replicas[r].apply_effect(&effects[i]).unwrap();
                        seen[r].insert(i);
                    }
                    continue;
                }
                let dot = Dot::new(r as u32, effects.len() as u64 + 1);
                let v = format!("v{}", effects.len());
                let e = replicas[r].generate_effect(UpdateOp::assign(v), dot).unwrap();
                replicas[r].apply_effect(&e).unwrap();
                preds.push(seen[r].iter().copied().collect());
                seen[r].insert(effects.len());
                effects.push(e);
            }
            let expected = merge_equivalence_oracle(CrdtType::MvReg, &effects).unwrap();
            for_each_linear_extension(&preds, |order| {
                let mut s = CrdtState::empty(CrdtType::MvReg);
                for &i in order {
                    s.apply_effect(&effects[i]).unwrap();
                }
                assert_eq!(s.read(), expected);
            });
        }
    }
}
