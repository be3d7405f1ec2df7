//! Concurrent permission assignments resolve to their intersection.

use causal_ac::crdt::{CrdtType, Dot, ObjectState, ReadResult, UpdateOp};

fn show(label: &str, state: &ObjectState) {
    if let ReadResult::Permissions(p) = state.read() {
        let names: Vec<_> = p.iter().map(|t| String::from_utf8_lossy(t).into_owned()).collect();
        println!("{label:<28} {names:?}");
    }
}

fn main() {
    let empty = ObjectState::new(CrdtType::Policy);

    // Two replicas assign without seeing each other.
    let a = empty
        .generate_effect(UpdateOp::policy_assign(["read", "write"]), Dot::new(0, 1))
        .unwrap();
    let b = empty
        .generate_effect(UpdateOp::policy_assign(["read", "comment"]), Dot::new(1, 1))
        .unwrap();

    let mut left = empty.clone();
    left.apply_effect(&a).unwrap();
    left.apply_effect(&b).unwrap();
    let mut right = empty.clone();
    right.apply_effect(&b).unwrap();
    right.apply_effect(&a).unwrap();
    show("concurrent, a then b:", &left);
    show("concurrent, b then a:", &right);
    assert_eq!(left.read(), right.read());

    // An assignment that saw both replaces them.
    let c = left
        .generate_effect(UpdateOp::policy_assign(["write"]), Dot::new(0, 2))
        .unwrap();
    left.apply_effect(&c).unwrap();
    show("after a later assignment:", &left);

    // Disjoint concurrent sets leave nothing.
    let x = empty
        .generate_effect(UpdateOp::policy_assign(["admin"]), Dot::new(0, 1))
        .unwrap();
    let y = empty
        .generate_effect(UpdateOp::policy_assign(["audit"]), Dot::new(1, 1))
        .unwrap();
    let mut both = empty.clone();
    both.apply_effect(&x).unwrap();
    both.apply_effect(&y).unwrap();
    show("disjoint, concurrent:", &both);
}
