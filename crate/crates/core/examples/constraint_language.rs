//! Update constraints: build, print, parse, and check against operations.

use causal_ac::constraints::{
    and, assigns_only, constrain_assigns, is_map_update, is_set_update, key_constrain, no_map_removes, no_set_removes,
    set_adds_only, Constraint,
};
use causal_ac::crdt::UpdateOp;

fn main() {
    // A student may only add themselves to the participant set.
    let own_registration = is_map_update(and([
        assigns_only(["participants"]),
        no_map_removes(),
        constrain_assigns([key_constrain(
            "participants",
            is_set_update(and([set_adds_only(["s1"]), no_set_removes()])),
        )]),
    ]));
    let text = own_registration.to_string();
    println!("{text}");
    let parsed: Constraint = text.parse().unwrap();
    assert_eq!(parsed, own_registration);

    let ops = [
        (
            "add self",
            UpdateOp::map_update("participants", UpdateOp::set_add(["s1"])),
        ),
        (
            "add someone else",
            UpdateOp::map_update("participants", UpdateOp::set_add(["s2"])),
        ),
        (
            "remove self",
            UpdateOp::map_update("participants", UpdateOp::set_remove(["s1"])),
        ),
        ("touch title", UpdateOp::map_update("title", UpdateOp::assign("Logic"))),
    ];
    for (label, op) in &ops {
        println!("{label:<18} {}", own_registration.applies_to(op));
    }

    match "isMapUpdate(assignsOnly(".parse::<Constraint>() {
        Ok(c) => println!("unexpected {c}"),
        Err(e) => println!("parse error: {e}"),
    }
}
