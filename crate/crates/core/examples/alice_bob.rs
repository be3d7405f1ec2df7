//! A revoke followed by an upload, under every delivery order.

use causal_ac::harness::{run_alice_bob, to_json_line};
use causal_ac::store::Consistency;

fn main() {
    for mode in [Consistency::Causal, Consistency::Eventual] {
        let report = run_alice_bob(mode, usize::MAX, 1).unwrap();
        println!("{}", to_json_line(&report));
        match &report.example_leak {
            Some(order) => println!("  bob saw the new photo when commits arrived as {order:?}"),
            None => println!("  bob never saw a photo he was not allowed to see"),
        }
    }
}
