//! Two managers concurrently give Charly conflicting roles.

use causal_ac::harness::{run_charly, to_json_line};

fn main() {
    let report = run_charly(7).unwrap();
    println!("{}", to_json_line(&report));
    println!("after concurrent grants, per replica: {:?}", report.concurrent_final);
    println!("after sequential grants, per replica: {:?}", report.sequential_final);
    println!("ever consultant for both: {}", report.both_granted_ever);
}
