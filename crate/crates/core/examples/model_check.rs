//! Exhaustive search for data that overtakes the policy protecting it.
//!
//! Pass a history size and replica count, e.g. `-- 5 3`. Defaults to 4 and 3.

use causal_ac::harness::{check_atomic_visibility, model_check_protection, to_json_line};
use causal_ac::store::Consistency;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse().expect("numbers"));
    let size = args.next().unwrap_or(4) as usize;
    let replicas = args.next().unwrap_or(3) as u32;
    for mode in [Consistency::Causal, Consistency::Eventual] {
        let report = model_check_protection(size, replicas, mode).unwrap();
        println!("{}", to_json_line(&report));
        if let Some(c) = &report.counterexample {
            println!("  history: {}", c.history.join(", "));
            for step in &c.trace {
                println!("  {step}");
            }
            println!("  {} holds {} without {}", c.replica, c.write, c.missing.join(", "));
        }
        println!("{}", to_json_line(&check_atomic_visibility(mode).unwrap()));
    }
}
