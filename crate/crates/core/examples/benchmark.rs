//! Local decisions against a central decision server at growing network
//! delay, on a simulated clock.

use causal_ac::harness::{run_benchmark, Mode, ScenarioConfig};
use causal_ac::stats::WorkloadConfig;

fn main() {
    let workload = WorkloadConfig::with_target_ops(2_000, 3);
    println!(
        "{:<8} {:>9} {:>11} {:>10} {:>15}",
        "mode", "net (ms)", "req (ms)", "ops/s", "decision reads"
    );
    for mode in [Mode::NoAc, Mode::Local, Mode::Central] {
        for net in [0.0, 10.0, 50.0, 100.0] {
            let m = run_benchmark(&ScenarioConfig::new(mode, net, workload.clone())).unwrap();
            let req = m.request_delay_ms.map_or("-".to_string(), |d| format!("{d:.1}"));
            println!(
                "{:<8} {:>9} {:>11} {:>10.1} {:>15}",
                m.mode.to_string(),
                net,
                req,
                m.throughput_ops_per_s,
                m.decision_reads
            );
        }
    }
}
