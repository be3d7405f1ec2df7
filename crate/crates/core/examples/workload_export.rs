//! Writes a generated semester as JSON lines and summarizes its mix.
//!
//! Usage: `workload_export [target ops] [seed] [path]`; prints to stdout
//! without a path.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use causal_ac::stats::{generate_workload, workload_mix, WorkloadConfig};

fn main() -> io::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let target = args.first().map_or(1_000, |a| a.parse().expect("target ops"));
    let seed = args.get(1).map_or(1, |a| a.parse().expect("seed"));
    let ops = generate_workload(&WorkloadConfig::with_target_ops(target, seed));

    let mut out: Box<dyn Write> = match args.get(2) {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    for op in &ops {
        writeln!(out, "{}", op.to_json())?;
    }
    out.flush()?;

    let mix = workload_mix(&ops);
    eprintln!(
        "{} actions, {} reads, {} updates, ratio {:.3}",
        mix.actions,
        mix.reads,
        mix.updates,
        mix.ratio()
    );
    Ok(())
}
