//! Scenario runner. Every report is one JSON line on stdout or in `--out`.
//!
//! Exits with 1 if a causal-mode run leaks or violates an invariant, and
//! with 2 on invalid arguments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use causal_ac::harness::{
    check_atomic_visibility, model_check_protection, run_alice_bob, run_benchmark, run_charly, to_json_line,
    HarnessError, Mode, ScenarioConfig,
};
use causal_ac::stats::WorkloadConfig;
use causal_ac::store::Consistency;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Access control on a causally consistent CRDT store")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Write JSON lines here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated throughput of local, central, and no access control.
    Bench {
        /// local, central, none or eventual; all but eventual if omitted.
        #[arg(long)]
        mode: Option<Mode>,
        /// Round-trip delay to the decision server; repeatable.
        #[arg(long = "net-delay-ms", default_values_t = [0.0, 10.0, 50.0, 100.0])]
        net_delay_ms: Vec<f64>,
        #[arg(long = "base-delay-ms", default_value_t = causal_ac::harness::DEFAULT_BASE_DELAY_MS)]
        base_delay_ms: f64,
        /// Workload size relative to the captured semester history.
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Bob reading Alice's photos around a revoke, under every delivery order.
    Alicebob {
        /// causal or eventual; both if omitted.
        #[arg(long, value_parser = parse_consistency)]
        mode: Option<Consistency>,
        /// Number of delivery orders to sample; all if omitted.
        #[arg(long)]
        schedules: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Concurrent grants of two conflicting roles.
    Charly {
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive check that data never travels ahead of its protecting policy.
    Modelcheck {
        /// causal or eventual; both if omitted.
        #[arg(long, value_parser = parse_consistency)]
        mode: Option<Consistency>,
        #[arg(long, default_value_t = 5)]
        history_size: usize,
        #[arg(long, default_value_t = 3)]
        replicas: u32,
        /// Also check atomic visibility of two-object commits.
        #[arg(long)]
        atomicity: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_consistency(s: &str) -> Result<Consistency, String> {
    match s {
        "causal" => Ok(Consistency::Causal),
        "eventual" => Ok(Consistency::Eventual),
        other => Err(format!("unknown mode {other:?} (expected causal or eventual)")),
    }
}

fn both(mode: Option<Consistency>) -> Vec<Consistency> {
    mode.map_or_else(|| vec![Consistency::Causal, Consistency::Eventual], |m| vec![m])
}

struct Output {
    sink: Box<dyn Write>,
    failed: bool,
}

impl Output {
    fn open(common: &Common) -> io::Result<Self> {
        let sink: Box<dyn Write> = match &common.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Output { sink, failed: false })
    }

    fn emit<T: serde::Serialize>(&mut self, report: &T, violation: bool) -> io::Result<()> {
        self.failed |= violation;
        writeln!(self.sink, "{}", to_json_line(report))
    }
}

fn run(command: Command) -> Result<bool, Box<dyn std::error::Error>> {
    let failed = match command {
        Command::Bench {
            mode,
            net_delay_ms,
            base_delay_ms,
            scale,
            common,
        } => {
            let mut out = Output::open(&common)?;
            let modes = mode.map_or_else(|| vec![Mode::NoAc, Mode::Local, Mode::Central], |m| vec![m]);
            for mode in modes {
                for &net in &net_delay_ms {
                    let mut cfg = ScenarioConfig::new(mode, net, WorkloadConfig::scaled(scale, common.seed));
                    cfg.network.base_delay_ms = base_delay_ms;
                    let m = run_benchmark(&cfg)?;
                    let violation = mode != Mode::Eventual && (m.leaks_detected > 0 || m.denials > 0);
                    out.emit(&m, violation)?;
                }
            }
            out.sink.flush()?;
            out.failed
        }
        Command::Alicebob {
            mode,
            schedules,
            common,
        } => {
            let mut out = Output::open(&common)?;
            for mode in both(mode) {
                let r = run_alice_bob(mode, schedules.unwrap_or(usize::MAX), common.seed)?;
                out.emit(&r, mode == Consistency::Causal && r.leaks > 0)?;
            }
            out.sink.flush()?;
            out.failed
        }
        Command::Charly { common } => {
            let mut out = Output::open(&common)?;
            let r = run_charly(common.seed)?;
            out.emit(&r, r.both_granted_ever || !r.replicas_agree)?;
            out.sink.flush()?;
            out.failed
        }
        Command::Modelcheck {
            mode,
            history_size,
            replicas,
            atomicity,
            common,
        } => {
            let mut out = Output::open(&common)?;
            for mode in both(mode) {
                let r = model_check_protection(history_size, replicas, mode)?;
                out.emit(&r, mode == Consistency::Causal && (r.violations > 0 || r.leaks > 0))?;
                if atomicity {
                    let a = check_atomic_visibility(mode)?;
                    let bad = a.partial_observations > 0 || a.snapshot_violations > 0;
                    out.emit(&a, mode == Consistency::Causal && bad)?;
                }
            }
            out.sink.flush()?;
            out.failed
        }
    };
    Ok(failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let config = matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::InvalidConfig(_)));
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
