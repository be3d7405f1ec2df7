use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acl::{AclCounters, AllowAll, SecureCluster, UserId};
use crate::crdt::ReplicaId;
use crate::stats::{bootstrap, generate_workload, run_operation, StatsPolicy, WorkloadConfig};
use crate::store::{Cluster, Consistency};

use super::sim::{ms_to_ns, Simulator};
use super::HarnessError;

/// Processing time of one request at the decision server.
pub const DEFAULT_BASE_DELAY_MS: f64 = 0.3;

/// Time the local store spends on one operation. Chosen so that a central
/// server without network delay yields 1257.9 application ops/s:
/// `1000 / 1257.9 - 0.3`.
pub const DEFAULT_STORE_OP_MS: f64 = 0.495;

/// Time the local store spends on one read issued by a decision. Chosen so
/// that 216,923 such reads slow 135,852 operations from 1750 to 1079.2
/// ops/s: `(1000 / 1079.2 - 1000 / 1750) * 135852 / 216923`.
pub const DEFAULT_DECISION_READ_MS: f64 = 0.222;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Decisions read policies from the local snapshot.
    Local,
    /// Every decision is a round trip to one decision server.
    Central,
    /// No access control.
    #[serde(rename = "none")]
    NoAc,
    /// Local decisions on a store without causal delivery.
    Eventual,
}

impl Mode {
    pub fn consistency(self) -> Consistency {
        match self {
            Mode::Eventual => Consistency::Eventual,
            _ => Consistency::Causal,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Local => "local",
            Mode::Central => "central",
            Mode::NoAc => "none",
            Mode::Eventual => "eventual",
        })
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Mode::Local),
            "central" => Ok(Mode::Central),
            "none" | "no-ac" => Ok(Mode::NoAc),
            "eventual" => Ok(Mode::Eventual),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown mode {other:?} (expected local, central, none, eventual)"
            ))),
        }
    }
}

/// Link between the application and the decision server.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    /// Round trip over the link.
    pub net_delay_ms: f64,
    /// Server processing time per request.
    pub base_delay_ms: f64,
}

impl NetworkModel {
    pub fn new(net_delay_ms: f64) -> Self {
        NetworkModel {
            net_delay_ms,
            base_delay_ms: DEFAULT_BASE_DELAY_MS,
        }
    }

    pub fn request_delay_ms(&self) -> f64 {
        self.net_delay_ms + self.base_delay_ms
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, v) in [("net delay", self.net_delay_ms), ("base delay", self.base_delay_ms)] {
            if !v.is_finite() || v < 0.0 {
                return Err(HarnessError::InvalidConfig(format!(
                    "{name} must be a non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub network: NetworkModel,
    pub store_op_ms: f64,
    pub decision_read_ms: f64,
    pub workload: WorkloadConfig,
    pub seed: u64,
    pub schedule_count: usize,
}

impl ScenarioConfig {
    pub fn new(mode: Mode, net_delay_ms: f64, workload: WorkloadConfig) -> Self {
        let seed = workload.seed;
        ScenarioConfig {
            mode,
            network: NetworkModel::new(net_delay_ms),
            store_op_ms: DEFAULT_STORE_OP_MS,
            decision_read_ms: DEFAULT_DECISION_READ_MS,
            workload,
            seed,
            schedule_count: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.network.validate()?;
        if !self.store_op_ms.is_finite() || self.store_op_ms <= 0.0 {
            return Err(HarnessError::InvalidConfig(format!(
                "store op time must be positive, got {}",
                self.store_op_ms
            )));
        }
        if !self.decision_read_ms.is_finite() || self.decision_read_ms < 0.0 {
            return Err(HarnessError::InvalidConfig(format!(
                "decision read time must be non-negative, got {}",
                self.decision_read_ms
            )));
        }
        if self.workload.target_ops == 0 {
            return Err(HarnessError::InvalidConfig("workload must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub kind: &'static str,
    pub mode: Mode,
    pub net_delay_ms: f64,
    pub base_delay_ms: f64,
    pub store_op_ms: f64,
    pub decision_read_ms: f64,
    pub seed: u64,
    pub workload_actions: u64,
    /// Datastore operations issued by the application.
    pub app_ops: u64,
    pub app_reads: u64,
    pub app_updates: u64,
    pub decisions: u64,
    /// Reads issued to feed decisions, not counted in `app_ops`.
    pub decision_reads: u64,
    pub denials: u64,
    pub leaks_detected: u64,
    pub simulated_duration_ms: f64,
    pub throughput_ops_per_s: f64,
    /// Mean decision round trip observed on the simulated link.
    pub request_delay_ms: Option<f64>,
    /// Decisions per second one sequential decision pipeline completes.
    pub decision_pipeline_ops_per_s: Option<f64>,
    /// `decision_reads / app_ops`.
    pub decision_read_overhead_vs_ops: f64,
    /// `decision_reads / app_reads`.
    pub decision_read_overhead_vs_reads: f64,
}

enum Event {
    Issue(usize),
    /// Decision `k` of the current action reaches the server.
    AtServer {
        op: usize,
        k: u64,
    },
    /// The server's answer reaches the application.
    Answer {
        op: usize,
        k: u64,
        sent_ns: u64,
    },
    Done(usize),
}

/// Replays the configured workload, one action at a time, on a simulated
/// clock.
///
/// Each datastore operation costs `store_op_ms`. Local modes also pay
/// `decision_read_ms` for each decision read. Central mode instead sends every decision to the
/// server: half the round trip there, `base_delay_ms` processing, half back.
pub fn run_benchmark(cfg: &ScenarioConfig) -> Result<Metrics, HarnessError> {
    cfg.validate()?;
    let ops = generate_workload(&cfg.workload);
    let app = ReplicaId(0);
    let mut store = SecureCluster::new(Cluster::new(1, cfg.mode.consistency()));
    bootstrap(&mut store, app, &UserId::new("admin")?)?;

    let store_ns = ms_to_ns(cfg.store_op_ms);
    let decision_read_ns = ms_to_ns(cfg.decision_read_ms);
    let net_ns = ms_to_ns(cfg.network.net_delay_ms);
    let base_ns = ms_to_ns(cfg.network.base_delay_ms);
    let (out_ns, back_ns) = (net_ns / 2, net_ns - net_ns / 2);

    let mut sim = Simulator::new();
    let mut totals = AclCounters::default();
    let mut pending = AclCounters::default();
    let mut denials = 0;
    let mut round_trips = 0u64;
    let mut round_trip_ns = 0u64;
    let mut server_free_ns = 0u64;
    if !ops.is_empty() {
        sim.schedule_in(0, Event::Issue(0));
    }
    while let Some(event) = sim.pop() {
        match event {
            Event::Issue(i) => {
                let (outcome, counters) = match cfg.mode {
                    Mode::NoAc => run_operation(&mut store, app, &AllowAll, &ops[i]),
                    _ => run_operation(&mut store, app, &StatsPolicy, &ops[i]),
                };
                if outcome.is_err() {
                    denials += 1;
                }
                pending = counters;
                match cfg.mode {
                    Mode::Central if counters.decisions > 0 => sim.schedule_in(out_ns, Event::AtServer { op: i, k: 0 }),
                    Mode::Central | Mode::NoAc => sim.schedule_in(store_ns * counters.app_ops(), Event::Done(i)),
                    Mode::Local | Mode::Eventual => {
                        let ns = store_ns * counters.app_ops() + decision_read_ns * counters.decision_reads;
                        sim.schedule_in(ns, Event::Done(i))
                    }
                }
            }
            Event::AtServer { op, k } => {
                // One request at a time; a busy server delays the answer.
                let start = sim.now_ns().max(server_free_ns);
                server_free_ns = start + base_ns;
                let sent_ns = sim.now_ns() - out_ns;
                sim.schedule_in(
                    server_free_ns - sim.now_ns() + back_ns,
                    Event::Answer { op, k, sent_ns },
                );
            }
            Event::Answer { op, k, sent_ns } => {
                round_trips += 1;
                round_trip_ns += sim.now_ns() - sent_ns;
                // An allowed decision is followed by its store operation.
                let work = if k < pending.app_ops() { store_ns } else { 0 };
                if k + 1 < pending.decisions {
                    sim.schedule_in(work + out_ns, Event::AtServer { op, k: k + 1 });
                } else {
                    sim.schedule_in(work, Event::Done(op));
                }
            }
            Event::Done(i) => {
                totals.add(&pending);
                if i + 1 < ops.len() {
                    sim.schedule_in(0, Event::Issue(i + 1));
                }
            }
        }
    }

    let duration_ns = sim.now_ns();
    let app_ops = totals.app_ops();
    let app_reads = totals.data_reads + totals.policy_reads;
    let request_delay_ms = (round_trips > 0).then(|| round_trip_ns as f64 / round_trips as f64 / 1e6);
    Ok(Metrics {
        kind: "bench",
        mode: cfg.mode,
        net_delay_ms: cfg.network.net_delay_ms,
        base_delay_ms: cfg.network.base_delay_ms,
        store_op_ms: cfg.store_op_ms,
        decision_read_ms: cfg.decision_read_ms,
        seed: cfg.workload.seed,
        workload_actions: ops.len() as u64,
        app_ops,
        app_reads,
        app_updates: totals.data_updates + totals.policy_assigns,
        decisions: totals.decisions,
        decision_reads: totals.decision_reads,
        denials,
        leaks_detected: 0,
        simulated_duration_ms: duration_ns as f64 / 1e6,
        throughput_ops_per_s: if duration_ns == 0 {
            0.0
        } else {
            app_ops as f64 / (duration_ns as f64 / 1e9)
        },
        request_delay_ms,
        decision_pipeline_ops_per_s: request_delay_ms.filter(|d| *d > 0.0).map(|d| 1000.0 / d),
        decision_read_overhead_vs_ops: totals.decision_reads as f64 / app_ops.max(1) as f64,
        decision_read_overhead_vs_reads: totals.decision_reads as f64 / app_reads.max(1) as f64,
    })
}
