//! Deterministic scenario runner.
//!
//! - [`run_benchmark`] replays a STATS workload on a simulated clock and
//!   reports throughput for local decisions, a central decision server at a
//!   given network delay, and no access control.
//! - [`run_alice_bob`] and [`run_charly`] replay the two motivating anomalies
//!   under every delivery order.
//! - [`check_atomic_visibility`] and [`model_check_protection`] enumerate
//!   delivery schedules of small histories.
//!
//! Every report serializes to one JSON line; nothing depends on wall-clock
//! time.

mod bench;
mod modelcheck;
mod scenarios;
mod sim;

pub use bench::{
    run_benchmark, Metrics, Mode, NetworkModel, ScenarioConfig, DEFAULT_BASE_DELAY_MS, DEFAULT_DECISION_READ_MS,
    DEFAULT_STORE_OP_MS,
};
pub use modelcheck::{model_check_protection, CommitKind, Counterexample, ModelCheckReport};
pub use scenarios::{
    check_atomic_visibility, run_alice_bob, run_charly, AliceBobReport, AtomicityReport, CharlyReport, ManagerPolicy,
    OwnerPolicy,
};
pub use sim::Simulator;

use serde::Serialize;
use thiserror::Error;

use crate::acl::AclError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Acl(#[from] AclError),
}

impl From<crate::store::StoreError> for HarnessError {
    fn from(e: crate::store::StoreError) -> Self {
        HarnessError::Acl(e.into())
    }
}

/// Serializes a report as one JSON line.
pub fn to_json_line<T: Serialize>(report: &T) -> String {
    serde_json::to_string(report).expect("reports serialize")
}
