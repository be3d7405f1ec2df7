//! Access control for applications on a causally consistent, replicated
//! CRDT store.
//!
//! The crate is layered bottom-up:
//!
//! - [`crdt`]: operation-based CRDTs, including the Policy CRDT whose read is
//!   the intersection of concurrently assigned permission sets.
//! - [`store`]: an in-process cluster of replicas with causal delivery and
//!   atomic multi-object transactions.
//! - [`acl`]: the access-control monitor. Secured transactions consult a
//!   pluggable [`acl::DecisionProcedure`] on the same snapshot the operation
//!   runs on, and keep policies in isolated buckets next to the data.
//! - [`constraints`]: a small language of structural predicates over updates.
//! - [`stats`]: a student-management case study (data model, policy,
//!   workload generator).
//! - [`harness`]: anomaly scenarios, a delivery-schedule model checker, and a
//!   simulated-latency benchmark comparing local and central decisions.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod acl;
pub mod constraints;
pub mod crdt;
pub mod harness;
pub mod stats;
pub mod store;
