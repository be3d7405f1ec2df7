//! Student achievement tracking: data model, access-control policy, and a
//! synthetic workload.
//!
//! All objects are maps in the `stats` bucket:
//!
//! | key | fields |
//! |-----|--------|
//! | `system` | none; carries the `admin`, `staff`, `student` role tokens |
//! | `student/<sid>` | `name`, `email`, `sid` |
//! | `exercise/<ex>` | `title`, `registration_open`, `participants`, `groups`, `sheets` |
//! | `exercise/<ex>/group/<g>` | `slot`, `day`, `location`, `tutors`, `members`, `teams` |
//! | `exercise/<ex>/sheet/<s>` | `title`, `max_points` |
//! | `exercise/<ex>/group/<g>/result/<sid>` | sheet id to points |
//! | `exam/<e>` | `title`, `registration_open`, `published`, `participants`, `tasks`, `grades` |
//! | `exam/<e>/result/<sid>` | task id to points, `grade` |
//!
//! Flags are enable-wins flags, collections are OR-sets, `teams` maps a
//! student id to a team name, and scalar attributes are MV-registers.

mod fixture;
mod policy;
mod workload;

pub use fixture::PolicyFixture;
pub use policy::StatsPolicy;
pub use workload::{
    apply_app_operation, generate_workload, plan, run_operation, workload_mix, AppAction, AppOperation, Step,
    WorkloadConfig, WorkloadMix, SEMESTER_READS, SEMESTER_TOTAL_OPS, SEMESTER_UPDATES,
};

use std::sync::Arc;

use crate::acl::{AclError, SecureCluster, UserId};
use crate::crdt::{CrdtType, Permissions, ReplicaId};
use crate::store::{BoundObject, TransactionCommit};

pub const BUCKET: &str = "stats";

pub mod field {
    pub const NAME: &str = "name";
    pub const EMAIL: &str = "email";
    pub const SID: &str = "sid";
    pub const TITLE: &str = "title";
    pub const REGISTRATION_OPEN: &str = "registration_open";
    pub const PUBLISHED: &str = "published";
    pub const PARTICIPANTS: &str = "participants";
    pub const GROUPS: &str = "groups";
    pub const SHEETS: &str = "sheets";
    pub const SLOT: &str = "slot";
    pub const DAY: &str = "day";
    pub const LOCATION: &str = "location";
    pub const TUTORS: &str = "tutors";
    pub const MEMBERS: &str = "members";
    pub const TEAMS: &str = "teams";
    pub const MAX_POINTS: &str = "max_points";
    pub const TASKS: &str = "tasks";
    pub const GRADES: &str = "grades";
    pub const GRADE: &str = "grade";
}

/// Permission tokens, each meaningful on one layer object.
pub mod token {
    pub const ADMIN: &str = "admin";
    pub const STAFF: &str = "staff";
    pub const STUDENT: &str = "student";
    pub const ASSISTANT: &str = "assistant";
    pub const TUTOR: &str = "tutor";
    pub const EXAMINER: &str = "examiner";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Admin,
    Assistant,
    Tutor,
    Examiner,
    Student,
}

impl Role {
    pub fn token(self) -> &'static str {
        match self {
            Role::Admin => token::ADMIN,
            Role::Assistant => token::ASSISTANT,
            Role::Tutor => token::TUTOR,
            Role::Examiner => token::EXAMINER,
            Role::Student => token::STUDENT,
        }
    }
}

fn map_object(key: String) -> BoundObject {
    BoundObject::new(BUCKET, key, CrdtType::Map)
}

pub fn system() -> BoundObject {
    map_object("system".into())
}

pub fn student(sid: &str) -> BoundObject {
    map_object(format!("student/{sid}"))
}

pub fn exercise(ex: &str) -> BoundObject {
    map_object(format!("exercise/{ex}"))
}

pub fn group(ex: &str, g: &str) -> BoundObject {
    map_object(format!("exercise/{ex}/group/{g}"))
}

pub fn sheet(ex: &str, s: &str) -> BoundObject {
    map_object(format!("exercise/{ex}/sheet/{s}"))
}

pub fn exercise_result(ex: &str, g: &str, sid: &str) -> BoundObject {
    map_object(format!("exercise/{ex}/group/{g}/result/{sid}"))
}

pub fn exam(e: &str) -> BoundObject {
    map_object(format!("exam/{e}"))
}

pub fn exam_result(e: &str, sid: &str) -> BoundObject {
    map_object(format!("exam/{e}/result/{sid}"))
}

/// A parsed STATS object key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    System,
    Student { sid: String },
    Exercise { ex: String },
    Group { ex: String, g: String },
    Sheet { ex: String, s: String },
    ExerciseResult { ex: String, g: String, sid: String },
    Exam { e: String },
    ExamResult { e: String, sid: String },
}

impl Target {
    /// `None` for objects outside the schema.
    pub fn parse(object: &BoundObject) -> Option<Target> {
        if object.bucket != BUCKET.as_bytes() || object.crdt_type != CrdtType::Map {
            return None;
        }
        let key = std::str::from_utf8(&object.key).ok()?;
        let parts: Vec<&str> = key.split('/').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return None;
        }
        let s = |i: usize| parts[i].to_string();
        Some(match parts.as_slice() {
            ["system"] => Target::System,
            ["student", _] => Target::Student { sid: s(1) },
            ["exercise", _] => Target::Exercise { ex: s(1) },
            ["exercise", _, "group", _] => Target::Group { ex: s(1), g: s(3) },
            ["exercise", _, "sheet", _] => Target::Sheet { ex: s(1), s: s(3) },
            ["exercise", _, "group", _, "result", _] => Target::ExerciseResult {
                ex: s(1),
                g: s(3),
                sid: s(5),
            },
            ["exam", _] => Target::Exam { e: s(1) },
            ["exam", _, "result", _] => Target::ExamResult { e: s(1), sid: s(3) },
            _ => return None,
        })
    }
}

pub fn tokens(xs: &[&str]) -> Permissions {
    xs.iter().map(|x| x.as_bytes().to_vec()).collect()
}

/// Installs `admin` as the first administrator. Must run before any secured
/// transaction.
pub fn bootstrap(
    store: &mut SecureCluster,
    replica: ReplicaId,
    admin: &UserId,
) -> Result<Arc<TransactionCommit>, AclError> {
    store.bootstrap_policy(replica, &system(), admin, tokens(&[token::ADMIN]))
}

#[cfg(test)]
mod tests;
