use crate::acl::{AclError, SecureCluster, UserId};
use crate::crdt::ReplicaId;
use crate::store::{Cluster, Consistency};

use super::workload::{apply_app_operation, run_operation, AppAction, AppOperation, Step};
use super::{bootstrap, token, StatsPolicy};

const R0: ReplicaId = ReplicaId(0);

/// A small populated STATS store for probing individual decisions.
///
/// | user | role |
/// |------|------|
/// | `admin` | admin |
/// | `asst1`, `asst2` | assistant of `ex1`, `ex2` |
/// | `tut1`, `tut2` | tutor of `ex1/g1`, `ex1/g2` |
/// | `exm1`, `exm2` | examiner of `exam1`, `exam2` |
/// | `s1` | student in `ex1/g1`, registered for `exam1` |
/// | `s2` | student in `ex1/g2`, registered for `exam1` |
/// | `s3` | student without registrations |
/// | `nobody` | no role |
///
/// Both registration windows start closed and no exam is published.
pub struct PolicyFixture {
    store: SecureCluster,
    policy: StatsPolicy,
}

impl Default for PolicyFixture {
    fn default() -> Self {
        Self::new()
    }
}

fn op(actor: &str, action: AppAction) -> AppOperation {
    AppOperation::new(actor, action)
}

fn s(x: &str) -> String {
    x.to_string()
}

impl PolicyFixture {
    pub fn new() -> Self {
        let mut store = SecureCluster::new(Cluster::new(1, Consistency::Causal));
        bootstrap(&mut store, R0, &UserId::new("admin").unwrap()).unwrap();
        let mut fx = PolicyFixture {
            store,
            policy: StatsPolicy,
        };
        use AppAction::*;
        let mut setup = Vec::new();
        for u in ["asst1", "asst2", "tut1", "tut2", "exm1", "exm2"] {
            setup.push(op(
                "admin",
                RegisterUser {
                    user: s(u),
                    role: s(token::STAFF),
                },
            ));
        }
        for u in ["s1", "s2", "s3"] {
            setup.push(op(
                "admin",
                RegisterUser {
                    user: s(u),
                    role: s(token::STUDENT),
                },
            ));
            setup.push(op(
                u,
                CreateAccount {
                    sid: s(u),
                    name: format!("name of {u}"),
                    email: format!("{u}@uni.example"),
                },
            ));
        }
        for (ex, asst) in [("ex1", "asst1"), ("ex2", "asst2")] {
            setup.push(op(
                "admin",
                CreateExercise {
                    ex: s(ex),
                    title: s(ex),
                },
            ));
            setup.push(op(
                "admin",
                AssignAssistant {
                    ex: s(ex),
                    user: s(asst),
                },
            ));
            setup.push(op(
                asst,
                CreateSheet {
                    ex: s(ex),
                    s: s("sheet1"),
                    title: s("Sheet 1"),
                    max_points: 20,
                },
            ));
        }
        for (g, tut) in [("g1", "tut1"), ("g2", "tut2")] {
            setup.push(op(
                "asst1",
                CreateGroup {
                    ex: s("ex1"),
                    g: s(g),
                    slot: s("10:00"),
                    day: s("mon"),
                    location: s("48-208"),
                },
            ));
            setup.push(op(
                "asst1",
                AssignTutor {
                    ex: s("ex1"),
                    g: s(g),
                    user: s(tut),
                },
            ));
        }
        setup.push(op(
            "asst1",
            SetExerciseRegistration {
                ex: s("ex1"),
                open: true,
            },
        ));
        for (sid, g) in [("s1", "g1"), ("s2", "g2")] {
            setup.push(op(
                sid,
                RegisterForExercise {
                    ex: s("ex1"),
                    sid: s(sid),
                },
            ));
            setup.push(op(
                sid,
                JoinGroup {
                    ex: s("ex1"),
                    g: s(g),
                    sid: s(sid),
                },
            ));
        }
        setup.push(op(
            "asst1",
            SetExerciseRegistration {
                ex: s("ex1"),
                open: false,
            },
        ));
        for (e, exm) in [("exam1", "exm1"), ("exam2", "exm2")] {
            setup.push(op("admin", CreateExam { e: s(e), title: s(e) }));
            setup.push(op("admin", AssignExaminer { e: s(e), user: s(exm) }));
        }
        setup.push(op(
            "exm1",
            SetExamRegistration {
                e: s("exam1"),
                open: true,
            },
        ));
        for sid in ["s1", "s2"] {
            setup.push(op(
                sid,
                RegisterForExam {
                    e: s("exam1"),
                    sid: s(sid),
                },
            ));
        }
        setup.push(op(
            "exm1",
            SetExamRegistration {
                e: s("exam1"),
                open: false,
            },
        ));
        for o in &setup {
            fx.run(o).unwrap_or_else(|e| panic!("fixture setup {o:?}: {e}"));
        }
        fx
    }

    pub fn store(&self) -> &SecureCluster {
        &self.store
    }

    /// Runs and commits an action as its actor.
    pub fn run(&mut self, op: &AppOperation) -> Result<(), AclError> {
        run_operation(&mut self.store, R0, &self.policy, op).0
    }

    /// Whether every step of `action` would be allowed for `actor`. Nothing
    /// is committed.
    pub fn permits(&mut self, actor: &str, action: AppAction) -> bool {
        let op = AppOperation::new(actor, action);
        let user = UserId::new(actor).unwrap();
        let mut stx = self.store.start(R0, user, &self.policy, ()).unwrap();
        let outcome = apply_app_operation(&mut self.store, &mut stx, &op);
        self.store.abort(&mut stx).unwrap();
        match outcome {
            Ok(()) => true,
            Err(e) if e.is_denied() => false,
            Err(e) => panic!("{op:?}: {e}"),
        }
    }

    /// Whether a single datastore step would be allowed for `actor`.
    pub fn permits_step(&mut self, actor: &str, step: &Step) -> bool {
        let user = UserId::new(actor).unwrap();
        let mut stx = self.store.start(R0, user, &self.policy, ()).unwrap();
        let outcome = match step.clone() {
            Step::Read(o) => self.store.read(&mut stx, &o).map(|_| ()),
            Step::Update(o, u) => self.store.update(&mut stx, &o, u),
            Step::ReadPolicy(o, u) => self.store.read_policy(&mut stx, &o, &u).map(|_| ()),
            Step::AssignPolicy(o, u, p) => self.store.assign_policy(&mut stx, &o, &u, p),
        };
        self.store.abort(&mut stx).unwrap();
        match outcome {
            Ok(()) => true,
            Err(e) if e.is_denied() => false,
            Err(e) => panic!("{step:?}: {e}"),
        }
    }

    pub fn set_exercise_registration(&mut self, open: bool) {
        let o = op("admin", AppAction::SetExerciseRegistration { ex: s("ex1"), open });
        self.run(&o).unwrap();
    }

    pub fn set_exam_registration(&mut self, open: bool) {
        let o = op("admin", AppAction::SetExamRegistration { e: s("exam1"), open });
        self.run(&o).unwrap();
    }

    pub fn set_published(&mut self, published: bool) {
        use crate::crdt::UpdateOp;
        let user = UserId::new("admin").unwrap();
        let mut stx = self.store.start(R0, user, &self.policy, ()).unwrap();
        self.store
            .update(
                &mut stx,
                &super::exam("exam1"),
                UpdateOp::map_update(super::field::PUBLISHED, UpdateOp::FlagSet(published)),
            )
            .unwrap();
        self.store.commit(&mut stx).unwrap();
    }
}
