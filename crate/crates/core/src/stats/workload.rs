use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acl::{AclCounters, AclError, DecisionProcedure, SecureCluster, SecuredTransaction, UserId};
use crate::crdt::{Permissions, ReplicaId, UpdateOp};
use crate::store::BoundObject;

use super::{exam, exam_result, exercise, exercise_result, field, group, sheet, student, system, token, tokens};

/// Datastore reads of the captured history.
pub const SEMESTER_READS: u64 = 102_861;
/// Datastore updates of the captured history.
pub const SEMESTER_UPDATES: u64 = 32_991;
pub const SEMESTER_TOTAL_OPS: u64 = SEMESTER_READS + SEMESTER_UPDATES;

const TASKS_PER_EXAM: usize = 4;

/// Size of a generated history. Counts of zero are treated as one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub students: usize,
    pub exercises: usize,
    pub groups_per_exercise: usize,
    pub sheets_per_exercise: usize,
    pub exams: usize,
    /// Approximate number of datastore operations (reads plus updates).
    pub target_ops: usize,
    pub seed: u64,
}

impl WorkloadConfig {
    /// Derives entity counts for a history of about `target_ops` operations.
    pub fn with_target_ops(target_ops: usize, seed: u64) -> Self {
        let scale = target_ops as f64 / SEMESTER_TOTAL_OPS as f64;
        let students = (target_ops / 250).max(6);
        let exercises = ((4.0 * scale).round() as usize).max(1);
        let per_exercise = students * 3 / 4;
        WorkloadConfig {
            students,
            exercises,
            groups_per_exercise: (per_exercise / 20).max(2),
            sheets_per_exercise: (target_ops / 100).clamp(2, 12),
            exams: ((6.0 * scale).round() as usize).max(1),
            target_ops,
            seed,
        }
    }

    /// `scale` relative to the captured history of 135,852 operations.
    pub fn scaled(scale: f64, seed: u64) -> Self {
        Self::with_target_ops((scale * SEMESTER_TOTAL_OPS as f64).round() as usize, seed)
    }

    pub fn scale(&self) -> f64 {
        self.target_ops as f64 / SEMESTER_TOTAL_OPS as f64
    }
}

/// One application-level action. Serialized as the `action` name and a
/// `payload` object.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", rename_all = "snake_case")]
pub enum AppAction {
    RegisterUser {
        user: String,
        role: String,
    },
    CreateAccount {
        sid: String,
        name: String,
        email: String,
    },
    CreateExercise {
        ex: String,
        title: String,
    },
    AssignAssistant {
        ex: String,
        user: String,
    },
    CreateGroup {
        ex: String,
        g: String,
        slot: String,
        day: String,
        location: String,
    },
    CreateSheet {
        ex: String,
        s: String,
        title: String,
        max_points: u32,
    },
    AssignTutor {
        ex: String,
        g: String,
        user: String,
    },
    SetExerciseRegistration {
        ex: String,
        open: bool,
    },
    RegisterForExercise {
        ex: String,
        sid: String,
    },
    JoinGroup {
        ex: String,
        g: String,
        sid: String,
    },
    LeaveGroup {
        ex: String,
        g: String,
        sid: String,
    },
    AssignTeam {
        ex: String,
        g: String,
        sid: String,
        team: String,
    },
    EnterPoints {
        ex: String,
        g: String,
        sid: String,
        s: String,
        points: u32,
    },
    CreateExam {
        e: String,
        title: String,
    },
    AssignExaminer {
        e: String,
        user: String,
    },
    AddExamTask {
        e: String,
        task: String,
    },
    SetExamRegistration {
        e: String,
        open: bool,
    },
    RegisterForExam {
        e: String,
        sid: String,
    },
    EnterExamResult {
        e: String,
        sid: String,
        task: String,
        points: u32,
    },
    PublishExam {
        e: String,
    },
    ViewProfile {
        sid: String,
    },
    ViewExercise {
        ex: String,
    },
    ViewGroup {
        ex: String,
        g: String,
    },
    ViewOwnResult {
        ex: String,
        g: String,
        sid: String,
    },
    ViewGroupResults {
        ex: String,
        g: String,
        students: Vec<String>,
    },
    ViewExamResult {
        e: String,
        sid: String,
    },
}

/// An action with the user issuing it. One JSON line per operation with the
/// fields `actor`, `target`, `action`, `payload`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppOperation {
    pub actor: String,
    /// Key of the main object the action touches.
    pub target: String,
    #[serde(flatten)]
    pub action: AppAction,
}

impl AppOperation {
    pub fn new(actor: impl Into<String>, action: AppAction) -> Self {
        let target = String::from_utf8_lossy(&action.target().key).into_owned();
        AppOperation {
            actor: actor.into(),
            target,
            action,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("operation serializes")
    }

    pub fn from_json(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line)
    }
}

impl AppAction {
    pub fn target(&self) -> BoundObject {
        use AppAction::*;
        match self {
            RegisterUser { .. } => system(),
            CreateAccount { sid, .. } | ViewProfile { sid } => student(sid),
            CreateExercise { ex, .. }
            | AssignAssistant { ex, .. }
            | SetExerciseRegistration { ex, .. }
            | RegisterForExercise { ex, .. }
            | ViewExercise { ex } => exercise(ex),
            CreateSheet { ex, s, .. } => sheet(ex, s),
            CreateGroup { ex, g, .. }
            | AssignTutor { ex, g, .. }
            | JoinGroup { ex, g, .. }
            | LeaveGroup { ex, g, .. }
            | AssignTeam { ex, g, .. }
            | ViewGroup { ex, g }
            | ViewGroupResults { ex, g, .. } => group(ex, g),
            EnterPoints { ex, g, sid, .. } | ViewOwnResult { ex, g, sid } => exercise_result(ex, g, sid),
            CreateExam { e, .. }
            | AssignExaminer { e, .. }
            | AddExamTask { e, .. }
            | SetExamRegistration { e, .. }
            | RegisterForExam { e, .. }
            | PublishExam { e } => exam(e),
            EnterExamResult { e, sid, .. } | ViewExamResult { e, sid } => exam_result(e, sid),
        }
    }

    pub fn is_view(&self) -> bool {
        use AppAction::*;
        matches!(
            self,
            ViewProfile { .. }
                | ViewExercise { .. }
                | ViewGroup { .. }
                | ViewOwnResult { .. }
                | ViewGroupResults { .. }
                | ViewExamResult { .. }
        )
    }
}

/// One datastore operation of an expanded action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Read(BoundObject),
    Update(BoundObject, UpdateOp),
    ReadPolicy(BoundObject, UserId),
    AssignPolicy(BoundObject, UserId, Permissions),
}

impl Step {
    pub fn is_read(&self) -> bool {
        matches!(self, Step::Read(_) | Step::ReadPolicy(..))
    }
}

fn uid(s: &str) -> UserId {
    UserId::new(s).expect("generated ids are non-empty")
}

fn set_add(name: &str, elem: &str) -> UpdateOp {
    UpdateOp::map_update(name, UpdateOp::set_add([elem]))
}

fn set_remove(name: &str, elem: &str) -> UpdateOp {
    UpdateOp::map_update(name, UpdateOp::set_remove([elem]))
}

fn assign(name: &str, value: impl Into<Vec<u8>>) -> UpdateOp {
    UpdateOp::map_update(name, UpdateOp::assign(value))
}

fn assign_all<'a>(fields: impl IntoIterator<Item = (&'a str, String)>) -> UpdateOp {
    UpdateOp::map_updates(fields.into_iter().map(|(k, v)| (k, UpdateOp::assign(v))))
}

fn flag(name: &str, on: bool) -> UpdateOp {
    UpdateOp::map_update(name, UpdateOp::FlagSet(on))
}

/// The datastore operations an action consists of, in issue order. Reads
/// before updates model the application's consistency checks.
pub fn plan(action: &AppAction) -> Vec<Step> {
    use AppAction::*;
    use Step::*;
    match action {
        RegisterUser { user, role } => vec![
            ReadPolicy(system(), uid(user)),
            AssignPolicy(system(), uid(user), tokens(&[role])),
        ],
        CreateAccount { sid, name, email } => vec![
            Read(student(sid)),
            Update(
                student(sid),
                assign_all([
                    (field::NAME, name.clone()),
                    (field::EMAIL, email.clone()),
                    (field::SID, sid.clone()),
                ]),
            ),
        ],
        CreateExercise { ex, title } => vec![
            Read(exercise(ex)),
            Update(exercise(ex), assign(field::TITLE, title.as_str())),
        ],
        AssignAssistant { ex, user } => vec![
            Read(exercise(ex)),
            ReadPolicy(exercise(ex), uid(user)),
            AssignPolicy(exercise(ex), uid(user), tokens(&[token::ASSISTANT])),
        ],
        CreateGroup {
            ex,
            g,
            slot,
            day,
            location,
        } => vec![
            Read(exercise(ex)),
            Read(group(ex, g)),
            Update(
                group(ex, g),
                assign_all([
                    (field::SLOT, slot.clone()),
                    (field::DAY, day.clone()),
                    (field::LOCATION, location.clone()),
                ]),
            ),
            Update(exercise(ex), set_add(field::GROUPS, g)),
        ],
        CreateSheet {
            ex,
            s,
            title,
            max_points,
        } => vec![
            Read(exercise(ex)),
            Update(
                sheet(ex, s),
                assign_all([
                    (field::TITLE, title.clone()),
                    (field::MAX_POINTS, max_points.to_string()),
                ]),
            ),
            Update(exercise(ex), set_add(field::SHEETS, s)),
        ],
        AssignTutor { ex, g, user } => vec![
            Read(group(ex, g)),
            ReadPolicy(group(ex, g), uid(user)),
            AssignPolicy(group(ex, g), uid(user), tokens(&[token::TUTOR])),
            Update(group(ex, g), set_add(field::TUTORS, user)),
        ],
        SetExerciseRegistration { ex, open } => {
            vec![
                Read(exercise(ex)),
                Update(exercise(ex), flag(field::REGISTRATION_OPEN, *open)),
            ]
        }
        RegisterForExercise { ex, sid } => vec![
            Read(exercise(ex)),
            Read(student(sid)),
            Update(exercise(ex), set_add(field::PARTICIPANTS, sid)),
        ],
        JoinGroup { ex, g, sid } => vec![
            Read(exercise(ex)),
            Read(group(ex, g)),
            Update(group(ex, g), set_add(field::MEMBERS, sid)),
        ],
        LeaveGroup { ex, g, sid } => vec![
            Read(exercise(ex)),
            Read(group(ex, g)),
            Update(group(ex, g), set_remove(field::MEMBERS, sid)),
        ],
        AssignTeam { ex, g, sid, team } => vec![
            Read(group(ex, g)),
            Update(
                group(ex, g),
                UpdateOp::map_update(field::TEAMS, assign(sid, team.as_str())),
            ),
        ],
        EnterPoints { ex, g, sid, s, points } => vec![
            Read(group(ex, g)),
            Read(sheet(ex, s)),
            Read(exercise_result(ex, g, sid)),
            Update(exercise_result(ex, g, sid), assign(s, points.to_string())),
        ],
        CreateExam { e, title } => vec![Read(exam(e)), Update(exam(e), assign(field::TITLE, title.as_str()))],
        AssignExaminer { e, user } => vec![
            Read(exam(e)),
            ReadPolicy(exam(e), uid(user)),
            AssignPolicy(exam(e), uid(user), tokens(&[token::EXAMINER])),
        ],
        AddExamTask { e, task } => vec![Read(exam(e)), Update(exam(e), set_add(field::TASKS, task))],
        SetExamRegistration { e, open } => vec![Read(exam(e)), Update(exam(e), flag(field::REGISTRATION_OPEN, *open))],
        RegisterForExam { e, sid } => vec![Read(exam(e)), Update(exam(e), set_add(field::PARTICIPANTS, sid))],
        EnterExamResult { e, sid, task, points } => vec![
            Read(exam(e)),
            Read(exam_result(e, sid)),
            Update(exam_result(e, sid), assign(task, points.to_string())),
        ],
        PublishExam { e } => vec![Read(exam(e)), Update(exam(e), flag(field::PUBLISHED, true))],
        ViewProfile { sid } => vec![Read(student(sid))],
        ViewExercise { ex } => vec![Read(exercise(ex))],
        ViewGroup { ex, g } => vec![Read(exercise(ex)), Read(group(ex, g))],
        ViewOwnResult { ex, g, sid } => vec![
            Read(exercise(ex)),
            Read(group(ex, g)),
            Read(exercise_result(ex, g, sid)),
        ],
        ViewGroupResults { ex, g, students } => std::iter::once(Read(group(ex, g)))
            .chain(students.iter().map(|sid| Read(exercise_result(ex, g, sid))))
            .collect(),
        ViewExamResult { e, sid } => vec![Read(exam(e)), Read(exam_result(e, sid))],
    }
}

/// Issues every step of `op` in `stx`. Stops at the first error; the caller
/// decides whether to commit or abort.
pub fn apply_app_operation<P: DecisionProcedure>(
    store: &mut SecureCluster,
    stx: &mut SecuredTransaction<'_, P>,
    op: &AppOperation,
) -> Result<(), AclError> {
    for step in plan(&op.action) {
        match step {
            Step::Read(object) => {
                store.read(stx, &object)?;
            }
            Step::Update(object, update) => store.update(stx, &object, update)?,
            Step::ReadPolicy(object, user) => {
                store.read_policy(stx, &object, &user)?;
            }
            Step::AssignPolicy(object, user, perms) => store.assign_policy(stx, &object, &user, perms)?,
        }
    }
    Ok(())
}

/// Runs `op` in its own secured transaction issued by its actor at
/// `replica`. Commits on success and aborts on any error. Returns the
/// transaction's monitor counters alongside the outcome.
pub fn run_operation<P: DecisionProcedure<UserData = ()>>(
    store: &mut SecureCluster,
    replica: ReplicaId,
    procedure: &P,
    op: &AppOperation,
) -> (Result<(), AclError>, AclCounters) {
    let user = match UserId::new(op.actor.as_str()) {
        Ok(u) => u,
        Err(e) => return (Err(e), AclCounters::default()),
    };
    let mut stx = match store.start(replica, user, procedure, ()) {
        Ok(stx) => stx,
        Err(e) => return (Err(e), AclCounters::default()),
    };
    let outcome = apply_app_operation(store, &mut stx, op);
    let finish = match outcome {
        Ok(()) => store.commit(&mut stx).map(|_| ()),
        Err(_) => store.abort(&mut stx),
    };
    let counters = *stx.counters();
    (outcome.and(finish), counters)
}

/// Datastore operation counts of a workload.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WorkloadMix {
    pub actions: u64,
    pub reads: u64,
    pub updates: u64,
}

impl WorkloadMix {
    pub fn total(&self) -> u64 {
        self.reads + self.updates
    }

    pub fn ratio(&self) -> f64 {
        self.reads as f64 / self.updates.max(1) as f64
    }

    fn add(&mut self, action: &AppAction) {
        self.actions += 1;
        for step in plan(action) {
            if step.is_read() {
                self.reads += 1;
            } else {
                self.updates += 1;
            }
        }
    }
}

pub fn workload_mix(ops: &[AppOperation]) -> WorkloadMix {
    let mut mix = WorkloadMix::default();
    for op in ops {
        mix.add(&op.action);
    }
    mix
}

/// What the history has created so far, for choosing valid view actions.
#[derive(Default)]
struct Catalog {
    accounts: Vec<String>,
    exercises: Vec<String>,
    groups: Vec<(String, String)>,
    tutors: BTreeMap<(String, String), String>,
    members: BTreeMap<(String, String), Vec<String>>,
    memberships: Vec<(String, String, String)>,
    exam_participants: BTreeMap<String, Vec<String>>,
    examiners: BTreeMap<String, String>,
    published: Vec<String>,
}

impl Catalog {
    fn observe(&mut self, op: &AppOperation) {
        use AppAction::*;
        match &op.action {
            CreateAccount { sid, .. } => self.accounts.push(sid.clone()),
            CreateExercise { ex, .. } => self.exercises.push(ex.clone()),
            CreateGroup { ex, g, .. } => self.groups.push((ex.clone(), g.clone())),
            AssignTutor { ex, g, user } => {
                self.tutors.insert((ex.clone(), g.clone()), user.clone());
            }
            JoinGroup { ex, g, sid } => {
                self.members
                    .entry((ex.clone(), g.clone()))
                    .or_default()
                    .push(sid.clone());
                self.memberships.push((ex.clone(), g.clone(), sid.clone()));
            }
            LeaveGroup { ex, g, sid } => {
                if let Some(m) = self.members.get_mut(&(ex.clone(), g.clone())) {
                    m.retain(|s| s != sid);
                }
                self.memberships.retain(|(e, gg, s)| !(e == ex && gg == g && s == sid));
            }
            AssignExaminer { e, user } => {
                self.examiners.insert(e.clone(), user.clone());
            }
            RegisterForExam { e, sid } => self.exam_participants.entry(e.clone()).or_default().push(sid.clone()),
            PublishExam { e } => self.published.push(e.clone()),
            _ => {}
        }
    }

    /// A random read-only action some user may issue now.
    fn view(&self, rng: &mut ChaCha8Rng) -> Option<AppOperation> {
        for _ in 0..8 {
            let candidate = match rng.gen_range(0..10) {
                0 => self
                    .accounts
                    .choose(rng)
                    .map(|sid| AppOperation::new(sid.clone(), AppAction::ViewProfile { sid: sid.clone() })),
                1 => match (self.exercises.choose(rng), self.accounts.choose(rng)) {
                    (Some(ex), Some(sid)) => Some(AppOperation::new(
                        sid.clone(),
                        AppAction::ViewExercise { ex: ex.clone() },
                    )),
                    _ => None,
                },
                2 | 3 => self.memberships.choose(rng).map(|(ex, g, sid)| {
                    AppOperation::new(
                        sid.clone(),
                        AppAction::ViewGroup {
                            ex: ex.clone(),
                            g: g.clone(),
                        },
                    )
                }),
                4..=6 => self.memberships.choose(rng).map(|(ex, g, sid)| {
                    AppOperation::new(
                        sid.clone(),
                        AppAction::ViewOwnResult {
                            ex: ex.clone(),
                            g: g.clone(),
                            sid: sid.clone(),
                        },
                    )
                }),
                7 => self.groups.choose(rng).and_then(|(ex, g)| {
                    let key = (ex.clone(), g.clone());
                    let tutor = self.tutors.get(&key)?;
                    let students = self.members.get(&key).cloned().unwrap_or_default();
                    Some(AppOperation::new(
                        tutor.clone(),
                        AppAction::ViewGroupResults {
                            ex: ex.clone(),
                            g: g.clone(),
                            students,
                        },
                    ))
                }),
                _ => self.published.choose(rng).and_then(|e| {
                    let sid = self.exam_participants.get(e)?.choose(rng)?;
                    Some(AppOperation::new(
                        sid.clone(),
                        AppAction::ViewExamResult {
                            e: e.clone(),
                            sid: sid.clone(),
                        },
                    ))
                }),
            };
            if candidate.is_some() {
                return candidate;
            }
        }
        None
    }
}

struct Ids;

impl Ids {
    const ADMIN: &'static str = "admin";

    fn student(i: usize) -> String {
        format!("s{:05}", i + 1)
    }
    fn exercise(i: usize) -> String {
        format!("ex{}", i + 1)
    }
    fn assistant(i: usize) -> String {
        format!("assistant{}", i + 1)
    }
    fn group(i: usize) -> String {
        format!("g{}", i + 1)
    }
    fn tutor(ex: usize, g: usize) -> String {
        format!("tutor{}-{}", ex + 1, g + 1)
    }
    fn sheet(i: usize) -> String {
        format!("sheet{:02}", i + 1)
    }
    fn exam(i: usize) -> String {
        format!("exam{}", i + 1)
    }
    fn examiner(i: usize) -> String {
        format!("examiner{}", i + 1)
    }
    fn task(i: usize) -> String {
        format!("task{}", i + 1)
    }
}

const DAYS: [&str; 5] = ["mon", "tue", "wed", "thu", "fri"];
const SLOTS: [&str; 4] = ["08:15", "10:00", "11:45", "13:45"];
const ROOMS: [&str; 6] = ["48-208", "48-210", "46-268", "42-110", "11-201", "52-207"];
const NAMES: [&str; 10] = ["ada", "bo", "cy", "dee", "eli", "fay", "gus", "hal", "ivy", "jo"];

/// Generates a history of application actions: account creation, role
/// grants, exercise and group registration, team and point entry, and the
/// exam lifecycle. View actions are interleaved to keep the datastore
/// read:update ratio at the captured history's level. Deterministic in the
/// configuration; every action is allowed for its actor under
/// [`super::StatsPolicy`] when replayed in order on one replica.
pub fn generate_workload(cfg: &WorkloadConfig) -> Vec<AppOperation> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let students = cfg.students.max(1);
    let exercises = cfg.exercises.max(1);
    let groups = cfg.groups_per_exercise.max(1);
    let sheets = cfg.sheets_per_exercise.max(1);
    let exams = cfg.exams.max(1);

    let mut setup = Vec::new();
    let push = |list: &mut Vec<AppOperation>, actor: &str, action: AppAction| {
        list.push(AppOperation::new(actor, action));
    };
    let admin = Ids::ADMIN;

    for ex in 0..exercises {
        push(
            &mut setup,
            admin,
            AppAction::RegisterUser {
                user: Ids::assistant(ex),
                role: token::STAFF.into(),
            },
        );
        for g in 0..groups {
            push(
                &mut setup,
                admin,
                AppAction::RegisterUser {
                    user: Ids::tutor(ex, g),
                    role: token::STAFF.into(),
                },
            );
        }
    }
    for e in 0..exams {
        push(
            &mut setup,
            admin,
            AppAction::RegisterUser {
                user: Ids::examiner(e),
                role: token::STAFF.into(),
            },
        );
    }
    for i in 0..students {
        let sid = Ids::student(i);
        push(
            &mut setup,
            admin,
            AppAction::RegisterUser {
                user: sid.clone(),
                role: token::STUDENT.into(),
            },
        );
        let name = format!(
            "{} {}",
            NAMES[rng.gen_range(0..NAMES.len())],
            NAMES[rng.gen_range(0..NAMES.len())]
        );
        push(
            &mut setup,
            &sid,
            AppAction::CreateAccount {
                sid: sid.clone(),
                name,
                email: format!("{sid}@uni.example"),
            },
        );
    }

    // Exercises: creation, staff, groups, sheets, registration window.
    let mut group_members: Vec<Vec<Vec<String>>> = vec![vec![Vec::new(); groups]; exercises];
    for (ex, groups_of_ex) in group_members.iter_mut().enumerate() {
        let ex_id = Ids::exercise(ex);
        let asst = Ids::assistant(ex);
        push(
            &mut setup,
            admin,
            AppAction::CreateExercise {
                ex: ex_id.clone(),
                title: format!("Exercise {}", ex + 1),
            },
        );
        push(
            &mut setup,
            admin,
            AppAction::AssignAssistant {
                ex: ex_id.clone(),
                user: asst.clone(),
            },
        );
        for g in 0..groups {
            push(
                &mut setup,
                &asst,
                AppAction::CreateGroup {
                    ex: ex_id.clone(),
                    g: Ids::group(g),
                    slot: SLOTS[rng.gen_range(0..SLOTS.len())].into(),
                    day: DAYS[rng.gen_range(0..DAYS.len())].into(),
                    location: ROOMS[rng.gen_range(0..ROOMS.len())].into(),
                },
            );
            push(
                &mut setup,
                &asst,
                AppAction::AssignTutor {
                    ex: ex_id.clone(),
                    g: Ids::group(g),
                    user: Ids::tutor(ex, g),
                },
            );
        }
        for s in 0..sheets {
            push(
                &mut setup,
                &asst,
                AppAction::CreateSheet {
                    ex: ex_id.clone(),
                    s: Ids::sheet(s),
                    title: format!("Sheet {}", s + 1),
                    max_points: 20,
                },
            );
        }
        push(
            &mut setup,
            &asst,
            AppAction::SetExerciseRegistration {
                ex: ex_id.clone(),
                open: true,
            },
        );
        let mut order: Vec<usize> = (0..students).collect();
        order.shuffle(&mut rng);
        for (n, &i) in order.iter().enumerate() {
            // Every student takes at least one exercise.
            if i % exercises != ex && !rng.gen_bool(0.6) {
                continue;
            }
            let sid = Ids::student(i);
            push(
                &mut setup,
                &sid,
                AppAction::RegisterForExercise {
                    ex: ex_id.clone(),
                    sid: sid.clone(),
                },
            );
            let mut g = n % groups;
            if groups > 1 && rng.gen_bool(0.1) {
                // Changes their mind once.
                push(
                    &mut setup,
                    &sid,
                    AppAction::JoinGroup {
                        ex: ex_id.clone(),
                        g: Ids::group(g),
                        sid: sid.clone(),
                    },
                );
                push(
                    &mut setup,
                    &sid,
                    AppAction::LeaveGroup {
                        ex: ex_id.clone(),
                        g: Ids::group(g),
                        sid: sid.clone(),
                    },
                );
                g = (g + 1) % groups;
            }
            push(
                &mut setup,
                &sid,
                AppAction::JoinGroup {
                    ex: ex_id.clone(),
                    g: Ids::group(g),
                    sid: sid.clone(),
                },
            );
            groups_of_ex[g].push(sid);
        }
        push(
            &mut setup,
            &asst,
            AppAction::SetExerciseRegistration {
                ex: ex_id.clone(),
                open: false,
            },
        );
        for (g, members) in groups_of_ex.iter().enumerate() {
            for (k, sid) in members.iter().enumerate() {
                push(
                    &mut setup,
                    &Ids::tutor(ex, g),
                    AppAction::AssignTeam {
                        ex: ex_id.clone(),
                        g: Ids::group(g),
                        sid: sid.clone(),
                        team: format!("team{}", k / 3 + 1),
                    },
                );
            }
        }
    }

    // Exams: creation, examiner, tasks, registration window.
    let mut exam_participants: Vec<Vec<String>> = vec![Vec::new(); exams];
    for (e, participants) in exam_participants.iter_mut().enumerate() {
        let e_id = Ids::exam(e);
        let examiner = Ids::examiner(e);
        push(
            &mut setup,
            admin,
            AppAction::CreateExam {
                e: e_id.clone(),
                title: format!("Exam {}", e + 1),
            },
        );
        push(
            &mut setup,
            admin,
            AppAction::AssignExaminer {
                e: e_id.clone(),
                user: examiner.clone(),
            },
        );
        for t in 0..TASKS_PER_EXAM {
            push(
                &mut setup,
                &examiner,
                AppAction::AddExamTask {
                    e: e_id.clone(),
                    task: Ids::task(t),
                },
            );
        }
        push(
            &mut setup,
            &examiner,
            AppAction::SetExamRegistration {
                e: e_id.clone(),
                open: true,
            },
        );
        for i in 0..students {
            if rng.gen_bool(0.7) {
                let sid = Ids::student(i);
                push(
                    &mut setup,
                    &sid,
                    AppAction::RegisterForExam {
                        e: e_id.clone(),
                        sid: sid.clone(),
                    },
                );
                participants.push(sid);
            }
        }
        push(
            &mut setup,
            &examiner,
            AppAction::SetExamRegistration {
                e: e_id.clone(),
                open: false,
            },
        );
    }

    // Grading and publication of exams.
    let mut closing = Vec::new();
    for (e, participants) in exam_participants.iter().enumerate() {
        let e_id = Ids::exam(e);
        let examiner = Ids::examiner(e);
        for sid in participants {
            for t in 0..TASKS_PER_EXAM {
                push(
                    &mut closing,
                    &examiner,
                    AppAction::EnterExamResult {
                        e: e_id.clone(),
                        sid: sid.clone(),
                        task: Ids::task(t),
                        points: rng.gen_range(0..=10),
                    },
                );
            }
        }
        push(&mut closing, &examiner, AppAction::PublishExam { e: e_id.clone() });
    }

    // Semester: points entry, cycling through sheets and re-grading once
    // every sheet is graded, until the update budget is used up.
    let target_updates =
        (cfg.target_ops as f64 / (1.0 + SEMESTER_READS as f64 / SEMESTER_UPDATES as f64)).round() as u64;
    let fixed_updates = workload_mix(&setup).updates + workload_mix(&closing).updates;
    let mut semester = Vec::new();
    let slots: Vec<(usize, usize, String)> = (0..exercises)
        .flat_map(|ex| {
            let gm = &group_members[ex];
            (0..groups).flat_map(move |g| gm[g].iter().map(move |sid| (ex, g, sid.clone())))
        })
        .collect();
    let mut updates = fixed_updates;
    let mut round = 0usize;
    while updates < target_updates && !slots.is_empty() {
        let s = round % sheets;
        for (ex, g, sid) in &slots {
            if updates >= target_updates {
                break;
            }
            push(
                &mut semester,
                &Ids::tutor(*ex, *g),
                AppAction::EnterPoints {
                    ex: Ids::exercise(*ex),
                    g: Ids::group(*g),
                    sid: sid.clone(),
                    s: Ids::sheet(s),
                    points: rng.gen_range(0..=20),
                },
            );
            updates += 1;
        }
        round += 1;
    }

    let target_ratio = SEMESTER_READS as f64 / SEMESTER_UPDATES as f64;
    let mut out = Vec::new();
    let mut mix = WorkloadMix::default();
    let mut catalog = Catalog::default();
    for op in setup.into_iter().chain(semester).chain(closing) {
        mix.add(&op.action);
        catalog.observe(&op);
        out.push(op);
        while (mix.reads as f64) < target_ratio * mix.updates as f64 {
            let Some(view) = catalog.view(&mut rng) else { break };
            mix.add(&view.action);
            out.push(view);
        }
    }
    out
}
