use crate::acl::{DecisionProcedure, LayerDefinition, SecurityLayers, UserId};
use crate::constraints::{
    and, assigns_only, constrain_assigns, is_map_update, is_set_update, key_constrain, no_map_removes, no_set_adds,
    no_set_removes, or, removes_only, set_adds_only, set_removes_only, Constraint,
};
use crate::crdt::{Permissions, ReadResult, UpdateOp};
use crate::store::BoundObject;

use super::{exam, exercise, field, group, system, token, Target};

const SYSTEM: &str = "system";
const EXERCISE: &str = "exercise";
const GROUP: &str = "group";
const EXAM: &str = "exam";

/// The STATS access-control policy.
///
/// Every decision requires a role token on the `system` object; `admin`
/// there allows everything. Other rights come from `assistant` on an
/// exercise, `tutor` on a group, `examiner` on an exam, and from the acting
/// user's student id matching the target.
#[derive(Clone, Copy, Debug, Default)]
pub struct StatsPolicy;

struct Ctx<'a> {
    user: &'a str,
    layers: &'a SecurityLayers,
}

impl Ctx<'_> {
    fn known(&self) -> bool {
        !self.layers.permissions(SYSTEM).is_empty()
    }

    fn admin(&self) -> bool {
        self.layers.has(SYSTEM, token::ADMIN)
    }

    fn student(&self) -> bool {
        self.layers.has(SYSTEM, token::STUDENT)
    }

    fn is(&self, sid: &str) -> bool {
        self.user == sid
    }

    fn assistant(&self) -> bool {
        self.layers.has(EXERCISE, token::ASSISTANT)
    }

    fn tutor(&self) -> bool {
        self.layers.has(GROUP, token::TUTOR)
    }

    fn examiner(&self) -> bool {
        self.layers.has(EXAM, token::EXAMINER)
    }

    fn value(&self, layer: &str) -> Option<&ReadResult> {
        self.layers.value(layer)
    }

    fn flag(&self, layer: &str, name: &str) -> bool {
        self.value(layer).is_some_and(|v| v.flag_field(name.as_bytes()))
    }

    fn members(&self) -> Vec<Vec<u8>> {
        self.value(GROUP)
            .map(|v| v.set_field(field::MEMBERS.as_bytes()).into_iter().collect())
            .unwrap_or_default()
    }
}

fn user_str(user: &UserId) -> String {
    String::from_utf8_lossy(user.as_bytes()).into_owned()
}

/// Add or remove exactly `me` in the set under `name`, nothing else.
pub(crate) fn self_membership(name: &str, me: &str) -> Constraint {
    is_map_update(and([
        assigns_only([name]),
        no_map_removes(),
        constrain_assigns([key_constrain(
            name,
            is_set_update(or([
                and([set_adds_only([me]), no_set_removes()]),
                and([set_removes_only([me]), no_set_adds()]),
            ])),
        )]),
    ]))
}

/// Team assignments restricted to current group members.
pub(crate) fn team_assignment(members: Vec<Vec<u8>>) -> Constraint {
    is_map_update(and([
        assigns_only([field::TEAMS]),
        no_map_removes(),
        constrain_assigns([key_constrain(
            field::TEAMS,
            is_map_update(and([assigns_only(members.clone()), removes_only(members)])),
        )]),
    ]))
}

fn own_account() -> Constraint {
    is_map_update(and([
        assigns_only([field::NAME, field::EMAIL, field::SID]),
        no_map_removes(),
    ]))
}

/// The constraint language cannot compare assigned values, so the `sid`
/// field is pinned here.
fn assigns_own_sid(op: &UpdateOp, me: &str) -> bool {
    match op {
        UpdateOp::Map { updates, .. } => match updates.get(field::SID.as_bytes()) {
            None => true,
            Some(UpdateOp::Assign(v)) => v == me.as_bytes(),
            Some(_) => false,
        },
        _ => false,
    }
}

impl DecisionProcedure for StatsPolicy {
    type UserData = ();

    fn requested_policies(&self, _: &UserId, object: &BoundObject) -> LayerDefinition {
        let def = LayerDefinition::new().layer(SYSTEM, system());
        match Target::parse(object) {
            Some(Target::Exercise { ex }) | Some(Target::Sheet { ex, .. }) => {
                def.layer_with_value(EXERCISE, exercise(&ex))
            }
            Some(Target::Group { ex, g }) | Some(Target::ExerciseResult { ex, g, .. }) => def
                .layer_with_value(EXERCISE, exercise(&ex))
                .layer_with_value(GROUP, group(&ex, &g)),
            Some(Target::Exam { e }) | Some(Target::ExamResult { e, .. }) => def.layer_with_value(EXAM, exam(&e)),
            _ => def,
        }
    }

    fn decide_read(&self, user: &UserId, object: &BoundObject, _: &(), layers: &SecurityLayers) -> bool {
        let me = user_str(user);
        let c = Ctx { user: &me, layers };
        if !c.known() {
            return false;
        }
        if c.admin() {
            return true;
        }
        match Target::parse(object) {
            None => false,
            Some(Target::System | Target::Exercise { .. } | Target::Group { .. } | Target::Sheet { .. }) => true,
            Some(Target::Exam { .. }) => true,
            Some(Target::Student { sid }) => c.is(&sid),
            Some(Target::ExerciseResult { sid, .. }) => c.assistant() || c.tutor() || c.is(&sid),
            Some(Target::ExamResult { sid, .. }) => c.examiner() || (c.is(&sid) && c.flag(EXAM, field::PUBLISHED)),
        }
    }

    fn decide_update(
        &self,
        user: &UserId,
        object: &BoundObject,
        op: &UpdateOp,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        let me = user_str(user);
        let c = Ctx { user: &me, layers };
        if !c.known() {
            return false;
        }
        if c.admin() {
            return true;
        }
        match Target::parse(object) {
            None | Some(Target::System) => false,
            Some(Target::Student { sid }) => {
                c.student() && c.is(&sid) && own_account().applies_to(op) && assigns_own_sid(op, &me)
            }
            Some(Target::Exercise { .. }) => {
                c.assistant() || (c.student() && self_membership(field::PARTICIPANTS, &me).applies_to(op))
            }
            Some(Target::Group { .. }) => {
                c.assistant()
                    || (c.tutor() && team_assignment(c.members()).applies_to(op))
                    || (c.student()
                        && c.flag(EXERCISE, field::REGISTRATION_OPEN)
                        && self_membership(field::MEMBERS, &me).applies_to(op))
            }
            Some(Target::Sheet { .. }) => c.assistant(),
            Some(Target::ExerciseResult { sid, .. }) => c.tutor() && c.members().contains(&sid.into_bytes()),
            Some(Target::Exam { .. }) => {
                c.examiner()
                    || (c.student()
                        && c.flag(EXAM, field::REGISTRATION_OPEN)
                        && self_membership(field::PARTICIPANTS, &me).applies_to(op))
            }
            Some(Target::ExamResult { .. }) => c.examiner(),
        }
    }

    fn decide_policy_read(
        &self,
        user: &UserId,
        object: &BoundObject,
        target: &UserId,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        let me = user_str(user);
        let c = Ctx { user: &me, layers };
        if !c.known() {
            return false;
        }
        if c.admin() || user == target {
            return true;
        }
        match Target::parse(object) {
            Some(Target::Exercise { .. } | Target::Group { .. }) => c.assistant(),
            _ => false,
        }
    }

    fn decide_policy_assign(
        &self,
        user: &UserId,
        object: &BoundObject,
        _: &UserId,
        new: &Permissions,
        old: &Permissions,
        _: &(),
        layers: &SecurityLayers,
    ) -> bool {
        let me = user_str(user);
        let c = Ctx { user: &me, layers };
        if !c.known() {
            return false;
        }
        if c.admin() {
            return true;
        }
        // Assistants hand out and take back the tutor role on their groups.
        matches!(Target::parse(object), Some(Target::Group { .. }))
            && c.assistant()
            && new
                .symmetric_difference(old)
                .all(|t| t.as_slice() == token::TUTOR.as_bytes())
    }
}
