//! Structural predicates over update operations.
//!
//! Decision procedures use these to describe which shape of update a user may
//! issue, e.g. "a map update touching only `participants`, adding or removing
//! exactly the caller's own id":
//!
//! ```
//! use causal_ac::constraints::*;
//! use causal_ac::crdt::UpdateOp;
//!
//! let me = "s42";
//! let may_participate = is_map_update(and([
//!     assigns_only(["participants"]),
//!     constrain_assigns([key_constrain(
//!         "participants",
//!         is_set_update(or([
//!             and([set_adds_only([me]), no_set_removes()]),
//!             and([set_removes_only([me]), no_set_adds()]),
//!         ])),
//!     )]),
//!     no_map_removes(),
//! ]));
//! let op = UpdateOp::map_update("participants", UpdateOp::set_add([me]));
//! assert!(may_participate.applies_to(&op));
//! ```
//!
//! Predicates that expect a different kind of update evaluate to `false`.
//!
//! # Text form
//!
//! Constraints print and parse with the grammar
//!
//! ```text
//! constraint := "true" | "false"
//!             | "noMapRemoves" | "noSetAdds" | "noSetRemoves"
//!             | ("and" | "or") "(" [constraint ("," constraint)*] ")"
//!             | ("isMapUpdate" | "isSetUpdate") "(" constraint ")"
//!             | ("assignsOnly" | "removesOnly" | "setAddsOnly" | "setRemovesOnly")
//!                   "(" [string ("," string)*] ")"
//!             | "constrainAssigns" "(" [keyConstrain ("," keyConstrain)*] ")"
//! keyConstrain := "keyConstrain" "(" string "," constraint ")"
//! string := '"' { printable ASCII except '"' and '\' | '\"' | '\\' | '\x' hex hex } '"'
//! ```
//!
//! Whitespace between tokens is ignored. String lists print in sorted order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::crdt::{Bytes, UpdateOp};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    True,
    False,
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
    IsMapUpdate(Box<Constraint>),
    IsSetUpdate(Box<Constraint>),
    /// Every updated map key is in the set.
    AssignsOnly(BTreeSet<Bytes>),
    /// Listed keys, when updated, must satisfy their nested constraint.
    ConstrainAssigns(Vec<KeyConstraint>),
    NoMapRemoves,
    /// Every removed map key is in the set.
    RemovesOnly(BTreeSet<Bytes>),
    SetAddsOnly(BTreeSet<Bytes>),
    SetRemovesOnly(BTreeSet<Bytes>),
    NoSetAdds,
    NoSetRemoves,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeyConstraint {
    pub key: Bytes,
    pub inner: Constraint,
}

impl Constraint {
    pub fn applies_to(&self, op: &UpdateOp) -> bool {
        match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::And(cs) => cs.iter().all(|c| c.applies_to(op)),
            Constraint::Or(cs) => cs.iter().any(|c| c.applies_to(op)),
            Constraint::IsMapUpdate(inner) => matches!(op, UpdateOp::Map { .. }) && inner.applies_to(op),
            Constraint::IsSetUpdate(inner) => matches!(op, UpdateOp::Set { .. }) && inner.applies_to(op),
            Constraint::AssignsOnly(keys) => match op {
                UpdateOp::Map { updates, .. } => updates.keys().all(|k| keys.contains(k)),
                _ => false,
            },
            Constraint::ConstrainAssigns(kcs) => match op {
                UpdateOp::Map { updates, .. } => kcs
                    .iter()
                    .all(|kc| updates.get(&kc.key).is_none_or(|nested| kc.inner.applies_to(nested))),
                _ => false,
            },
            Constraint::NoMapRemoves => matches!(op, UpdateOp::Map { removes, .. } if removes.is_empty()),
            Constraint::RemovesOnly(keys) => match op {
                UpdateOp::Map { removes, .. } => removes.is_subset(keys),
                _ => false,
            },
            Constraint::SetAddsOnly(allowed) => match op {
                UpdateOp::Set { adds, .. } => adds.is_subset(allowed),
                _ => false,
            },
            Constraint::SetRemovesOnly(allowed) => match op {
                UpdateOp::Set { removes, .. } => removes.is_subset(allowed),
                _ => false,
            },
            Constraint::NoSetAdds => matches!(op, UpdateOp::Set { adds, .. } if adds.is_empty()),
            Constraint::NoSetRemoves => matches!(op, UpdateOp::Set { removes, .. } if removes.is_empty()),
        }
    }
}

fn byte_set<I, T>(items: I) -> BTreeSet<Bytes>
where
    I: IntoIterator<Item = T>,
    T: Into<Bytes>,
{
    items.into_iter().map(Into::into).collect()
}

pub fn and(cs: impl IntoIterator<Item = Constraint>) -> Constraint {
    Constraint::And(cs.into_iter().collect())
}

pub fn or(cs: impl IntoIterator<Item = Constraint>) -> Constraint {
    Constraint::Or(cs.into_iter().collect())
}

pub fn is_map_update(inner: Constraint) -> Constraint {
    Constraint::IsMapUpdate(Box::new(inner))
}

pub fn is_set_update(inner: Constraint) -> Constraint {
    Constraint::IsSetUpdate(Box::new(inner))
}

pub fn assigns_only<I: IntoIterator<Item = T>, T: Into<Bytes>>(keys: I) -> Constraint {
    Constraint::AssignsOnly(byte_set(keys))
}

pub fn removes_only<I: IntoIterator<Item = T>, T: Into<Bytes>>(keys: I) -> Constraint {
    Constraint::RemovesOnly(byte_set(keys))
}

pub fn constrain_assigns(kcs: impl IntoIterator<Item = KeyConstraint>) -> Constraint {
    Constraint::ConstrainAssigns(kcs.into_iter().collect())
}

pub fn key_constrain(key: impl Into<Bytes>, inner: Constraint) -> KeyConstraint {
    KeyConstraint { key: key.into(), inner }
}

pub fn no_map_removes() -> Constraint {
    Constraint::NoMapRemoves
}

pub fn set_adds_only<I: IntoIterator<Item = T>, T: Into<Bytes>>(elems: I) -> Constraint {
    Constraint::SetAddsOnly(byte_set(elems))
}

pub fn set_removes_only<I: IntoIterator<Item = T>, T: Into<Bytes>>(elems: I) -> Constraint {
    Constraint::SetRemovesOnly(byte_set(elems))
}

pub fn no_set_adds() -> Constraint {
    Constraint::NoSetAdds
}

pub fn no_set_removes() -> Constraint {
    Constraint::NoSetRemoves
}

fn write_bytes(f: &mut fmt::Formatter<'_>, bytes: &[u8]) -> fmt::Result {
    f.write_str("\"")?;
    for &b in bytes {
        match b {
            b'"' => f.write_str("\\\"")?,
            b'\\' => f.write_str("\\\\")?,
            0x20..=0x7e => write!(f, "{}", b as char)?,
            _ => write!(f, "\\x{b:02x}")?,
        }
    }
    f.write_str("\"")
}

fn write_list<T>(
    f: &mut fmt::Formatter<'_>,
    name: &str,
    items: impl IntoIterator<Item = T>,
    mut each: impl FnMut(&mut fmt::Formatter<'_>, T) -> fmt::Result,
) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        each(f, item)?;
    }
    f.write_str(")")
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::False => f.write_str("false"),
            Constraint::NoMapRemoves => f.write_str("noMapRemoves"),
            Constraint::NoSetAdds => f.write_str("noSetAdds"),
            Constraint::NoSetRemoves => f.write_str("noSetRemoves"),
            Constraint::And(cs) => write_list(f, "and", cs, |f, c| write!(f, "{c}")),
            Constraint::Or(cs) => write_list(f, "or", cs, |f, c| write!(f, "{c}")),
            Constraint::IsMapUpdate(c) => write!(f, "isMapUpdate({c})"),
            Constraint::IsSetUpdate(c) => write!(f, "isSetUpdate({c})"),
            Constraint::AssignsOnly(s) => write_list(f, "assignsOnly", s, |f, b| write_bytes(f, b)),
            Constraint::RemovesOnly(s) => write_list(f, "removesOnly", s, |f, b| write_bytes(f, b)),
            Constraint::SetAddsOnly(s) => write_list(f, "setAddsOnly", s, |f, b| write_bytes(f, b)),
            Constraint::SetRemovesOnly(s) => write_list(f, "setRemovesOnly", s, |f, b| write_bytes(f, b)),
            Constraint::ConstrainAssigns(kcs) => write_list(f, "constrainAssigns", kcs, |f, kc| {
                f.write_str("keyConstrain(")?;
                write_bytes(f, &kc.key)?;
                write!(f, ", {})", kc.inner)
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("constraint syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii"))
    }

    /// Parses `( [item ("," item)*] )`.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.err("expected ',' or ')'"),
            }
        }
    }

    fn string(&mut self) -> Result<Bytes, ParseError> {
        self.expect(b'"')?;
        let mut out = Vec::new();
        loop {
            let Some(&b) = self.src.get(self.pos) else {
                return self.err("unterminated string");
            };
            self.pos += 1;
            match b {
                b'"' => return Ok(out),
                b'\\' => {
                    let Some(&e) = self.src.get(self.pos) else {
                        return self.err("unterminated escape");
                    };
                    self.pos += 1;
                    match e {
                        b'"' | b'\\' => out.push(e),
                        b'x' => {
                            let hex = self
                                .src
                                .get(self.pos..self.pos + 2)
                                .and_then(|h| std::str::from_utf8(h).ok())
                                .and_then(|h| u8::from_str_radix(h, 16).ok());
                            match hex {
                                Some(v) => {
                                    out.push(v);
                                    self.pos += 2;
                                }
                                None => return self.err("bad \\x escape"),
                            }
                        }
                        _ => return self.err("unknown escape"),
                    }
                }
                _ => out.push(b),
            }
        }
    }

    fn key_constraint(&mut self) -> Result<KeyConstraint, ParseError> {
        if self.ident()? != "keyConstrain" {
            return self.err("expected keyConstrain");
        }
        self.expect(b'(')?;
        let key = self.string()?;
        self.expect(b',')?;
        let inner = self.constraint()?;
        self.expect(b')')?;
        Ok(KeyConstraint { key, inner })
    }

    fn constraint(&mut self) -> Result<Constraint, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let name = self.ident()?;
        let c = match name {
            "true" => Constraint::True,
            "false" => Constraint::False,
            "noMapRemoves" => Constraint::NoMapRemoves,
            "noSetAdds" => Constraint::NoSetAdds,
            "noSetRemoves" => Constraint::NoSetRemoves,
            "and" => Constraint::And(self.list(Self::constraint)?),
            "or" => Constraint::Or(self.list(Self::constraint)?),
            "isMapUpdate" | "isSetUpdate" => {
                self.expect(b'(')?;
                let inner = Box::new(self.constraint()?);
                self.expect(b')')?;
                if name == "isMapUpdate" {
                    Constraint::IsMapUpdate(inner)
                } else {
                    Constraint::IsSetUpdate(inner)
                }
            }
            "assignsOnly" => Constraint::AssignsOnly(self.list(Self::string)?.into_iter().collect()),
            "removesOnly" => Constraint::RemovesOnly(self.list(Self::string)?.into_iter().collect()),
            "setAddsOnly" => Constraint::SetAddsOnly(self.list(Self::string)?.into_iter().collect()),
            "setRemovesOnly" => Constraint::SetRemovesOnly(self.list(Self::string)?.into_iter().collect()),
            "constrainAssigns" => Constraint::ConstrainAssigns(self.list(Self::key_constraint)?),
            other => {
                self.pos = start;
                return self.err(format!("unknown combinator '{other}'"));
            }
        };
        Ok(c)
    }
}

impl FromStr for Constraint {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let c = p.constraint()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(c)
    }
}
