//! Reuse decisions: direct reuse of dead cells by constructions, indirect
//! reuse through callee reuse versions, version splitting and annotation.

mod direct;
mod indirect;
mod versions;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataflow::{condition_text, DeadCellInfo, ReuseCondition};
use crate::ir::{Functor, Point, Var};

pub use direct::decide_direct;
pub use indirect::decide_indirect;
pub use versions::{annotate, decide_module, split_versions, ModuleReuse, ProcReuse};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReuseConstraint {
    MatchingArities,
    /// The dead cell may be up to `k` words larger than the new one.
    WithinK(usize),
    LabelPreserving,
}

/// Upper bound accepted for `within:K`.
pub const MAX_WITHIN_K: usize = 8;

impl fmt::Display for ReuseConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReuseConstraint::MatchingArities => f.write_str("match"),
            ReuseConstraint::WithinK(k) => write!(f, "within:{k}"),
            ReuseConstraint::LabelPreserving => f.write_str("same-cons"),
        }
    }
}

impl FromStr for ReuseConstraint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "match" => Ok(ReuseConstraint::MatchingArities),
            "same-cons" => Ok(ReuseConstraint::LabelPreserving),
            _ => {
                let k = s
                    .strip_prefix("within:")
                    .ok_or_else(|| format!("unknown constraint `{s}` (expected match, within:K or same-cons)"))?;
                let k: usize = k.parse().map_err(|_| format!("bad K in `{s}`"))?;
                if !(1..=MAX_WITHIN_K).contains(&k) {
                    return Err(format!("K must be between 1 and {MAX_WITHIN_K}, got {k}"));
                }
                Ok(ReuseConstraint::WithinK(k))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionStrategy {
    Lifo,
    Random(u64),
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionStrategy::Lifo => f.write_str("lifo"),
            SelectionStrategy::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

/// May the cell released by `dead` hold a new `functor` cell of `size`
/// words?
pub fn constraint_admits(c: ReuseConstraint, dead: &DeadCellInfo, functor: &Functor, size: usize) -> bool {
    match c {
        ReuseConstraint::MatchingArities => dead.size == size,
        ReuseConstraint::WithinK(k) => dead.size >= size && dead.size - size <= k,
        ReuseConstraint::LabelPreserving => dead.functor == *functor,
    }
}

/// A construction that builds its term in a dead cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectReuse {
    pub construct: Point,
    pub decon: Point,
    pub dead_functor: Functor,
    pub new_functor: Functor,
    /// Words of the dead cell left unused by the new term.
    pub leaked: usize,
    pub condition: ReuseCondition,
}

/// A call redirected to the callee's reuse version.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndirectReuse {
    pub call: Point,
    pub callee: String,
    /// Caller head datastructures that must be dead for the substitution
    /// to be safe.
    pub condition: ReuseCondition,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseAssignment {
    pub direct: Vec<DirectReuse>,
    pub indirect: Vec<IndirectReuse>,
    /// Union of the conditions of every reuse above.
    pub condition: ReuseCondition,
    /// Dead cells no construction takes.
    pub residual: Vec<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VersionKind {
    /// Unconditional reuses only; callable from anywhere.
    Plain,
    /// Every reuse; callable only when `conditions` hold.
    Reuse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcVersion {
    pub base: String,
    pub kind: VersionKind,
    pub assignment: ReuseAssignment,
    pub conditions: ReuseCondition,
}

pub fn reuse_name(base: &str) -> String {
    format!("{base}__r")
}

impl ProcVersion {
    pub fn name(&self) -> String {
        match self.kind {
            VersionKind::Plain => self.base.clone(),
            VersionKind::Reuse => reuse_name(&self.base),
        }
    }
}

/// What callers need to know about a procedure's versions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub heads: Vec<Var>,
    /// Conditions of the reuse version, if there is one.
    pub reuse_condition: Option<ReuseCondition>,
}

impl fmt::Display for DirectReuse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "reuse c@{} <- d@{} ({}, cond={})",
            self.construct,
            self.decon,
            self.dead_functor,
            condition_text(&self.condition)
        )
    }
}

impl fmt::Display for IndirectReuse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "indirect call@{} {} -> {} (cond={})",
            self.call,
            self.callee,
            reuse_name(&self.callee),
            condition_text(&self.condition)
        )
    }
}

/// Dead cells of one procedure indexed by deconstruction point.
pub(crate) fn dead_by_point(dead: &[DeadCellInfo]) -> BTreeMap<Point, &DeadCellInfo> {
    dead.iter().map(|d| (d.point, d)).collect()
}

#[cfg(test)]
mod tests;
