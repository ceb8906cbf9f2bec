//! Alias propagation under the default call pattern, forward use, dead
//! cell detection and the per-SCC fixpoint.

mod exec;
mod liveness;
mod scc;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alias::{AliasError, AliasSet, Datastructure};
use crate::ir::{Functor, Point, ProcDecl, TypeTable, Var};

pub use exec::{abstract_exec, Trace};
pub use liveness::{deadness, detect_dead_cells, forward_use};
pub use scc::{analyse_module, analyse_scc, call_graph_sccs, callee_table, ModuleAnalysis, ProcAnalysis};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataflowError {
    #[error("no summary for local predicate `{0}`")]
    MissingSummary(String),
    #[error("call to unknown predicate `{0}`")]
    UnknownCallee(String),
    #[error("in `{proc}`: {source}")]
    Alias { proc: String, source: AliasError },
}

/// Head-variable datastructures that must be dead in the caller.
pub type ReuseCondition = BTreeSet<Datastructure>;

pub fn condition_text(c: &ReuseCondition) -> String {
    let items: Vec<String> = c.iter().map(|d| d.to_string()).collect();
    format!("{{{}}}", items.join(" "))
}

/// Exit aliasing of a procedure, over its head variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcSummary {
    pub proc: String,
    pub heads: Vec<Var>,
    pub exit_aliases: AliasSet,
    pub no_alias_by_heuristic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadCellInfo {
    pub point: Point,
    pub var: Var,
    pub functor: Functor,
    pub size: usize,
    pub condition: ReuseCondition,
}

impl fmt::Display for DeadCellInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dead {} {} {} size={} cond={}",
            self.point,
            self.var,
            self.functor,
            self.size,
            condition_text(&self.condition)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Local,
    Imported,
    Builtin,
}

#[derive(Clone, Debug)]
pub struct CalleeInfo {
    pub decl: ProcDecl,
    pub origin: Origin,
}

/// Everything the analysis of one procedure body needs to know about the
/// rest of the program.
pub struct AnalysisCtx<'a> {
    pub table: &'a TypeTable,
    pub callees: &'a BTreeMap<String, CalleeInfo>,
    pub summaries: &'a BTreeMap<String, ProcSummary>,
    /// Widening threshold; `None` disables widening.
    pub threshold: Option<usize>,
}

/// True when no output can own heap cells, so a call cannot create new
/// sharing.
pub fn heuristic_no_alias(decl: &ProcDecl, table: &TypeTable) -> bool {
    decl.arg_types
        .iter()
        .zip(&decl.arg_modes)
        .filter(|(_, m)| **m == crate::ir::Mode::Out)
        .all(|(t, _)| !table.is_heap(t))
}

/// The summary a foreign declaration contributes: its alias annotation,
/// or `None` when there is none. A large annotation is widened before and
/// after closing it.
pub fn foreign_summary(
    decl: &ProcDecl,
    table: &TypeTable,
    threshold: Option<usize>,
) -> Result<Option<ProcSummary>, AliasError> {
    let Some(fa) = &decl.foreign_alias else { return Ok(None) };
    let vars: BTreeMap<Var, crate::ir::Type> = fa.heads.iter().cloned().zip(decl.arg_types.iter().cloned()).collect();
    let env = crate::alias::TypeEnv::new(table, &vars);
    let raw = crate::alias::parse_alias_set(&fa.text, table)?;
    let exit = match raw {
        AliasSet::Top => AliasSet::Top,
        AliasSet::Set(pairs) => {
            let mut out = AliasSet::empty();
            for p in pairs {
                let [a, b] = p.sides();
                out.insert(crate::alias::normalize_path(a, &env)?, crate::alias::normalize_path(b, &env)?);
            }
            let out = crate::alias::maybe_widen(&out.retain_heap(&env), threshold, &env)?;
            crate::alias::maybe_widen(&crate::alias::altclosure(&out, &env)?, threshold, &env)?
        }
    };
    Ok(Some(ProcSummary {
        proc: decl.name.clone(),
        heads: fa.heads.clone(),
        exit_aliases: exit,
        no_alias_by_heuristic: false,
    }))
}
