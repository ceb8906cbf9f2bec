//! Instrumented interpreter over a modelled heap: in-place reuse, the cell
//! cache, allocation statistics and a read-after oracle.

mod interp;
mod literal;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Functor, Point, Procedure, TypeTable};
use crate::reuse::reuse_name;

pub use interp::run;
pub use literal::{parse_term, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("no procedure `{0}`")]
    UnknownProc(String),
    #[error("`{entry}` takes {expected} input argument(s), got {got}")]
    Arity { entry: String, expected: usize, got: usize },
    #[error("bad literal: {0}")]
    Literal(String),
    #[error("in `{proc}` at {point}: {message}")]
    Type { proc: String, point: Point, message: String },
    #[error("in `{proc}` at {point}: read through a reference to a recycled cell")]
    StaleReference { proc: String, point: Point },
    #[error("in `{proc}` at {point}: read of a cell sitting in the cache")]
    CachedCellRead { proc: String, point: Point },
    #[error("in `{proc}` at {point}: reuse of d@{decon}, which was not deconstructed on this path")]
    MissingDeadCell { proc: String, point: Point, decon: Point },
    #[error("in `{proc}` at {point}: division by zero")]
    DivisionByZero { proc: String, point: Point },
    #[error("interpreter thread failed: {0}")]
    Thread(String),
}

/// A machine word as the interpreter sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    /// A zero-arity alternative, stored as its ordinal; the name is kept
    /// for printing.
    Enum {
        ordinal: u32,
        name: Arc<str>,
    },
    /// A tagged pointer. `gen` is the generation of the cell when the
    /// reference was made; a mismatch means the cell was recycled.
    Ref {
        functor: Functor,
        addr: usize,
        gen: u32,
    },
    Opaque(u64),
}

#[derive(Clone, Debug)]
pub struct HeapCell {
    pub fields: Vec<Value>,
    pub gen: u32,
    /// Sitting in the cell cache.
    pub cached: bool,
}

/// Size-indexed free list of cells released by cacheable deconstructions.
#[derive(Clone, Debug, Default)]
pub struct CellCache {
    buckets: HashMap<usize, Vec<usize>>,
}

impl CellCache {
    pub fn push(&mut self, size: usize, addr: usize) {
        self.buckets.entry(size).or_default().push(addr);
    }

    /// Exact-size lookup; no splitting and no best fit.
    pub fn pop(&mut self, size: usize) -> Option<usize> {
        self.buckets.get_mut(&size)?.pop()
    }

    pub fn len(&self, size: usize) -> usize {
        self.buckets.get(&size).map_or(0, Vec::len)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeapStats {
    /// Words of fresh allocations.
    pub words_allocated: u64,
    pub cells_reused_inplace: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Words of reused cells the new term leaves unused.
    pub within_k_leaked_words: u64,
    /// Words written into reused cells.
    pub reused_words: u64,
    /// Words handed out by the cache.
    pub cache_hit_words: u64,
}

impl fmt::Display for HeapStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "words_allocated={} reused={} cache_hits={} cache_misses={} leaked={}",
            self.words_allocated,
            self.cells_reused_inplace,
            self.cache_hits,
            self.cache_misses,
            self.within_k_leaked_words
        )
    }
}

impl HeapStats {
    /// One `key=value` per line, for scripts.
    pub fn key_values(&self) -> String {
        format!(
            "words_allocated={}\nreused={}\ncache_hits={}\ncache_misses={}\nleaked={}\nreused_words={}\ncache_hit_words={}\n",
            self.words_allocated,
            self.cells_reused_inplace,
            self.cache_hits,
            self.cache_misses,
            self.within_k_leaked_words,
            self.reused_words,
            self.cache_hit_words
        )
    }
}

/// Everything the interpreter needs: types and all procedure versions,
/// reuse versions named with the `__r` suffix.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Program {
    pub table: TypeTable,
    pub procs: BTreeMap<String, Procedure>,
}

impl Program {
    pub fn new(table: TypeTable, procs: impl IntoIterator<Item = Procedure>) -> Self {
        Program { table, procs: procs.into_iter().map(|p| (p.decl.name.clone(), p)).collect() }
    }

    /// The version to run for `entry`: the reuse version when it exists.
    /// Under the default call pattern the literal arguments are unaliased
    /// and dead after the call, so its conditions hold.
    pub fn entry_version(&self, entry: &str) -> String {
        let r = reuse_name(entry);
        if self.procs.contains_key(&r) {
            r
        } else {
            entry.to_string()
        }
    }

    /// Plain versions with every annotation removed.
    pub fn without_reuse(&self) -> Program {
        let procs = self.procs.values().filter(|p| !self.is_reuse_version(&p.decl.name)).map(|p| {
            let mut p = p.clone();
            p.body.clear_annotations();
            p.body.walk_mut(&mut |g| {
                if let crate::ir::GoalKind::Call { proc, .. } = &mut g.kind {
                    if let Some(base) = proc.strip_suffix("__r") {
                        *proc = base.to_string();
                    }
                }
            });
            p
        });
        Program::new(self.table.clone(), procs)
    }

    fn is_reuse_version(&self, name: &str) -> bool {
        name.strip_suffix("__r").is_some_and(|base| self.procs.contains_key(base))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    pub cache: bool,
    /// Record reads for the read-after oracle and count executed
    /// constructions.
    pub track: bool,
}

/// Per deconstruction point: how often it ran and how often the cell was
/// read again later in the run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub decons: BTreeMap<(String, Point), DeconRecord>,
    /// Executions of each heap construction.
    pub constructs: BTreeMap<(String, Point), u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeconRecord {
    pub executed: u64,
    pub read_after: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    /// The procedure actually run (`entry` or `entry__r`).
    pub version: String,
    /// Printed outputs; `None` when a semidet entry failed.
    pub outputs: Option<Vec<String>>,
    pub stats: HeapStats,
    pub oracle: Option<OracleReport>,
}

#[cfg(test)]
mod tests;
