use std::collections::BTreeMap;
use std::sync::Arc;

use crate::alias::{
    alias_join, altclosure, instantiate, maybe_widen, rename, AliasError, AliasSet, Datastructure, TypeEnv,
};
use crate::ir::{Arg, ConsId, Goal, GoalKind, Point, Procedure, Type, Var};

use super::{heuristic_no_alias, AnalysisCtx, DataflowError, Origin};

/// Alias sets observed before and after every goal of a body.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub before: BTreeMap<Point, AliasSet>,
    pub after: BTreeMap<Point, AliasSet>,
}

impl Trace {
    pub fn has_top(&self) -> bool {
        self.before.values().chain(self.after.values()).any(AliasSet::is_top)
    }
}

struct Exec<'a, 'c> {
    proc: &'a Procedure,
    ctx: &'a AnalysisCtx<'c>,
    env: TypeEnv<'a>,
}

impl Exec<'_, '_> {
    fn alias_err(&self, e: AliasError) -> DataflowError {
        DataflowError::Alias { proc: self.proc.decl.name.clone(), source: e }
    }

    fn heap(&self, v: &Var) -> bool {
        self.proc.var_types.get(v).map(|t| self.ctx.table.is_heap(t)).unwrap_or(true)
    }

    /// Restricts to heap positions, closes and possibly widens.
    fn settle(&self, a: AliasSet) -> Result<AliasSet, DataflowError> {
        let a = altclosure(&a.retain_heap(&self.env), &self.env).map_err(|e| self.alias_err(e))?;
        maybe_widen(&a, self.ctx.threshold, &self.env).map_err(|e| self.alias_err(e))
    }

    fn call_effect(&self, name: &str, args: &[Var]) -> Result<AliasSet, DataflowError> {
        let info = self.ctx.callees.get(name).ok_or_else(|| DataflowError::UnknownCallee(name.to_string()))?;
        let heuristic = heuristic_no_alias(&info.decl, self.ctx.table);
        let fallback = if heuristic { AliasSet::empty() } else { AliasSet::Top };
        let summary = match self.ctx.summaries.get(name) {
            Some(s) => s,
            None if info.origin == Origin::Local => return Err(DataflowError::MissingSummary(name.to_string())),
            None => return Ok(fallback),
        };
        if summary.exit_aliases.is_top() {
            return Ok(fallback);
        }
        let map: BTreeMap<Var, Var> = summary.heads.iter().cloned().zip(args.iter().cloned()).collect();
        let renamed = rename(&summary.exit_aliases, &map).map_err(|e| self.alias_err(e))?;
        let mut subst: BTreeMap<Arc<str>, Type> = BTreeMap::new();
        for (formal, actual) in info.decl.arg_types.iter().zip(args) {
            if let Some(t) = self.proc.var_types.get(actual) {
                formal.match_against(t, &mut subst);
            }
        }
        instantiate(&renamed, &subst, &self.env).map_err(|e| self.alias_err(e))
    }

    fn goal(&self, g: &Goal, input: &AliasSet, trace: &mut Option<&mut Trace>) -> Result<AliasSet, DataflowError> {
        if let Some(t) = trace.as_deref_mut() {
            t.before.insert(g.point, input.clone());
        }
        let out = if input.is_top() {
            // Still walk sub-goals so the trace covers every point.
            if let GoalKind::Conj(gs) | GoalKind::Disj(gs) = &g.kind {
                for s in gs {
                    self.goal(s, input, trace)?;
                }
            }
            AliasSet::Top
        } else {
            match &g.kind {
                GoalKind::Test(..) => input.clone(),
                GoalKind::Assign(x, y) => {
                    let mut a = input.clone();
                    if self.heap(x) {
                        a.insert(Datastructure::var(x), Datastructure::var(y));
                    }
                    self.settle(a)?
                }
                GoalKind::Construct { var, cons: ConsId::Functor(f), args, .. } => {
                    let mut a = input.clone();
                    for (i, arg) in args.iter().enumerate() {
                        if let Arg::Var(y) = arg {
                            if self.heap(y) {
                                a.insert(Datastructure::field(var, f, i + 1), Datastructure::var(y));
                            }
                        }
                    }
                    self.settle(a)?
                }
                GoalKind::Deconstruct { var, cons: ConsId::Functor(f), args, .. } => {
                    let mut a = input.clone();
                    for (i, y) in args.iter().enumerate() {
                        if self.heap(y) {
                            a.insert(Datastructure::var(y), Datastructure::field(var, f, i + 1));
                        }
                    }
                    self.settle(a)?
                }
                GoalKind::Construct { .. } | GoalKind::Deconstruct { .. } => input.clone(),
                GoalKind::Call { proc, args } => {
                    let effect = self.call_effect(proc, args)?;
                    match alias_join(input, &effect) {
                        AliasSet::Top => AliasSet::Top,
                        a => self.settle(a)?,
                    }
                }
                GoalKind::Conj(gs) => {
                    let mut a = input.clone();
                    for s in gs {
                        a = self.goal(s, &a, trace)?;
                    }
                    a
                }
                GoalKind::Disj(gs) => {
                    let mut acc = AliasSet::empty();
                    for s in gs {
                        let b = self.goal(s, input, trace)?;
                        acc = alias_join(&acc, &b);
                    }
                    if acc.is_top() {
                        acc
                    } else {
                        maybe_widen(&acc, self.ctx.threshold, &self.env).map_err(|e| self.alias_err(e))?
                    }
                }
            }
        };
        if let Some(t) = trace.as_deref_mut() {
            t.after.insert(g.point, out.clone());
        }
        Ok(out)
    }
}

/// Propagates `input` through `goal`, a sub-goal of `proc`. When `trace`
/// is given, the states before and after every goal are recorded.
pub fn abstract_exec(
    goal: &Goal,
    input: &AliasSet,
    proc: &Procedure,
    ctx: &AnalysisCtx,
    mut trace: Option<&mut Trace>,
) -> Result<AliasSet, DataflowError> {
    let e = Exec { proc, ctx, env: TypeEnv::new(ctx.table, &proc.var_types) };
    e.goal(goal, input, &mut trace)
}
