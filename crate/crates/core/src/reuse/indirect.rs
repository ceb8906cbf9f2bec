use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::alias::{normalize_path, Datastructure, Selector, TypeEnv};
use crate::dataflow::{deadness, forward_use, CalleeInfo, ReuseCondition, Trace};
use crate::ir::{Goal, GoalKind, Procedure, Type, TypeTable, Var};

use super::{IndirectReuse, VersionInfo};

/// Maps a condition on the callee's head variables to the caller's actual
/// arguments, instantiating type parameters on the way.
fn to_caller(
    d: &Datastructure,
    info: &VersionInfo,
    args: &[Var],
    subst: &BTreeMap<Arc<str>, Type>,
    env: &TypeEnv,
) -> Option<Datastructure> {
    let idx = info.heads.iter().position(|h| *h == d.var)?;
    let path = d
        .path
        .iter()
        .map(|s| match s {
            Selector::Type(t) => Selector::Type(t.substitute(subst)),
            f => f.clone(),
        })
        .collect();
    normalize_path(&Datastructure { var: args.get(idx)?.clone(), path }, env).ok()
}

/// The condition under which the call `g` may use the callee's reuse
/// version, or `None` when some cell the callee would reuse may still be
/// referenced by the caller.
fn substitution_condition(
    p: &Procedure,
    g: &Goal,
    trace: &Trace,
    table: &TypeTable,
    callee: &CalleeInfo,
    info: &VersionInfo,
    callee_cond: &ReuseCondition,
) -> Option<ReuseCondition> {
    let GoalKind::Call { args, .. } = &g.kind else { return None };
    let aliases = trace.before.get(&g.point)?;
    let env = TypeEnv::new(table, &p.var_types);
    let fu = forward_use(p, g.point, table);
    let inputs: BTreeSet<Var> = p.inputs().cloned().collect();
    let mut subst = BTreeMap::new();
    for (formal, actual) in callee.decl.arg_types.iter().zip(args) {
        formal.match_against(p.var_types.get(actual)?, &mut subst);
    }
    let mut accrued = ReuseCondition::new();
    for d in callee_cond {
        let target = to_caller(d, info, args, &subst, &env)?;
        accrued.extend(deadness(&target, aliases, &fu, &inputs, &env)?);
    }
    Some(accrued)
}

/// Calls of `p` that can go to a reuse version. `versions` gives, for
/// each callee with a reuse version, its head variables and conditions.
pub fn decide_indirect(
    p: &Procedure,
    trace: &Trace,
    table: &TypeTable,
    callees: &BTreeMap<String, CalleeInfo>,
    versions: &BTreeMap<String, VersionInfo>,
) -> Vec<IndirectReuse> {
    if trace.has_top() {
        return Vec::new();
    }
    let mut out = Vec::new();
    p.body.walk(&mut |g| {
        let GoalKind::Call { proc, .. } = &g.kind else { return };
        let (Some(info), Some(callee)) = (versions.get(proc), callees.get(proc)) else { return };
        let Some(cond) = &info.reuse_condition else { return };
        if let Some(condition) = substitution_condition(p, g, trace, table, callee, info, cond) {
            out.push(IndirectReuse { call: g.point, callee: proc.clone(), condition });
        }
    });
    out
}
