use std::collections::BTreeSet;

use crate::alias::{suffixes, AliasSet, Datastructure, TypeEnv};
use crate::ir::{ConsId, Goal, GoalKind, Point, Procedure, TypeTable, Var};

use super::{DeadCellInfo, ReuseCondition, Trace};

/// Compound goals enclosing `point`, outermost first, with the index of
/// the child leading to it.
fn ancestors(root: &Goal, point: Point) -> Option<Vec<(&Goal, usize)>> {
    if root.point == point {
        return Some(Vec::new());
    }
    if let GoalKind::Conj(gs) | GoalKind::Disj(gs) = &root.kind {
        for (i, g) in gs.iter().enumerate() {
            if let Some(mut chain) = ancestors(g, point) {
                chain.insert(0, (root, i));
                return Some(chain);
            }
        }
    }
    None
}

/// Heap-typed variables that may be used after `point` on a path through
/// it, plus the outputs (live after return under the default pattern).
pub fn forward_use(p: &Procedure, point: Point, table: &TypeTable) -> BTreeSet<Var> {
    let mut out: BTreeSet<Var> = p.outputs().cloned().collect();
    if let Some(chain) = ancestors(&p.body, point) {
        for (g, i) in chain {
            if let GoalKind::Conj(gs) = &g.kind {
                for later in &gs[i + 1..] {
                    out.extend(later.vars());
                }
            }
        }
    }
    out.retain(|v| p.var_types.get(v).map(|t| table.is_heap(t)).unwrap_or(true));
    out
}

/// Can the cell at `target` be released, given the aliasing `aliases`, the
/// variables in forward use `fu` and the input head variables `inputs`?
/// Returns the head-variable datastructures that must be dead in the
/// caller, or `None` when the cell may still be referenced locally.
pub fn deadness(
    target: &Datastructure,
    aliases: &AliasSet,
    fu: &BTreeSet<Var>,
    inputs: &BTreeSet<Var>,
    env: &TypeEnv,
) -> Option<ReuseCondition> {
    let AliasSet::Set(pairs) = aliases else { return None };
    if fu.contains(&target.var) {
        return None;
    }
    let mut cond = ReuseCondition::new();
    if inputs.contains(&target.var) {
        cond.insert(target.clone());
    }
    let ty = env.var_type(&target.var).ok()?;
    for p in pairs {
        let [a, b] = p.sides();
        for (side, other) in [(a, b), (b, a)] {
            if side.var != target.var {
                continue;
            }
            let ss = suffixes(ty, &side.path, &target.path, env.table);
            if ss.is_empty() {
                continue;
            }
            if fu.contains(&other.var) {
                return None;
            }
            if inputs.contains(&other.var) {
                for s in ss {
                    let d = crate::alias::normalize_path(&other.extend(&s), env).ok()?;
                    cond.insert(d);
                }
            }
        }
    }
    Some(cond)
}

/// Deconstructions whose cell is dead right after the deconstruction.
/// Nothing is reported when any state of the body is top.
pub fn detect_dead_cells(p: &Procedure, trace: &Trace, table: &TypeTable) -> Vec<DeadCellInfo> {
    if trace.has_top() {
        return Vec::new();
    }
    let env = TypeEnv::new(table, &p.var_types);
    let inputs: BTreeSet<Var> = p.inputs().cloned().collect();
    let mut out = Vec::new();
    p.body.walk(&mut |g| {
        let GoalKind::Deconstruct { var, cons: ConsId::Functor(f), .. } = &g.kind else { return };
        let Some(ty) = p.var_types.get(var) else { return };
        let Ok(Some(size)) = table.cell_size(f, ty) else { return };
        let Some(before) = trace.before.get(&g.point) else { return };
        let fu = forward_use(p, g.point, table);
        if let Some(condition) = deadness(&Datastructure::var(var), before, &fu, &inputs, &env) {
            out.push(DeadCellInfo { point: g.point, var: var.clone(), functor: f.clone(), size, condition });
        }
    });
    out
}
