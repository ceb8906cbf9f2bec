use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::alias::{alias_join, alias_leq, maybe_widen, project, AliasSet, TypeEnv};
use crate::ir::{GoalKind, Module, ProcDecl, Procedure, TypeTable, Var};

use super::{
    abstract_exec, detect_dead_cells, foreign_summary, heuristic_no_alias, AnalysisCtx, CalleeInfo, DataflowError,
    DeadCellInfo, Origin, ProcSummary, Trace,
};

/// Iterations after which an SCC falls back to top summaries.
const MAX_ITERATIONS: usize = 64;

#[derive(Clone, Debug)]
pub struct ProcAnalysis {
    pub trace: Trace,
    pub dead: Vec<DeadCellInfo>,
    /// Fixpoint iterations of the SCC the procedure belongs to.
    pub iterations: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ModuleAnalysis {
    /// Summaries of local procedures plus every external one used.
    pub summaries: BTreeMap<String, ProcSummary>,
    pub procs: BTreeMap<String, ProcAnalysis>,
    /// Local SCCs, callees before callers.
    pub sccs: Vec<Vec<String>>,
}

/// Strongly connected components of the local call graph, callees first.
pub fn call_graph_sccs(m: &Module) -> Vec<Vec<String>> {
    let mut g: DiGraph<String, ()> = DiGraph::new();
    let idx: BTreeMap<&str, _> =
        m.procs.iter().map(|p| (p.decl.name.as_str(), g.add_node(p.decl.name.clone()))).collect();
    for p in &m.procs {
        let mut callees = BTreeSet::new();
        p.body.walk(&mut |goal| {
            if let GoalKind::Call { proc, .. } = &goal.kind {
                callees.insert(proc.clone());
            }
        });
        for c in callees {
            if let Some(&to) = idx.get(c.as_str()) {
                g.add_edge(idx[p.decl.name.as_str()], to, ());
            }
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|scc| {
            let mut names: Vec<String> = scc.into_iter().map(|n| g[n].clone()).collect();
            names.sort();
            names
        })
        .collect()
}

fn exit_of(p: &Procedure, ctx: &AnalysisCtx, trace: Option<&mut Trace>) -> Result<AliasSet, DataflowError> {
    let out = abstract_exec(&p.body, &AliasSet::empty(), p, ctx, trace)?;
    let heads: BTreeSet<Var> = p.head_vars.iter().cloned().collect();
    let env = TypeEnv::new(ctx.table, &p.var_types);
    let projected = project(&out, &heads);
    maybe_widen(&projected, ctx.threshold, &env)
        .map_err(|e| DataflowError::Alias { proc: p.decl.name.clone(), source: e })
}

/// Kleene iteration over one SCC from empty summaries; stores the stable
/// summaries in `summaries` and returns the per-procedure results.
pub fn analyse_scc(
    procs: &[&Procedure],
    table: &TypeTable,
    callees: &BTreeMap<String, CalleeInfo>,
    summaries: &mut BTreeMap<String, ProcSummary>,
    threshold: Option<usize>,
) -> Result<BTreeMap<String, ProcAnalysis>, DataflowError> {
    for p in procs {
        summaries.insert(
            p.decl.name.clone(),
            ProcSummary {
                proc: p.decl.name.clone(),
                heads: p.head_vars.clone(),
                exit_aliases: AliasSet::empty(),
                no_alias_by_heuristic: heuristic_no_alias(&p.decl, table),
            },
        );
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            log::warn!("no fixpoint after {MAX_ITERATIONS} iterations; using top summaries");
            for p in procs {
                summaries.get_mut(&p.decl.name).unwrap().exit_aliases = AliasSet::Top;
            }
            break;
        }
        let mut changed = false;
        for p in procs {
            let exit = {
                let ctx = AnalysisCtx { table, callees, summaries, threshold };
                exit_of(p, &ctx, None)?
            };
            let env = TypeEnv::new(table, &p.var_types);
            let old = &summaries[&p.decl.name].exit_aliases;
            let joined = alias_join(old, &exit);
            if !alias_leq(&joined, old, &env) {
                changed = true;
                summaries.get_mut(&p.decl.name).unwrap().exit_aliases = joined;
            }
        }
        if !changed {
            break;
        }
    }
    let ctx = AnalysisCtx { table, callees, summaries, threshold };
    let mut out = BTreeMap::new();
    for p in procs {
        let mut trace = Trace::default();
        exit_of(p, &ctx, Some(&mut trace))?;
        let dead = detect_dead_cells(p, &trace, table);
        out.insert(p.decl.name.clone(), ProcAnalysis { trace, dead, iterations });
    }
    Ok(out)
}

/// Declarations callable from `m`: its own (local or foreign), the
/// imported ones and the builtins.
pub fn callee_table(m: &Module, imported: &[ProcDecl]) -> BTreeMap<String, CalleeInfo> {
    let mut out = BTreeMap::new();
    for d in crate::ir::builtin_decls() {
        out.insert(d.name.clone(), CalleeInfo { decl: d, origin: Origin::Builtin });
    }
    for d in imported {
        out.insert(d.name.clone(), CalleeInfo { decl: d.clone(), origin: Origin::Imported });
    }
    for d in &m.decls {
        let origin = if d.foreign { Origin::Imported } else { Origin::Local };
        out.insert(d.name.clone(), CalleeInfo { decl: d.clone(), origin });
    }
    out
}

/// Analyses every procedure of `m`, SCC by SCC. `external` holds summaries
/// of imported procedures (missing ones fall back to the heuristic or top).
pub fn analyse_module(
    m: &Module,
    table: &TypeTable,
    imported: &[ProcDecl],
    external: &BTreeMap<String, ProcSummary>,
    threshold: Option<usize>,
) -> Result<ModuleAnalysis, DataflowError> {
    let callees = callee_table(m, imported);
    let mut summaries = external.clone();
    for d in &m.decls {
        if d.foreign {
            let s = foreign_summary(d, table, threshold)
                .map_err(|e| DataflowError::Alias { proc: d.name.clone(), source: e })?;
            if let Some(s) = s {
                summaries.insert(d.name.clone(), s);
            }
        }
    }
    let sccs = call_graph_sccs(m);
    let mut procs = BTreeMap::new();
    for scc in &sccs {
        let members: Vec<&Procedure> = scc.iter().filter_map(|n| m.proc(n)).collect();
        procs.extend(analyse_scc(&members, table, &callees, &mut summaries, threshold)?);
    }
    Ok(ModuleAnalysis { summaries, procs, sccs })
}
