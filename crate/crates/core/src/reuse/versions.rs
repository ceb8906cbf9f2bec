use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dataflow::{condition_text, CalleeInfo, DeadCellInfo, ModuleAnalysis, ReuseCondition};
use crate::ir::{ConstructAnn, DeconstructAnn, GoalKind, Module, Point, Procedure, TypeTable};

use super::{
    decide_direct, decide_indirect, reuse_name, IndirectReuse, ProcVersion, ReuseAssignment, ReuseConstraint,
    SelectionStrategy, VersionInfo, VersionKind,
};

/// The plain version keeps the unconditional reuses; the reuse version
/// keeps all of them. When both coincide a single plain version remains.
pub fn split_versions(base: &str, assignment: &ReuseAssignment) -> Vec<ProcVersion> {
    let mut plain = assignment.clone();
    plain.direct.retain(|r| r.condition.is_empty());
    plain.indirect.retain(|r| r.condition.is_empty());
    plain.condition = ReuseCondition::new();
    for r in &assignment.direct {
        if !r.condition.is_empty()
            && !plain.direct.iter().any(|q| q.decon == r.decon)
            && !plain.residual.contains(&r.decon)
        {
            plain.residual.push(r.decon);
        }
    }
    plain.residual.sort();
    let single = plain.direct.len() == assignment.direct.len() && plain.indirect.len() == assignment.indirect.len();
    let plain = ProcVersion {
        base: base.to_string(),
        kind: VersionKind::Plain,
        assignment: plain,
        conditions: ReuseCondition::new(),
    };
    if single {
        return vec![plain];
    }
    let reuse = ProcVersion {
        base: base.to_string(),
        kind: VersionKind::Reuse,
        assignment: assignment.clone(),
        conditions: assignment.condition.clone(),
    };
    vec![plain, reuse]
}

/// The procedure body of `version`: constructions carry the cell they
/// reuse, unconditionally dead cells nobody takes are cacheable, and
/// substituted calls name the callee's reuse version.
pub fn annotate(p: &Procedure, version: &ProcVersion, dead: &[DeadCellInfo]) -> Procedure {
    let mut out = p.clone();
    out.decl.name = version.name();
    out.body.clear_annotations();
    let a = &version.assignment;
    let direct: BTreeMap<Point, Point> = a.direct.iter().map(|r| (r.construct, r.decon)).collect();
    let indirect: BTreeMap<Point, &str> = a.indirect.iter().map(|r| (r.call, r.callee.as_str())).collect();
    let cacheable: BTreeSet<Point> =
        dead.iter().filter(|d| d.condition.is_empty() && a.residual.contains(&d.point)).map(|d| d.point).collect();
    out.body.walk_mut(&mut |g| {
        let point = g.point;
        match &mut g.kind {
            GoalKind::Construct { ann, .. } => {
                if let Some(d) = direct.get(&point) {
                    *ann = ConstructAnn::Reuse(*d);
                }
            }
            GoalKind::Deconstruct { ann, .. } => {
                if cacheable.contains(&point) {
                    *ann = DeconstructAnn::Cacheable;
                }
            }
            GoalKind::Call { proc, .. } => {
                if let Some(callee) = indirect.get(&point) {
                    *proc = reuse_name(callee);
                }
            }
            _ => {}
        }
    });
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcReuse {
    /// One or two versions, plain first.
    pub versions: Vec<ProcVersion>,
    pub dead: Vec<DeadCellInfo>,
}

impl ProcReuse {
    pub fn reuse_version(&self) -> Option<&ProcVersion> {
        self.versions.iter().find(|v| v.kind == VersionKind::Reuse)
    }

    /// The version holding every reuse.
    pub fn fullest(&self) -> &ProcVersion {
        self.versions.last().expect("at least one version")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleReuse {
    pub procs: BTreeMap<String, ProcReuse>,
}

impl ModuleReuse {
    /// Plain versions only, without any annotation: what `--no-ctgc` runs.
    pub fn disabled(m: &Module) -> Self {
        let procs = m
            .procs
            .iter()
            .map(|p| {
                let v = ProcVersion {
                    base: p.decl.name.clone(),
                    kind: VersionKind::Plain,
                    assignment: ReuseAssignment::default(),
                    conditions: ReuseCondition::new(),
                };
                (p.decl.name.clone(), ProcReuse { versions: vec![v], dead: Vec::new() })
            })
            .collect();
        ModuleReuse { procs }
    }

    pub fn version_info(&self, m: &Module) -> BTreeMap<String, VersionInfo> {
        m.procs
            .iter()
            .filter_map(|p| {
                let r = self.procs.get(&p.decl.name)?;
                Some((
                    p.decl.name.clone(),
                    VersionInfo {
                        heads: p.head_vars.clone(),
                        reuse_condition: r.reuse_version().map(|v| v.conditions.clone()),
                    },
                ))
            })
            .collect()
    }

    /// Every version of every procedure, annotated, in module order.
    pub fn annotated(&self, m: &Module) -> Vec<Procedure> {
        let mut out = Vec::new();
        for p in &m.procs {
            if let Some(r) = self.procs.get(&p.decl.name) {
                for v in &r.versions {
                    out.push(annotate(p, v, &r.dead));
                }
            }
        }
        out
    }

    /// One block per procedure listing its reuses and versions.
    pub fn dump(&self, m: &Module) -> String {
        let mut s = String::new();
        for p in &m.procs {
            let Some(r) = self.procs.get(&p.decl.name) else { continue };
            let id = p.decl.id();
            let _ = writeln!(s, "proc {id}");
            let full = &r.fullest().assignment;
            for d in &full.direct {
                let _ = writeln!(s, "  {d}");
            }
            for i in &full.indirect {
                let _ = writeln!(s, "  {i}");
            }
            for v in &r.versions {
                match v.kind {
                    VersionKind::Plain => {
                        let _ = writeln!(s, "  version {id}: plain");
                    }
                    VersionKind::Reuse => {
                        let _ = writeln!(s, "  version {id}: reuse cond={}", condition_text(&v.conditions));
                    }
                }
            }
        }
        s
    }
}

/// Decides direct and indirect reuse for every procedure of `m`, SCC by
/// SCC, callees first. `external` describes the versions of imported
/// procedures.
pub fn decide_module(
    m: &Module,
    table: &TypeTable,
    analysis: &ModuleAnalysis,
    callees: &BTreeMap<String, CalleeInfo>,
    external: &BTreeMap<String, VersionInfo>,
    constraint: ReuseConstraint,
    strategy: SelectionStrategy,
) -> ModuleReuse {
    let mut known = external.clone();
    let mut out = ModuleReuse::default();
    for scc in &analysis.sccs {
        let members: Vec<&Procedure> = scc.iter().filter_map(|n| m.proc(n)).collect();
        let direct: BTreeMap<&str, ReuseAssignment> = members
            .iter()
            .map(|p| (p.name(), decide_direct(p, &analysis.procs[p.name()].dead, table, constraint, strategy)))
            .collect();

        // Members start out assuming a reuse version with their direct
        // conditions. Conditions only grow and substitutions only get
        // blocked, so the loop terminates.
        let mut cond: BTreeMap<&str, ReuseCondition> = direct.iter().map(|(n, a)| (*n, a.condition.clone())).collect();
        let mut blocked: BTreeSet<(&str, Point)> = BTreeSet::new();
        let mut indirect: BTreeMap<&str, Vec<IndirectReuse>> = BTreeMap::new();
        loop {
            let mut versions = known.clone();
            for p in &members {
                versions.insert(
                    p.decl.name.clone(),
                    VersionInfo { heads: p.head_vars.clone(), reuse_condition: Some(cond[p.name()].clone()) },
                );
            }
            let mut changed = false;
            for p in &members {
                let name = p.name();
                let trace = &analysis.procs[name].trace;
                let passing = decide_indirect(p, trace, table, callees, &versions);
                let mut candidates = Vec::new();
                p.body.walk(&mut |g| {
                    if let GoalKind::Call { proc, .. } = &g.kind {
                        if versions.get(proc).is_some_and(|v| v.reuse_condition.is_some()) {
                            candidates.push(g.point);
                        }
                    }
                });
                for pt in candidates {
                    if !passing.iter().any(|r| r.call == pt) && blocked.insert((name, pt)) {
                        changed = true;
                    }
                }
                let kept: Vec<IndirectReuse> =
                    passing.into_iter().filter(|r| !blocked.contains(&(name, r.call))).collect();
                let c = cond.get_mut(name).expect("member");
                for r in &kept {
                    for d in &r.condition {
                        changed |= c.insert(d.clone());
                    }
                }
                indirect.insert(name, kept);
            }
            if !changed {
                break;
            }
        }

        // Substitutions only make sense towards procedures that end up
        // with two versions; dropping one may collapse its caller too.
        let member_names: BTreeSet<&str> = members.iter().map(|p| p.name()).collect();
        let mut two = member_names.clone();
        loop {
            let mut next = BTreeSet::new();
            for p in &members {
                let name = p.name();
                let conditional_direct = direct[name].direct.iter().any(|r| !r.condition.is_empty());
                let conditional_indirect = indirect[name]
                    .iter()
                    .any(|r| !r.condition.is_empty() && has_reuse(&known, &member_names, &two, &r.callee));
                if conditional_direct || conditional_indirect {
                    next.insert(name);
                }
            }
            if next == two {
                break;
            }
            two = next;
        }

        for p in &members {
            let name = p.name();
            let mut a = direct[name].clone();
            a.indirect =
                indirect[name].iter().filter(|r| has_reuse(&known, &member_names, &two, &r.callee)).cloned().collect();
            a.condition = a
                .direct
                .iter()
                .map(|r| &r.condition)
                .chain(a.indirect.iter().map(|r| &r.condition))
                .flat_map(|c| c.iter().cloned())
                .collect();
            let versions = split_versions(name, &a);
            let dead = analysis.procs[name].dead.clone();
            let r = ProcReuse { versions, dead };
            known.insert(
                name.to_string(),
                VersionInfo {
                    heads: p.head_vars.clone(),
                    reuse_condition: r.reuse_version().map(|v| v.conditions.clone()),
                },
            );
            out.procs.insert(name.to_string(), r);
        }
    }
    out
}

/// Does `callee` have a reuse version? For members of the current SCC,
/// `two` holds those still expected to get one.
fn has_reuse(
    known: &BTreeMap<String, VersionInfo>,
    members: &BTreeSet<&str>,
    two: &BTreeSet<&str>,
    callee: &str,
) -> bool {
    if members.contains(callee) {
        two.contains(callee)
    } else {
        known.get(callee).is_some_and(|v| v.reuse_condition.is_some())
    }
}
