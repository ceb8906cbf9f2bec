use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::types::{builtin_decls, TypeTable};
use super::{Arg, ConsId, Goal, GoalKind, Module, Point, ProcDecl, Procedure, Type, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("in `{proc}` at {point}: {message}")]
pub struct TypeError {
    pub proc: String,
    pub point: Point,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Ty {
    Hole(usize),
    Prim(Type),
    Rigid(Arc<str>),
    Named(Arc<str>, Vec<Ty>),
}

struct Infer<'a> {
    table: &'a TypeTable,
    holes: Vec<Option<Ty>>,
    vars: BTreeMap<Var, Ty>,
}

impl Infer<'_> {
    fn fresh(&mut self) -> Ty {
        self.holes.push(None);
        Ty::Hole(self.holes.len() - 1)
    }

    /// Lifts a declared type, mapping its parameters through `params`
    /// (rigid parameters are left as they are when absent).
    fn lift(&mut self, t: &Type, params: &BTreeMap<Arc<str>, Ty>) -> Ty {
        match t {
            Type::Param(p) => params.get(p).cloned().unwrap_or_else(|| Ty::Rigid(p.clone())),
            Type::Named { name, args } => Ty::Named(name.clone(), args.iter().map(|a| self.lift(a, params)).collect()),
            prim => Ty::Prim(prim.clone()),
        }
    }

    fn resolve(&self, t: &Ty) -> Ty {
        match t {
            Ty::Hole(h) => match &self.holes[*h] {
                Some(b) => self.resolve(b),
                None => t.clone(),
            },
            Ty::Named(n, args) => Ty::Named(n.clone(), args.iter().map(|a| self.resolve(a)).collect()),
            other => other.clone(),
        }
    }

    fn occurs(&self, h: usize, t: &Ty) -> bool {
        match self.resolve(t) {
            Ty::Hole(k) => k == h,
            Ty::Named(_, args) => args.iter().any(|a| self.occurs(h, a)),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty) -> Result<(), String> {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Ty::Hole(x), Ty::Hole(y)) if x == y => Ok(()),
            (Ty::Hole(x), other) | (other, Ty::Hole(x)) => {
                if self.occurs(*x, other) {
                    return Err("infinite type".into());
                }
                self.holes[*x] = Some(other.clone());
                Ok(())
            }
            (Ty::Named(n1, a1), Ty::Named(n2, a2)) if n1 == n2 && a1.len() == a2.len() => {
                a1.iter().zip(a2).try_for_each(|(x, y)| self.unify(x, y))
            }
            _ if a == b => Ok(()),
            _ => Err(format!("type mismatch: `{}` vs `{}`", self.show(&a), self.show(&b))),
        }
    }

    fn show(&self, t: &Ty) -> String {
        self.finish(t).to_string()
    }

    /// Converts to a plain type; unconstrained holes default to `int`.
    fn finish(&self, t: &Ty) -> Type {
        match self.resolve(t) {
            Ty::Hole(_) => Type::Int,
            Ty::Prim(p) => p,
            Ty::Rigid(p) => Type::Param(p),
            Ty::Named(n, args) => Type::Named { name: n, args: args.iter().map(|a| self.finish(a)).collect() },
        }
    }

    fn var(&mut self, v: &Var) -> Ty {
        if let Some(t) = self.vars.get(v) {
            return t.clone();
        }
        let t = self.fresh();
        self.vars.insert(v.clone(), t.clone());
        t
    }

    /// Type of a term built with `functor` plus its argument types.
    fn functor_sig(&mut self, name: &str, arity: usize) -> Result<(Ty, Vec<Ty>), String> {
        let table = self.table;
        let (def, idx) = table.functor(name).ok_or_else(|| format!("unknown functor `{name}`"))?;
        let alt = &def.alternatives[idx];
        if alt.args.len() != arity {
            return Err(format!("functor `{name}` has arity {}, used with {arity}", alt.args.len()));
        }
        let params: BTreeMap<Arc<str>, Ty> = def.params.iter().map(|p| (p.clone(), self.fresh())).collect();
        let args = alt.args.iter().map(|a| self.lift(a, &params)).collect();
        let ty = Ty::Named(def.name.clone(), def.params.iter().map(|p| params[p].clone()).collect());
        Ok((ty, args))
    }
}

fn goal(inf: &mut Infer, g: &Goal, lookup: &dyn Fn(&str) -> Option<ProcDecl>) -> Result<(), (Point, String)> {
    let at = |e: String| (g.point, e);
    match &g.kind {
        GoalKind::Test(x, y) | GoalKind::Assign(x, y) => {
            let (tx, ty) = (inf.var(x), inf.var(y));
            inf.unify(&tx, &ty).map_err(at)
        }
        GoalKind::Construct { var, cons, args, .. } => {
            let tv = inf.var(var);
            match cons {
                ConsId::Int(_) => inf.unify(&tv, &Ty::Prim(Type::Int)).map_err(at),
                ConsId::Functor(f) => {
                    let (t, fields) = inf.functor_sig(&f.name, f.arity).map_err(at)?;
                    inf.unify(&tv, &t).map_err(at)?;
                    for (a, ft) in args.iter().zip(&fields) {
                        let at_ty = match a {
                            Arg::Var(v) => inf.var(v),
                            Arg::Int(_) => Ty::Prim(Type::Int),
                            Arg::Const(c) => inf.functor_sig(c, 0).map_err(at)?.0,
                        };
                        inf.unify(&at_ty, ft).map_err(at)?;
                    }
                    Ok(())
                }
            }
        }
        GoalKind::Deconstruct { var, cons, args, .. } => {
            let tv = inf.var(var);
            match cons {
                ConsId::Int(_) => inf.unify(&tv, &Ty::Prim(Type::Int)).map_err(at),
                ConsId::Functor(f) => {
                    let (t, fields) = inf.functor_sig(&f.name, f.arity).map_err(at)?;
                    inf.unify(&tv, &t).map_err(at)?;
                    for (v, ft) in args.iter().zip(&fields) {
                        let tv = inf.var(v);
                        inf.unify(&tv, ft).map_err(at)?;
                    }
                    Ok(())
                }
            }
        }
        GoalKind::Call { proc, args } => {
            let decl = lookup(proc).ok_or_else(|| at(format!("call to unknown predicate `{proc}`")))?;
            if decl.arity() != args.len() {
                return Err(at(format!("`{proc}` expects {} argument(s), got {}", decl.arity(), args.len())));
            }
            let params: BTreeMap<Arc<str>, Ty> = decl.type_params().into_iter().map(|p| (p, inf.fresh())).collect();
            for (v, t) in args.iter().zip(&decl.arg_types) {
                let formal = inf.lift(t, &params);
                let actual = inf.var(v);
                inf.unify(&actual, &formal).map_err(|e| at(format!("argument `{v}` of `{proc}`: {e}")))?;
            }
            Ok(())
        }
        GoalKind::Conj(gs) | GoalKind::Disj(gs) => gs.iter().try_for_each(|s| goal(inf, s, lookup)),
    }
}

/// Infers the type of every variable of `p`. `lookup` resolves callee
/// declarations (the builtins are always visible).
pub(crate) fn infer_procedure(
    p: &mut Procedure,
    table: &TypeTable,
    lookup: &dyn Fn(&str) -> Option<ProcDecl>,
) -> Result<(), TypeError> {
    let mut inf = Infer { table, holes: Vec::new(), vars: BTreeMap::new() };
    let err = |point: Point, message: String| TypeError { proc: p.decl.name.clone(), point, message };
    for (v, t) in p.head_vars.iter().zip(&p.decl.arg_types) {
        let lifted = inf.lift(t, &BTreeMap::new());
        inf.vars.insert(v.clone(), lifted);
    }
    goal(&mut inf, &p.body, lookup).map_err(|(pt, m)| err(pt, m))?;
    p.var_types = inf.vars.iter().map(|(v, t)| (v.clone(), inf.finish(t))).collect();
    Ok(())
}

/// Fills `var_types` for every procedure of `m`. `imported` holds the
/// declarations of imported modules.
pub fn infer_types(m: &mut Module, table: &TypeTable, imported: &[ProcDecl]) -> Result<(), TypeError> {
    let builtins = builtin_decls();
    let decls = m.decls.clone();
    let lookup = |name: &str| -> Option<ProcDecl> {
        decls.iter().chain(imported).chain(&builtins).find(|d| d.name == name).cloned()
    };
    for p in &mut m.procs {
        infer_procedure(p, table, &lookup)?;
    }
    Ok(())
}
