use std::fmt::Write;

use super::{Arg, ConsId, ConstructAnn, DeconstructAnn, Goal, GoalKind, Module, Procedure, Type, TypeDef};

fn cons_text(cons: &ConsId, args: &[String]) -> String {
    match cons {
        ConsId::Int(i) => i.to_string(),
        ConsId::Functor(f) if &*f.name == "[|]" && args.len() == 2 => format!("[{} | {}]", args[0], args[1]),
        ConsId::Functor(f) if args.is_empty() => f.name.to_string(),
        ConsId::Functor(f) => format!("{}({})", f.name, args.join(", ")),
    }
}

fn arg_text(a: &Arg) -> String {
    match a {
        Arg::Var(v) => v.to_string(),
        Arg::Int(i) => i.to_string(),
        Arg::Const(c) => c.to_string(),
    }
}

fn type_def_text(def: &TypeDef) -> String {
    let mut s = format!(":- type {}", def.name);
    if !def.params.is_empty() {
        let ps: Vec<&str> = def.params.iter().map(|p| &**p).collect();
        write!(s, "({})", ps.join(", ")).unwrap();
    }
    s.push_str(" ---> ");
    let alts: Vec<String> = def
        .alternatives
        .iter()
        .map(|a| {
            let args: Vec<String> = a.args.iter().map(Type::to_string).collect();
            if &*a.name == "[|]" && args.len() == 2 {
                format!("[{} | {}]", args[0], args[1])
            } else if args.is_empty() {
                a.name.to_string()
            } else {
                format!("{}({})", a.name, args.join(", "))
            }
        })
        .collect();
    s.push_str(&alts.join(" ; "));
    s.push('.');
    s
}

fn goal_text(g: &Goal, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match &g.kind {
        GoalKind::Conj(gs) if gs.is_empty() => {
            write!(out, "{pad}true").unwrap();
        }
        GoalKind::Conj(gs) => {
            for (i, sub) in gs.iter().enumerate() {
                if i > 0 {
                    out.push_str(",\n");
                }
                goal_text(sub, indent, out);
            }
        }
        GoalKind::Disj(gs) => {
            writeln!(out, "{pad}(").unwrap();
            for (i, sub) in gs.iter().enumerate() {
                if i > 0 {
                    writeln!(out, "\n{pad};").unwrap();
                }
                goal_text(sub, indent + 1, out);
            }
            write!(out, "\n{pad})").unwrap();
        }
        GoalKind::Test(x, y) => write!(out, "{pad}{x} == {y}").unwrap(),
        GoalKind::Assign(x, y) => write!(out, "{pad}{x} := {y}").unwrap(),
        GoalKind::Construct { var, cons, args, ann } => {
            let args: Vec<String> = args.iter().map(arg_text).collect();
            write!(out, "{pad}{var} <= {}", cons_text(cons, &args)).unwrap();
            if let ConstructAnn::Reuse(p) = ann {
                write!(out, " % reuse({p})").unwrap();
            }
        }
        GoalKind::Deconstruct { var, cons, args, ann } => {
            let args: Vec<String> = args.iter().map(|v| v.to_string()).collect();
            write!(out, "{pad}{var} => {}", cons_text(cons, &args)).unwrap();
            if let DeconstructAnn::Cacheable = ann {
                out.push_str(" % cacheable");
            }
        }
        GoalKind::Call { proc, args } => {
            if args.is_empty() {
                write!(out, "{pad}{proc}").unwrap();
            } else {
                let args: Vec<String> = args.iter().map(|v| v.to_string()).collect();
                write!(out, "{pad}{proc}({})", args.join(", ")).unwrap();
            }
        }
    }
}

pub fn pretty_print_procedure(p: &Procedure) -> String {
    let mut out = String::new();
    let heads: Vec<String> = p.head_vars.iter().map(|v| v.to_string()).collect();
    if heads.is_empty() {
        writeln!(out, "{} :-", p.decl.name).unwrap();
    } else {
        writeln!(out, "{}({}) :-", p.decl.name, heads.join(", ")).unwrap();
    }
    goal_text(&p.body, 1, &mut out);
    out.push_str(".\n");
    out
}

/// Source text for a module. Annotations are rendered as comments, so
/// re-parsing yields the unannotated module.
pub fn pretty_print(m: &Module) -> String {
    let mut out = format!(":- module {}.\n", m.name);
    if !m.imports.is_empty() {
        writeln!(out, ":- import_module {}.", m.imports.join(", ")).unwrap();
    }
    for t in &m.types {
        writeln!(out, "{}", type_def_text(t)).unwrap();
    }
    for d in &m.decls {
        let kw = if d.foreign { "foreign_pred" } else { "pred" };
        let tys: Vec<String> = d.arg_types.iter().map(Type::to_string).collect();
        let ms: Vec<String> = d.arg_modes.iter().map(|m| m.to_string()).collect();
        if tys.is_empty() {
            writeln!(out, "\n:- {kw} {}.\n:- mode {} is {}.", d.name, d.name, d.determinism).unwrap();
        } else {
            writeln!(
                out,
                "\n:- {kw} {}({}).\n:- mode {}({}) is {}.",
                d.name,
                tys.join(", "),
                d.name,
                ms.join(", "),
                d.determinism
            )
            .unwrap();
        }
        if let Some(fa) = &d.foreign_alias {
            let hs: Vec<String> = fa.heads.iter().map(|v| v.to_string()).collect();
            writeln!(out, ":- foreign_alias {}({}) = {}.", d.name, hs.join(", "), fa.text).unwrap();
        }
        if let Some(p) = m.proc(&d.name) {
            out.push_str(&pretty_print_procedure(p));
        }
    }
    out
}
