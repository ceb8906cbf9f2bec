//! The normalized core language: types, procedure declarations and
//! normalized clause bodies, plus parsing, pretty-printing, type inference
//! and mode checking.

mod lexer;
mod modes;
mod parser;
mod pretty;
mod typeck;
mod types;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use modes::{check_well_modedness, ModeError};
pub use parser::{parse_module, parse_type, ParseError, ParseErrorKind};
pub use pretty::{pretty_print, pretty_print_procedure};
pub use typeck::{infer_types, TypeError};
pub use types::{builtin_decls, TypeTable, TypeTableError, BUILTIN_PREDS};

/// A program point. Points are assigned by a pre-order, left-to-right walk
/// of a procedure body, starting at 0 for the body itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point(pub u32);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A program variable, identified by its source name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// A type term. Type parameters are rigid inside the procedure that
/// declares them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Char,
    Str,
    Float,
    Named { name: Arc<str>, args: Vec<Type> },
    Param(Arc<str>),
}

impl Type {
    pub fn named(name: &str, args: Vec<Type>) -> Self {
        Type::Named { name: Arc::from(name), args }
    }

    pub fn param(name: &str) -> Self {
        Type::Param(Arc::from(name))
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self, Type::Int | Type::Char | Type::Str | Type::Float)
    }

    /// Replaces type parameters according to `subst`; unmapped parameters
    /// are kept.
    pub fn substitute(&self, subst: &BTreeMap<Arc<str>, Type>) -> Type {
        match self {
            Type::Param(p) => subst.get(p).cloned().unwrap_or_else(|| self.clone()),
            Type::Named { name, args } => {
                Type::Named { name: name.clone(), args: args.iter().map(|a| a.substitute(subst)).collect() }
            }
            other => other.clone(),
        }
    }

    /// Structural matching of a (possibly polymorphic) pattern type against
    /// a concrete one, extending `subst` with parameter bindings.
    pub fn match_against(&self, actual: &Type, subst: &mut BTreeMap<Arc<str>, Type>) -> bool {
        match (self, actual) {
            (Type::Param(p), _) => match subst.get(p) {
                Some(bound) => bound == actual,
                None => {
                    subst.insert(p.clone(), actual.clone());
                    true
                }
            },
            (Type::Named { name: n1, args: a1 }, Type::Named { name: n2, args: a2 }) => {
                n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| x.match_against(y, subst))
            }
            (x, y) => x == y,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Char => f.write_str("char"),
            Type::Str => f.write_str("string"),
            Type::Float => f.write_str("float"),
            Type::Param(p) => f.write_str(p),
            Type::Named { name, args } => {
                f.write_str(name)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// A function symbol with its arity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Functor {
    pub name: Arc<str>,
    pub arity: usize,
}

impl Functor {
    pub fn new(name: &str, arity: usize) -> Self {
        Functor { name: Arc::from(name), arity }
    }
}

impl fmt::Display for Functor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    pub name: Arc<str>,
    pub args: Vec<Type>,
}

impl Alternative {
    pub fn functor(&self) -> Functor {
        Functor { name: self.name.clone(), arity: self.args.len() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDef {
    pub name: Arc<str>,
    pub params: Vec<Arc<str>>,
    pub alternatives: Vec<Alternative>,
}

impl TypeDef {
    /// All alternatives are constants: represented as plain integers, no
    /// heap cell.
    pub fn is_enum_like(&self) -> bool {
        self.alternatives.iter().all(|a| a.args.is_empty())
    }

    pub fn as_type(&self) -> Type {
        Type::Named { name: self.name.clone(), args: self.params.iter().map(|p| Type::Param(p.clone())).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    In,
    Out,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::In => "in",
            Mode::Out => "out",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Determinism {
    Det,
    Semidet,
}

impl fmt::Display for Determinism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Determinism::Det => "det",
            Determinism::Semidet => "semidet",
        })
    }
}

/// Manual aliasing information attached to a foreign procedure, expressed
/// over named head variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignAlias {
    pub heads: Vec<Var>,
    /// Canonical alias text (`top` or `{ alias( .. , .. ) ... }`), resolved
    /// against the type table when the module is analysed.
    pub text: String,
}

/// One predicate with one mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcDecl {
    pub name: String,
    pub arg_types: Vec<Type>,
    pub arg_modes: Vec<Mode>,
    pub determinism: Determinism,
    pub foreign: bool,
    pub foreign_alias: Option<ForeignAlias>,
}

impl ProcDecl {
    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }

    /// `name/arity`
    pub fn id(&self) -> String {
        format!("{}/{}", self.name, self.arity())
    }

    pub fn type_params(&self) -> Vec<Arc<str>> {
        fn walk(t: &Type, out: &mut Vec<Arc<str>>) {
            match t {
                Type::Param(p) if !out.contains(p) => out.push(p.clone()),
                Type::Named { args, .. } => args.iter().for_each(|a| walk(a, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        self.arg_types.iter().for_each(|t| walk(t, &mut out));
        out
    }
}

/// What a construction builds or a deconstruction tests for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConsId {
    Functor(Functor),
    Int(i64),
}

impl ConsId {
    pub fn functor(&self) -> Option<&Functor> {
        match self {
            ConsId::Functor(f) => Some(f),
            ConsId::Int(_) => None,
        }
    }
}

impl fmt::Display for ConsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsId::Functor(func) => write!(f, "{func}"),
            ConsId::Int(i) => write!(f, "{i}"),
        }
    }
}

/// An argument of a construction: a variable or an immediate constant
/// (integer or zero-arity functor), neither of which owns a heap cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arg {
    Var(Var),
    Int(i64),
    Const(Arc<str>),
}

impl Arg {
    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Arg::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstructAnn {
    #[default]
    None,
    /// Build the new term in the cell released by the deconstruction at
    /// the given point.
    Reuse(Point),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeconstructAnn {
    #[default]
    None,
    Cacheable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalKind {
    Test(Var, Var),
    Assign(Var, Var),
    Construct { var: Var, cons: ConsId, args: Vec<Arg>, ann: ConstructAnn },
    Deconstruct { var: Var, cons: ConsId, args: Vec<Var>, ann: DeconstructAnn },
    Call { proc: String, args: Vec<Var> },
    Conj(Vec<Goal>),
    Disj(Vec<Goal>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub point: Point,
    pub kind: GoalKind,
}

impl Goal {
    pub fn new(kind: GoalKind) -> Self {
        Goal { point: Point(0), kind }
    }

    /// Variables mentioned directly by this goal (for compound goals, by
    /// all of its sub-goals).
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match &self.kind {
            GoalKind::Test(x, y) | GoalKind::Assign(x, y) => {
                out.push(x.clone());
                out.push(y.clone());
            }
            GoalKind::Construct { var, args, .. } => {
                out.push(var.clone());
                out.extend(args.iter().filter_map(|a| a.as_var().cloned()));
            }
            GoalKind::Deconstruct { var, args, .. } => {
                out.push(var.clone());
                out.extend(args.iter().cloned());
            }
            GoalKind::Call { args, .. } => out.extend(args.iter().cloned()),
            GoalKind::Conj(gs) | GoalKind::Disj(gs) => gs.iter().for_each(|g| g.collect_vars(out)),
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Goal)) {
        f(self);
        if let GoalKind::Conj(gs) | GoalKind::Disj(gs) = &self.kind {
            gs.iter().for_each(|g| g.walk(f));
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Goal)) {
        f(self);
        if let GoalKind::Conj(gs) | GoalKind::Disj(gs) = &mut self.kind {
            gs.iter_mut().for_each(|g| g.walk_mut(f));
        }
    }

    pub fn find(&self, point: Point) -> Option<&Goal> {
        let mut found = None;
        self.walk(&mut |g| {
            if g.point == point {
                found = Some(g);
            }
        });
        found
    }

    /// Reassigns program points in pre-order starting from `start`; returns
    /// the next free point.
    pub fn renumber(&mut self, start: u32) -> u32 {
        let mut next = start;
        self.walk_mut(&mut |g| {
            g.point = Point(next);
            next += 1;
        });
        next
    }

    pub fn clear_annotations(&mut self) {
        self.walk_mut(&mut |g| match &mut g.kind {
            GoalKind::Construct { ann, .. } => *ann = ConstructAnn::None,
            GoalKind::Deconstruct { ann, .. } => *ann = DeconstructAnn::None,
            _ => {}
        });
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Procedure {
    pub decl: ProcDecl,
    pub head_vars: Vec<Var>,
    pub body: Goal,
    /// Filled in by [`infer_types`]; empty straight after parsing.
    pub var_types: BTreeMap<Var, Type>,
}

impl Procedure {
    pub fn inputs(&self) -> impl Iterator<Item = &Var> {
        self.head_vars.iter().zip(&self.decl.arg_modes).filter(|(_, m)| **m == Mode::In).map(|(v, _)| v)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Var> {
        self.head_vars.iter().zip(&self.decl.arg_modes).filter(|(_, m)| **m == Mode::Out).map(|(v, _)| v)
    }

    pub fn name(&self) -> &str {
        &self.decl.name
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Module {
    pub name: String,
    pub imports: Vec<String>,
    pub types: Vec<TypeDef>,
    /// Every declared procedure, including foreign ones (which have no body).
    pub decls: Vec<ProcDecl>,
    pub procs: Vec<Procedure>,
}

impl Module {
    pub fn proc(&self, name: &str) -> Option<&Procedure> {
        self.procs.iter().find(|p| p.decl.name == name)
    }

    pub fn proc_mut(&mut self, name: &str) -> Option<&mut Procedure> {
        self.procs.iter_mut().find(|p| p.decl.name == name)
    }

    pub fn decl(&self, name: &str) -> Option<&ProcDecl> {
        self.decls.iter().find(|d| d.name == name)
    }
}
