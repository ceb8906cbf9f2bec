//! Possible-sharing alias domain over selector paths.
//!
//! A pair `(d1, d2)` records that the subterms named by `d1` and `d2` may be
//! the same heap cell. Sharing of deeper subterms follows from the paths and
//! is derived by [`altclosure`].

mod closure;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Functor, Type, TypeTable, Var};

pub use closure::{altclosure, suffixes};
pub use text::{parse_alias_set, parse_datastructure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AliasError {
    #[error("variable `{0}` has no known type")]
    UntypedVar(Var),
    #[error("ill-typed selector path `{0}`")]
    IllTyped(String),
    #[error("variable `{0}` is not mapped by the renaming")]
    Unmapped(Var),
    #[error("bad alias text: {0}")]
    Syntax(String),
}

/// The type information needed to interpret selector paths.
#[derive(Clone, Copy)]
pub struct TypeEnv<'a> {
    pub table: &'a TypeTable,
    pub vars: &'a BTreeMap<Var, Type>,
}

impl<'a> TypeEnv<'a> {
    pub fn new(table: &'a TypeTable, vars: &'a BTreeMap<Var, Type>) -> Self {
        TypeEnv { table, vars }
    }

    pub fn var_type(&self, v: &Var) -> Result<&'a Type, AliasError> {
        self.vars.get(v).ok_or_else(|| AliasError::UntypedVar(v.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Selector {
    /// Argument `index` (1-based) of a cell built with the functor.
    Field(Functor, usize),
    /// Every position of the given type strictly below the path so far.
    Type(Type),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Datastructure {
    pub var: Var,
    pub path: Vec<Selector>,
}

impl Datastructure {
    pub fn var(v: &Var) -> Self {
        Datastructure { var: v.clone(), path: Vec::new() }
    }

    pub fn field(v: &Var, functor: &Functor, index: usize) -> Self {
        Datastructure { var: v.clone(), path: vec![Selector::Field(functor.clone(), index)] }
    }

    /// The path up to (not including) a trailing type selector.
    pub fn plain(&self) -> &[Selector] {
        match self.path.last() {
            Some(Selector::Type(_)) => &self.path[..self.path.len() - 1],
            _ => &self.path,
        }
    }

    pub fn type_sel(&self) -> Option<&Type> {
        match self.path.last() {
            Some(Selector::Type(t)) => Some(t),
            _ => None,
        }
    }

    /// Unnormalized concatenation.
    pub fn extend(&self, suffix: &[Selector]) -> Datastructure {
        let mut path = self.path.clone();
        path.extend_from_slice(suffix);
        Datastructure { var: self.var.clone(), path }
    }

    pub fn with_var(&self, v: &Var) -> Datastructure {
        Datastructure { var: v.clone(), path: self.path.clone() }
    }
}

/// Types selected by successive prefixes of `path` starting from `ty`; the
/// result has one more element than `path`.
pub(crate) fn path_types(table: &TypeTable, ty: &Type, path: &[Selector]) -> Option<Vec<Type>> {
    let mut out = Vec::with_capacity(path.len() + 1);
    out.push(ty.clone());
    for s in path {
        let cur = out.last().unwrap();
        let next = match s {
            Selector::Field(f, i) => table.field_type(cur, f, *i)?,
            Selector::Type(t) => {
                if !table.reaches_strict(cur, t) {
                    return None;
                }
                t.clone()
            }
        };
        out.push(next);
    }
    Some(out)
}

fn ill_typed(d: &Datastructure) -> AliasError {
    AliasError::IllTyped(d.to_string())
}

/// The type of the subterm(s) named by `d`.
pub fn selected_type(d: &Datastructure, env: &TypeEnv) -> Result<Type, AliasError> {
    let ty = env.var_type(&d.var)?;
    path_types(env.table, ty, &d.path).map(|mut ts| ts.pop().unwrap()).ok_or_else(|| ill_typed(d))
}

/// Collapses the path from the first type selector, or from the first
/// selector whose type repeats an earlier selected type, into a single type
/// selector for the finally selected type.
pub fn normalize_path(d: &Datastructure, env: &TypeEnv) -> Result<Datastructure, AliasError> {
    let ty = env.var_type(&d.var)?;
    let types = path_types(env.table, ty, &d.path).ok_or_else(|| ill_typed(d))?;
    let mut cut = None;
    for (i, s) in d.path.iter().enumerate() {
        // types[i + 1] is selected by d.path[i]; the variable's own type
        // (types[0]) does not count as a revisit.
        if matches!(s, Selector::Type(_)) || types[1..=i].contains(&types[i + 1]) {
            cut = Some(i);
            break;
        }
    }
    Ok(match cut {
        None => d.clone(),
        Some(i) => {
            let mut path = d.path[..i].to_vec();
            path.push(Selector::Type(types.last().unwrap().clone()));
            Datastructure { var: d.var.clone(), path }
        }
    })
}

/// An unordered pair of datastructures, stored with the smaller side first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AliasPair {
    a: Datastructure,
    b: Datastructure,
}

/// Does every position named by `deep` lie strictly below the single
/// position `top`?
fn strictly_below(deep: &Datastructure, top: &Datastructure) -> bool {
    if deep.var != top.var || top.type_sel().is_some() {
        return false;
    }
    let p = deep.plain();
    p.starts_with(&top.path) && (p.len() > top.path.len() || deep.type_sel().is_some())
}

impl AliasPair {
    /// `None` for pairs that carry no information: a position with itself,
    /// or a position with its own strict subterms.
    pub fn new(x: Datastructure, y: Datastructure) -> Option<AliasPair> {
        if x == y && x.type_sel().is_none() {
            return None;
        }
        if strictly_below(&x, &y) || strictly_below(&y, &x) {
            return None;
        }
        Some(if x <= y { AliasPair { a: x, b: y } } else { AliasPair { a: y, b: x } })
    }

    pub fn first(&self) -> &Datastructure {
        &self.a
    }

    pub fn second(&self) -> &Datastructure {
        &self.b
    }

    pub fn sides(&self) -> [&Datastructure; 2] {
        [&self.a, &self.b]
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.a.var == *v || self.b.var == *v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AliasSet {
    Top,
    Set(BTreeSet<AliasPair>),
}

impl Default for AliasSet {
    fn default() -> Self {
        AliasSet::empty()
    }
}

impl AliasSet {
    pub fn empty() -> Self {
        AliasSet::Set(BTreeSet::new())
    }

    pub fn is_top(&self) -> bool {
        matches!(self, AliasSet::Top)
    }

    /// Number of pairs; `None` for top.
    pub fn len(&self) -> Option<usize> {
        match self {
            AliasSet::Top => None,
            AliasSet::Set(s) => Some(s.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = &AliasPair> {
        let set = match self {
            AliasSet::Top => None,
            AliasSet::Set(s) => Some(s),
        };
        set.into_iter().flatten()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = AliasPair>) -> Self {
        AliasSet::Set(pairs.into_iter().collect())
    }

    /// Adds a pair unless it is trivial. No effect on top.
    pub fn insert(&mut self, x: Datastructure, y: Datastructure) {
        if let (AliasSet::Set(s), Some(p)) = (self, AliasPair::new(x, y)) {
            s.insert(p);
        }
    }

    /// Drops pairs with a side that cannot own heap cells.
    pub fn retain_heap(&self, env: &TypeEnv) -> AliasSet {
        match self {
            AliasSet::Top => AliasSet::Top,
            AliasSet::Set(s) => AliasSet::Set(
                s.iter()
                    .filter(|p| {
                        p.sides().iter().all(|d| selected_type(d, env).map(|t| env.table.is_heap(&t)).unwrap_or(true))
                    })
                    .cloned()
                    .collect(),
            ),
        }
    }
}

/// Replaces every nonempty path by a type selector for its selected type.
pub fn widen_alias(a: &AliasSet, env: &TypeEnv) -> Result<AliasSet, AliasError> {
    let AliasSet::Set(s) = a else { return Ok(AliasSet::Top) };
    let widen = |d: &Datastructure| -> Result<Datastructure, AliasError> {
        if d.path.is_empty() {
            return Ok(d.clone());
        }
        Ok(Datastructure { var: d.var.clone(), path: vec![Selector::Type(selected_type(d, env)?)] })
    };
    let mut out = AliasSet::empty();
    for p in s {
        out.insert(widen(&p.a)?, widen(&p.b)?);
    }
    Ok(out)
}

/// Widens when the set holds more than `threshold` pairs (`None` disables
/// widening).
pub fn maybe_widen(a: &AliasSet, threshold: Option<usize>, env: &TypeEnv) -> Result<AliasSet, AliasError> {
    match (a.len(), threshold) {
        (Some(n), Some(t)) if n > t => widen_alias(a, env),
        _ => Ok(a.clone()),
    }
}

/// Is every position named by `small` also named by `big`?
pub fn covers(big: &Datastructure, small: &Datastructure, env: &TypeEnv) -> bool {
    if big.var != small.var {
        return false;
    }
    let Some(tau) = big.type_sel() else { return big.path == small.path };
    let p = big.plain();
    let q = small.plain();
    if !q.starts_with(p) {
        return false;
    }
    match small.type_sel() {
        Some(t) => t == tau,
        None => q.len() > p.len() && selected_type(small, env).map(|t| &t == tau).unwrap_or(false),
    }
}

fn pair_covers(big: &AliasPair, small: &AliasPair, env: &TypeEnv) -> bool {
    (covers(&big.a, &small.a, env) && covers(&big.b, &small.b, env))
        || (covers(&big.a, &small.b, env) && covers(&big.b, &small.a, env))
}

/// Containment in the concretization order, top greatest.
pub fn alias_leq(a: &AliasSet, b: &AliasSet, env: &TypeEnv) -> bool {
    match (a, b) {
        (_, AliasSet::Top) => true,
        (AliasSet::Top, _) => false,
        (AliasSet::Set(x), AliasSet::Set(y)) => {
            x.iter().all(|p| y.contains(p) || y.iter().any(|q| pair_covers(q, p, env)))
        }
    }
}

pub fn alias_join(a: &AliasSet, b: &AliasSet) -> AliasSet {
    match (a, b) {
        (AliasSet::Set(x), AliasSet::Set(y)) => AliasSet::Set(x.union(y).cloned().collect()),
        _ => AliasSet::Top,
    }
}

/// Keeps the pairs whose two variables are both in `vars`.
pub fn project(a: &AliasSet, vars: &BTreeSet<Var>) -> AliasSet {
    match a {
        AliasSet::Top => AliasSet::Top,
        AliasSet::Set(s) => {
            AliasSet::Set(s.iter().filter(|p| vars.contains(&p.a.var) && vars.contains(&p.b.var)).cloned().collect())
        }
    }
}

/// Drops every pair mentioning one of `vars`.
pub fn remove_vars(a: &AliasSet, vars: &BTreeSet<Var>) -> AliasSet {
    match a {
        AliasSet::Top => AliasSet::Top,
        AliasSet::Set(s) => {
            AliasSet::Set(s.iter().filter(|p| !vars.contains(&p.a.var) && !vars.contains(&p.b.var)).cloned().collect())
        }
    }
}

pub fn rename(a: &AliasSet, map: &BTreeMap<Var, Var>) -> Result<AliasSet, AliasError> {
    let AliasSet::Set(s) = a else { return Ok(AliasSet::Top) };
    let sub = |d: &Datastructure| -> Result<Datastructure, AliasError> {
        map.get(&d.var).map(|v| d.with_var(v)).ok_or_else(|| AliasError::Unmapped(d.var.clone()))
    };
    let mut out = AliasSet::empty();
    for p in s {
        out.insert(sub(&p.a)?, sub(&p.b)?);
    }
    Ok(out)
}

/// Applies a type-parameter substitution to type selectors, then
/// re-normalizes in `env` (the caller's scope) and drops pairs that can no
/// longer share heap cells.
pub fn instantiate(a: &AliasSet, subst: &BTreeMap<Arc<str>, Type>, env: &TypeEnv) -> Result<AliasSet, AliasError> {
    let AliasSet::Set(s) = a else { return Ok(AliasSet::Top) };
    let inst = |d: &Datastructure| -> Result<Datastructure, AliasError> {
        let path = d
            .path
            .iter()
            .map(|s| match s {
                Selector::Type(t) => Selector::Type(t.substitute(subst)),
                f => f.clone(),
            })
            .collect();
        normalize_path(&Datastructure { var: d.var.clone(), path }, env)
    };
    let mut out = AliasSet::empty();
    for p in s {
        out.insert(inst(&p.a)?, inst(&p.b)?);
    }
    Ok(out.retain_heap(env))
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Field(func, i) => write!(f, "{},{}", func.name, i),
            Selector::Type(t) => write!(f, "T({t})"),
        }
    }
}

impl fmt::Display for Datastructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.var)?;
        for (i, s) in self.path.iter().enumerate() {
            f.write_str(if i == 0 { "^" } else { "." })?;
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Display for AliasPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alias( {} , {} )", self.a, self.b)
    }
}

/// `top`, or the pairs sorted by their text inside braces.
impl fmt::Display for AliasSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AliasSet::Top => f.write_str("top"),
            AliasSet::Set(s) if s.is_empty() => f.write_str("{}"),
            AliasSet::Set(s) => {
                let mut items: Vec<String> = s.iter().map(|p| p.to_string()).collect();
                items.sort();
                write!(f, "{{ {} }}", items.join(" "))
            }
        }
    }
}
