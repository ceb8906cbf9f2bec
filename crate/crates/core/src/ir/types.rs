use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Alternative, Determinism, Functor, Mode, ProcDecl, Type, TypeDef};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeTableError {
    #[error("type `{0}` is declared twice with different definitions")]
    DuplicateType(String),
    #[error("functor `{functor}` is declared in both `{first}` and `{second}`")]
    DuplicateFunctor { functor: String, first: String, second: String },
    #[error("functor `{0}` appears twice in the same type")]
    RepeatedAlternative(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{name}` expects {expected} parameter(s), got {got}")]
    TypeArity { name: String, expected: usize, got: usize },
    #[error("unknown functor `{0}`")]
    UnknownFunctor(String),
    #[error("functor `{functor}` does not belong to type `{ty}`")]
    ForeignFunctor { functor: String, ty: String },
}

/// All type definitions visible to a module, with a functor index.
///
/// Functor names are unique across the table, so a name alone identifies
/// the type it builds.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TypeTable {
    defs: BTreeMap<Arc<str>, TypeDef>,
    #[serde(skip)]
    functors: HashMap<Arc<str>, (Arc<str>, usize)>,
}

fn prelude_types() -> Vec<TypeDef> {
    let t = Type::param("T");
    vec![
        TypeDef {
            name: Arc::from("bool"),
            params: vec![],
            alternatives: vec![
                Alternative { name: Arc::from("no"), args: vec![] },
                Alternative { name: Arc::from("yes"), args: vec![] },
            ],
        },
        TypeDef {
            name: Arc::from("list"),
            params: vec![Arc::from("T")],
            alternatives: vec![
                Alternative { name: Arc::from("[]"), args: vec![] },
                Alternative { name: Arc::from("[|]"), args: vec![t.clone(), Type::named("list", vec![t])] },
            ],
        },
    ]
}

/// Arithmetic and comparison primitives available in every module.
pub const BUILTIN_PREDS: &[&str] =
    &["int_add", "int_sub", "int_mul", "int_div", "int_mod", "int_lt", "int_le", "int_gt", "int_ge", "int_eq"];

pub fn builtin_decls() -> Vec<ProcDecl> {
    BUILTIN_PREDS
        .iter()
        .map(|name| {
            let out = match *name {
                "int_add" | "int_sub" | "int_mul" | "int_div" | "int_mod" => Type::Int,
                _ => Type::named("bool", vec![]),
            };
            ProcDecl {
                name: name.to_string(),
                arg_types: vec![Type::Int, Type::Int, out],
                arg_modes: vec![Mode::In, Mode::In, Mode::Out],
                determinism: Determinism::Det,
                foreign: false,
                foreign_alias: None,
            }
        })
        .collect()
}

impl TypeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table holding the prelude types `bool` and `list(T)`.
    pub fn with_prelude() -> Self {
        let mut table = Self::new();
        for def in prelude_types() {
            table.add(def).expect("prelude types are consistent");
        }
        table
    }

    pub fn is_prelude(def: &TypeDef) -> bool {
        prelude_types().iter().any(|p| p == def)
    }

    /// Adds a definition. Re-declaring an identical definition is accepted.
    pub fn add(&mut self, def: TypeDef) -> Result<(), TypeTableError> {
        if let Some(existing) = self.defs.get(&def.name) {
            if *existing == def {
                return Ok(());
            }
            return Err(TypeTableError::DuplicateType(def.name.to_string()));
        }
        let mut seen = BTreeSet::new();
        for alt in &def.alternatives {
            if !seen.insert(alt.name.clone()) {
                return Err(TypeTableError::RepeatedAlternative(alt.name.to_string()));
            }
            if let Some((other, _)) = self.functors.get(&alt.name) {
                return Err(TypeTableError::DuplicateFunctor {
                    functor: alt.name.to_string(),
                    first: other.to_string(),
                    second: def.name.to_string(),
                });
            }
        }
        for (i, alt) in def.alternatives.iter().enumerate() {
            self.functors.insert(alt.name.clone(), (def.name.clone(), i));
        }
        self.defs.insert(def.name.clone(), def);
        Ok(())
    }

    /// Rebuilds the functor index (needed after deserialization).
    pub fn reindex(&mut self) {
        self.functors.clear();
        for def in self.defs.values() {
            for (i, alt) in def.alternatives.iter().enumerate() {
                self.functors.insert(alt.name.clone(), (def.name.clone(), i));
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&TypeDef> {
        self.defs.get(name)
    }

    pub fn defs(&self) -> impl Iterator<Item = &TypeDef> {
        self.defs.values()
    }

    /// The type declaring `name` and the functor's alternative index.
    pub fn functor(&self, name: &str) -> Option<(&TypeDef, usize)> {
        let (ty, idx) = self.functors.get(name)?;
        Some((&self.defs[ty], *idx))
    }

    pub fn functor_arity(&self, name: &str) -> Option<usize> {
        self.functor(name).map(|(def, i)| def.alternatives[i].args.len())
    }

    /// Checks that every named type in `ty` is declared with the right
    /// number of parameters, and that parameters are among `params`.
    pub fn check_type(&self, ty: &Type, params: &[Arc<str>]) -> Result<(), TypeTableError> {
        match ty {
            Type::Param(p) if !params.contains(p) => Err(TypeTableError::UnknownType(p.to_string())),
            Type::Named { name, args } => {
                let def = self.defs.get(name).ok_or_else(|| TypeTableError::UnknownType(name.to_string()))?;
                if def.params.len() != args.len() {
                    return Err(TypeTableError::TypeArity {
                        name: name.to_string(),
                        expected: def.params.len(),
                        got: args.len(),
                    });
                }
                args.iter().try_for_each(|a| self.check_type(a, params))
            }
            _ => Ok(()),
        }
    }

    /// Can a value of this type own (or point into) heap cells? Type
    /// parameters are assumed to.
    pub fn is_heap(&self, ty: &Type) -> bool {
        match ty {
            Type::Int | Type::Char | Type::Str | Type::Float => false,
            Type::Param(_) => true,
            Type::Named { name, .. } => self.defs.get(name).map(|d| !d.is_enum_like()).unwrap_or(true),
        }
    }

    /// Words occupied by a cell built with `functor`: one per argument,
    /// none for constants (which are stored in the tagged word itself).
    pub fn cell_size(&self, functor: &Functor, ty: &Type) -> Result<Option<usize>, TypeTableError> {
        let (def, idx) =
            self.functor(&functor.name).ok_or_else(|| TypeTableError::UnknownFunctor(functor.to_string()))?;
        let belongs = match ty {
            Type::Named { name, .. } => *name == def.name,
            _ => false,
        };
        if !belongs || def.alternatives[idx].args.len() != functor.arity {
            return Err(TypeTableError::ForeignFunctor { functor: functor.to_string(), ty: ty.to_string() });
        }
        if def.is_enum_like() || functor.arity == 0 {
            return Ok(None);
        }
        Ok(Some(functor.arity))
    }

    /// The type of argument `index` (1-based) of `functor` inside a term of
    /// type `parent`.
    pub fn field_type(&self, parent: &Type, functor: &Functor, index: usize) -> Option<Type> {
        let Type::Named { name, args } = parent else { return None };
        let (def, idx) = self.functor(&functor.name)?;
        if def.name != *name || index == 0 {
            return None;
        }
        let alt = &def.alternatives[idx];
        if alt.args.len() != functor.arity || index > alt.args.len() {
            return None;
        }
        let subst: BTreeMap<Arc<str>, Type> = def.params.iter().cloned().zip(args.iter().cloned()).collect();
        Some(alt.args[index - 1].substitute(&subst))
    }

    /// Types of the immediate arguments of any alternative of `ty`.
    pub fn child_types(&self, ty: &Type) -> Vec<Type> {
        let Type::Named { name, args } = ty else { return Vec::new() };
        let Some(def) = self.defs.get(name) else { return Vec::new() };
        let subst: BTreeMap<Arc<str>, Type> = def.params.iter().cloned().zip(args.iter().cloned()).collect();
        let mut out: Vec<Type> = Vec::new();
        for alt in &def.alternatives {
            for a in &alt.args {
                let t = a.substitute(&subst);
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Is there a strict subterm of type `to` in some term of type `from`?
    pub fn reaches_strict(&self, from: &Type, to: &Type) -> bool {
        let mut seen: BTreeSet<Type> = BTreeSet::new();
        let mut queue: VecDeque<Type> = self.child_types(from).into();
        while let Some(t) = queue.pop_front() {
            if &t == to {
                return true;
            }
            if seen.insert(t.clone()) {
                queue.extend(self.child_types(&t));
            }
        }
        false
    }
}
