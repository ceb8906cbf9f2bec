use std::collections::{BTreeSet, HashMap};

use crate::ir::{Type, TypeTable, Var};

use super::{
    normalize_path, path_types, selected_type, AliasError, AliasPair, AliasSet, Datastructure, Selector, TypeEnv,
};

fn split(path: &[Selector]) -> (&[Selector], Option<&Type>) {
    match path.last() {
        Some(Selector::Type(t)) => (&path[..path.len() - 1], Some(t)),
        _ => (path, None),
    }
}

/// Suffixes `s` such that a position named by `from·s` may be a position
/// named by `to`, both paths being taken on one variable of type `var_ty`.
pub fn suffixes(var_ty: &Type, from: &[Selector], to: &[Selector], table: &TypeTable) -> Vec<Vec<Selector>> {
    let (p, sigma) = split(from);
    let (q, tau) = split(to);
    let mut out = Vec::new();
    match (sigma, tau) {
        (None, None) => {
            if q.starts_with(p) {
                out.push(q[p.len()..].to_vec());
            }
        }
        (None, Some(tau)) => {
            if q.starts_with(p) {
                let mut s = q[p.len()..].to_vec();
                s.push(Selector::Type(tau.clone()));
                out.push(s);
            } else if p.starts_with(q) {
                let Some(tp) = path_types(table, var_ty, p).and_then(|mut ts| ts.pop()) else { return out };
                if &tp == tau {
                    out.push(Vec::new());
                }
                if table.reaches_strict(&tp, tau) {
                    out.push(vec![Selector::Type(tau.clone())]);
                }
            }
        }
        (Some(sigma), None) => {
            if q.len() > p.len() && q.starts_with(p) {
                let Some(ts) = path_types(table, var_ty, q) else { return out };
                for j in p.len() + 1..=q.len() {
                    if &ts[j] == sigma {
                        out.push(q[j..].to_vec());
                    }
                }
            }
        }
        (Some(sigma), Some(tau)) => {
            if p.starts_with(q) || q.starts_with(p) {
                if sigma == tau {
                    out.push(Vec::new());
                }
                if table.reaches_strict(sigma, tau) {
                    out.push(vec![Selector::Type(tau.clone())]);
                }
            }
        }
    }
    out
}

struct Closer<'e, 'a> {
    env: &'e TypeEnv<'a>,
    set: BTreeSet<AliasPair>,
    work: Vec<AliasPair>,
}

impl Closer<'_, '_> {
    fn add(&mut self, x: &Datastructure, s: &[Selector], y: &Datastructure) -> Result<(), AliasError> {
        let x = if s.is_empty() {
            x.clone()
        } else {
            // An ill-typed extension names no position.
            let Ok(x) = normalize_path(&x.extend(s), self.env) else { return Ok(()) };
            x
        };
        for d in [&x, y] {
            if !self.env.table.is_heap(&selected_type(d, self.env)?) {
                return Ok(());
            }
        }
        if let Some(p) = AliasPair::new(x, y.clone()) {
            if !self.set.contains(&p) {
                self.set.insert(p.clone());
                self.work.push(p);
            }
        }
        Ok(())
    }

    /// Pairs `(a, b)` and `(c, d)` with `b` and `c` on one variable.
    fn combine(
        &mut self,
        a: &Datastructure,
        b: &Datastructure,
        c: &Datastructure,
        d: &Datastructure,
    ) -> Result<(), AliasError> {
        let ty = self.env.var_type(&b.var)?;
        for s in suffixes(ty, &b.path, &c.path, self.env.table) {
            self.add(a, &s, d)?;
        }
        for s in suffixes(ty, &c.path, &b.path, self.env.table) {
            self.add(d, &s, a)?;
        }
        Ok(())
    }
}

/// Closes a set under transitive sharing through common variables.
/// Derived pairs are normalized and restricted to heap-typed positions.
pub fn altclosure(a: &AliasSet, env: &TypeEnv) -> Result<AliasSet, AliasError> {
    let AliasSet::Set(s) = a else { return Ok(AliasSet::Top) };
    let mut c = Closer { env, set: s.clone(), work: s.iter().rev().cloned().collect() };
    // Every pair taken off the work list, and per variable the pairs
    // mentioning it.
    let mut done: Vec<AliasPair> = Vec::new();
    let mut index: HashMap<Var, Vec<usize>> = HashMap::new();
    while let Some(p) = c.work.pop() {
        let id = done.len();
        done.push(p);
        let p = &done[id];
        let mut partners: Vec<usize> = Vec::new();
        for v in [&p.a.var, &p.b.var] {
            let ids = index.entry(v.clone()).or_default();
            if ids.last() != Some(&id) {
                ids.push(id);
            }
            partners.extend(ids.iter().copied());
        }
        partners.sort_unstable();
        partners.dedup();
        for q in partners {
            let q = &done[q];
            for (x, y) in [(&p.a, &p.b), (&p.b, &p.a)] {
                for (z, w) in [(&q.a, &q.b), (&q.b, &q.a)] {
                    if y.var == z.var {
                        c.combine(x, y, z, w)?;
                    }
                }
            }
        }
    }
    Ok(AliasSet::Set(c.set))
}
