use std::collections::BTreeMap;

use ctgc::alias::*;
use ctgc::ir::{parse_module, Functor, Type, TypeTable, Var};
use proptest::prelude::*;

fn table() -> TypeTable {
    let m = parse_module(
        ":- type t ---> e ; n(t, t) ; l(int).\n\
         :- type box ---> b(t, list(t)).\n",
    )
    .unwrap();
    let mut t = TypeTable::with_prelude();
    for d in m.types {
        t.add(d).unwrap();
    }
    t
}

fn t_ty() -> Type {
    Type::named("t", vec![])
}

fn var_types() -> BTreeMap<Var, Type> {
    let box_ty = Type::named("box", vec![]);
    let list_t = Type::named("list", vec![t_ty()]);
    [("X", t_ty()), ("Y", t_ty()), ("Z", box_ty), ("W", list_t)].iter().map(|(v, t)| (Var::new(v), t.clone())).collect()
}

/// A random well-typed path of at most `depth` field selectors, optionally
/// ending in a type selector, normalized.
fn random_ds(table: &TypeTable, vars: &BTreeMap<Var, Type>, choices: &[u8]) -> Datastructure {
    let names: Vec<&Var> = vars.keys().collect();
    let v = names[choices[0] as usize % names.len()].clone();
    let mut ty = vars[&v].clone();
    let mut path = Vec::new();
    for &c in &choices[1..] {
        let Type::Named { name, .. } = &ty else { break };
        let def = table.get(name).unwrap();
        let alts: Vec<_> = def.alternatives.iter().filter(|a| !a.args.is_empty()).collect();
        if alts.is_empty() || c % 5 == 0 {
            break;
        }
        let alt = alts[c as usize % alts.len()];
        let idx = (c as usize / 7) % alt.args.len() + 1;
        let f = Functor::new(&alt.name, alt.args.len());
        ty = table.field_type(&ty, &f, idx).unwrap();
        path.push(Selector::Field(f, idx));
    }
    if choices[0].is_multiple_of(3) {
        let reach: Vec<Type> = [t_ty(), Type::Int, Type::named("list", vec![t_ty()])]
            .into_iter()
            .filter(|t| table.reaches_strict(&ty, t))
            .collect();
        if !reach.is_empty() {
            path.push(Selector::Type(reach[choices[1] as usize % reach.len()].clone()));
        }
    }
    let env = TypeEnv::new(table, vars);
    normalize_path(&Datastructure { var: v, path }, &env).unwrap()
}

fn random_set(table: &TypeTable, vars: &BTreeMap<Var, Type>, raw: &[(Vec<u8>, Vec<u8>)]) -> AliasSet {
    let env = TypeEnv::new(table, vars);
    let mut s = AliasSet::empty();
    for (x, y) in raw {
        let (dx, dy) = (random_ds(table, vars, x), random_ds(table, vars, y));
        // Only positions of one type can be the same cell.
        if selected_type(&dx, &env).unwrap() == selected_type(&dy, &env).unwrap() {
            s.insert(dx, dy);
        }
    }
    s
}

fn raw_pairs() -> impl Strategy<Value = Vec<(Vec<u8>, Vec<u8>)>> {
    prop::collection::vec((prop::collection::vec(any::<u8>(), 2..5), prop::collection::vec(any::<u8>(), 2..5)), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalize_is_idempotent_and_never_lengthens(choices in prop::collection::vec(any::<u8>(), 2..7)) {
        let t = table();
        let vs = var_types();
        let env = TypeEnv::new(&t, &vs);
        let d = random_ds(&t, &vs, &choices);
        let n = normalize_path(&d, &env).unwrap();
        prop_assert_eq!(&n, &d);
        // Re-extending a normalized path and normalizing again stays short.
        let longer = random_ds(&t, &vs, &[choices[0], 1, 1, 1, 1, 1, 1]);
        let again = normalize_path(&longer, &env).unwrap();
        prop_assert!(again.path.len() <= longer.path.len());
        prop_assert_eq!(selected_type(&again, &env).unwrap(), selected_type(&longer, &env).unwrap());
    }

    #[test]
    fn widening_is_monotone_idempotent_and_shrinking(raw in raw_pairs()) {
        let t = table();
        let vs = var_types();
        let env = TypeEnv::new(&t, &vs);
        let a = random_set(&t, &vs, &raw);
        let w = widen_alias(&a, &env).unwrap();
        prop_assert!(alias_leq(&a, &w, &env));
        prop_assert_eq!(widen_alias(&w, &env).unwrap(), w.clone());
        prop_assert!(w.len().unwrap() <= a.len().unwrap());
    }

    #[test]
    fn join_is_a_semilattice(ra in raw_pairs(), rb in raw_pairs(), rc in raw_pairs()) {
        let t = table();
        let vs = var_types();
        let env = TypeEnv::new(&t, &vs);
        let (a, b, c) = (random_set(&t, &vs, &ra), random_set(&t, &vs, &rb), random_set(&t, &vs, &rc));
        prop_assert_eq!(alias_join(&a, &b), alias_join(&b, &a));
        prop_assert_eq!(alias_join(&alias_join(&a, &b), &c), alias_join(&a, &alias_join(&b, &c)));
        prop_assert_eq!(alias_join(&a, &a), a.clone());
        prop_assert_eq!(alias_join(&a, &AliasSet::empty()), a.clone());
        prop_assert_eq!(alias_join(&a, &AliasSet::Top), AliasSet::Top);
        prop_assert!(alias_leq(&a, &alias_join(&a, &b), &env));
    }

    #[test]
    fn closure_is_extensive_and_idempotent(raw in raw_pairs()) {
        let t = table();
        let vs = var_types();
        let env = TypeEnv::new(&t, &vs);
        let a = random_set(&t, &vs, &raw).retain_heap(&env);
        let c = altclosure(&a, &env).unwrap();
        prop_assert!(a.pairs().all(|p| c.pairs().any(|q| q == p)));
        prop_assert_eq!(altclosure(&c, &env).unwrap(), c);
    }

    #[test]
    fn text_form_round_trips(raw in raw_pairs()) {
        let t = table();
        let vs = var_types();
        let a = random_set(&t, &vs, &raw);
        prop_assert_eq!(parse_alias_set(&a.to_string(), &t).unwrap(), a);
    }
}

// Concrete-heap oracle: terms of type `t`, built by a straight-line program
// over at most four variables. Every pair of positions that end up being
// the same cell must be represented by some abstract pair.

#[derive(Clone, Debug)]
enum Op {
    Leaf(bool),
    Node(u8, u8),
    Split(u8),
    Copy(u8),
    Widen(u8),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        any::<bool>().prop_map(Op::Leaf),
        (any::<u8>(), any::<u8>()).prop_map(|(a, b)| Op::Node(a, b)),
        any::<u8>().prop_map(Op::Split),
        any::<u8>().prop_map(Op::Copy),
        any::<u8>().prop_map(Op::Widen),
    ]
}

#[derive(Clone)]
enum Cell {
    Node(Val, Val),
    IntLeaf,
}

#[derive(Clone, Copy, PartialEq)]
enum Val {
    E,
    Ref(usize),
}

struct Heap {
    cells: Vec<Cell>,
}

impl Heap {
    fn depth(&self, v: Val) -> usize {
        match v {
            Val::E => 0,
            Val::Ref(c) => match &self.cells[c] {
                Cell::IntLeaf => 1,
                Cell::Node(a, b) => 1 + self.depth(*a).max(self.depth(*b)),
            },
        }
    }

    /// Every cell-owning position below `v` with its cell id.
    fn positions(&self, v: Val, path: Vec<Selector>, out: &mut Vec<(Vec<Selector>, usize)>) {
        let Val::Ref(c) = v else { return };
        out.push((path.clone(), c));
        if let Cell::Node(a, b) = &self.cells[c] {
            for (i, child) in [(1, *a), (2, *b)] {
                let mut p = path.clone();
                p.push(Selector::Field(Functor::new("n", 2), i));
                self.positions(child, p, out);
            }
        }
    }
}

fn run_oracle(ops: &[Op]) -> Result<(), TestCaseError> {
    let table = table();
    let names = ["V0", "V1", "V2", "V3"];
    let types: BTreeMap<Var, Type> = names.iter().map(|n| (Var::new(n), t_ty())).collect();
    let env = TypeEnv::new(&table, &types);
    let mut heap = Heap { cells: Vec::new() };
    let mut vals: Vec<Val> = Vec::new();
    let mut abs = AliasSet::empty();
    let node = Functor::new("n", 2);
    for op in ops {
        let bound = vals.len();
        let next = |k: usize| Var::new(names[k]);
        let pick = |x: u8| (x as usize) % bound.max(1);
        match *op {
            Op::Leaf(e) if bound < 4 => {
                if e {
                    vals.push(Val::E);
                } else {
                    heap.cells.push(Cell::IntLeaf);
                    vals.push(Val::Ref(heap.cells.len() - 1));
                }
            }
            Op::Node(a, b) if (1..4).contains(&bound) => {
                let (a, b) = (pick(a), pick(b));
                if a == b {
                    // Normalized constructions take distinct variables.
                    continue;
                }
                if 1 + heap.depth(vals[a]).max(heap.depth(vals[b])) > 3 {
                    continue;
                }
                heap.cells.push(Cell::Node(vals[a], vals[b]));
                vals.push(Val::Ref(heap.cells.len() - 1));
                let x = next(bound);
                abs.insert(Datastructure::field(&x, &node, 1), Datastructure::var(&next(a)));
                abs.insert(Datastructure::field(&x, &node, 2), Datastructure::var(&next(b)));
            }
            Op::Split(a) if (1..=2).contains(&bound) => {
                let a = pick(a);
                let Val::Ref(c) = vals[a] else { continue };
                let Cell::Node(l, r) = heap.cells[c].clone() else { continue };
                vals.push(l);
                vals.push(r);
                let src = next(a);
                abs.insert(Datastructure::var(&next(bound)), Datastructure::field(&src, &node, 1));
                abs.insert(Datastructure::var(&next(bound + 1)), Datastructure::field(&src, &node, 2));
            }
            Op::Copy(a) if (1..4).contains(&bound) => {
                let a = pick(a);
                vals.push(vals[a]);
                abs.insert(Datastructure::var(&next(bound)), Datastructure::var(&next(a)));
            }
            Op::Widen(k) => {
                abs = maybe_widen(&abs, Some(k as usize % 4), &env).unwrap();
            }
            _ => continue,
        }
        abs = altclosure(&abs.retain_heap(&env), &env).unwrap();
    }
    let mut all: Vec<(Datastructure, usize)> = Vec::new();
    for (k, v) in vals.iter().enumerate() {
        let mut ps = Vec::new();
        heap.positions(*v, Vec::new(), &mut ps);
        all.extend(ps.into_iter().map(|(p, c)| (Datastructure { var: Var::new(names[k]), path: p }, c)));
    }
    for (i, (d1, c1)) in all.iter().enumerate() {
        for (d2, c2) in &all[i + 1..] {
            if c1 != c2 {
                continue;
            }
            if AliasPair::new(d1.clone(), d2.clone()).is_none() {
                continue;
            }
            let covered = abs.pairs().any(|p| {
                let [a, b] = p.sides();
                (covers(a, d1, &env) && covers(b, d2, &env)) || (covers(a, d2, &env) && covers(b, d1, &env))
            });
            prop_assert!(covered, "concrete sharing {d1} ~ {d2} missing from {abs}");
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn abstract_sharing_covers_concrete_sharing(ops in prop::collection::vec(op(), 1..12)) {
        run_oracle(&ops)?;
    }
}

#[test]
fn oracle_sees_sharing_between_siblings() {
    // V1 <= n(V0, V2)... written as: V0 int leaf, V1 := V0, V2 <= n(V0, V1).
    run_oracle(&[Op::Leaf(false), Op::Copy(0), Op::Node(0, 1)]).unwrap();
}
