use std::collections::BTreeMap;

use super::*;
use crate::dataflow::{analyse_module, callee_table};
use crate::pipeline::frontend;
use crate::reuse::{decide_module, ReuseConstraint, SelectionStrategy};

const CONVERT: &str = include_str!("../../bench/convert.m0");
const CONVERT2: &str = include_str!("../../bench/convert2.m0");
const NREV: &str = include_str!("../../bench/nrev.m0");
const TEMPS: &str = include_str!("../../bench/temporaries.m0");

fn compile(src: &str, c: ReuseConstraint) -> Program {
    let chk = frontend(src).unwrap();
    let a = analyse_module(&chk.module, &chk.table, &[], &BTreeMap::new(), Some(200)).unwrap();
    let callees = callee_table(&chk.module, &[]);
    let r = decide_module(&chk.module, &chk.table, &a, &callees, &BTreeMap::new(), c, SelectionStrategy::Lifo);
    Program::new(chk.table.clone(), r.annotated(&chk.module))
}

fn exec(p: &Program, entry: &str, args: &[&str], cache: bool) -> RunResult {
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    run(p, entry, &args, RunConfig { cache, track: false }).unwrap()
}

#[test]
fn convert1_reuses_both_cells() {
    let p = compile(CONVERT, ReuseConstraint::MatchingArities);
    let r = exec(&p, &p.entry_version("convert1"), &["b(a(3, east))"], false);
    assert_eq!(r.version, "convert1__r");
    assert_eq!(r.outputs.unwrap(), ["b(a(3, north))"]);
    assert_eq!(r.stats.words_allocated, 0);
    assert_eq!(r.stats.cells_reused_inplace, 2);

    let plain = exec(&p, "convert1", &["b(a(3, east))"], false);
    assert_eq!(plain.outputs.unwrap(), ["b(a(3, north))"]);
    assert_eq!(plain.stats.words_allocated, 3);
}

#[test]
fn semidet_failure_yields_no_outputs() {
    let p = compile(CONVERT, ReuseConstraint::MatchingArities);
    let r = exec(&p, "convert1", &["a(3, east)"], false);
    assert_eq!(r.outputs, None);
}

#[test]
fn nrev_words() {
    let p = compile(NREV, ReuseConstraint::MatchingArities);
    let plain = exec(&p.without_reuse(), "nrev", &["[1..5]"], false);
    assert_eq!(plain.outputs.as_deref(), Some(&["[5, 4, 3, 2, 1]".to_string()][..]));
    assert_eq!(plain.stats.words_allocated, 30);
    let r = exec(&p, &p.entry_version("nrev"), &["[1..5]"], false);
    assert_eq!(r.outputs, plain.outputs);
    assert!(r.stats.words_allocated < 30);
}

#[test]
fn cache_off_never_touches_the_cache() {
    for (src, entry, arg) in
        [(NREV, "nrev", "[1..20]"), (TEMPS, "temporaries", "10"), (CONVERT2, "convert2", "[field1(1, 2, 3)]")]
    {
        let p = compile(src, ReuseConstraint::MatchingArities);
        let r = exec(&p, &p.entry_version(entry), &[arg], false);
        assert_eq!((r.stats.cache_hits, r.stats.cache_misses), (0, 0), "{entry}");
    }
}

#[test]
fn temporaries_hit_the_cache() {
    let p = compile(TEMPS, ReuseConstraint::MatchingArities);
    let off = exec(&p, "temporaries", &["10"], false);
    let on = exec(&p, "temporaries", &["10"], true);
    assert_eq!(off.outputs, on.outputs);
    assert_eq!(on.stats.cache_hits, 9);
    let s = on.stats;
    assert_eq!(s.words_allocated + s.cache_hit_words + s.reused_words, off.stats.words_allocated);
}

#[test]
fn convert2_within_one_leaks_a_word_per_element() {
    let p = compile(CONVERT2, ReuseConstraint::WithinK(1));
    let r = exec(&p, &p.entry_version("convert2"), &["[field1(1, 2, 3), field1(4, 5, 6)]"], false);
    assert_eq!(r.outputs.unwrap(), ["[field2(1, 2), field2(4, 5)]"]);
    assert_eq!(r.stats.words_allocated, 0);
    assert_eq!(r.stats.within_k_leaked_words, 2);
}

#[test]
fn cache_buckets_are_exact_size() {
    let mut c = CellCache::default();
    c.push(2, 10);
    c.push(3, 11);
    c.push(2, 12);
    assert_eq!(c.pop(1), None);
    assert_eq!(c.pop(2), Some(12));
    assert_eq!(c.len(2), 1);
    assert_eq!(c.pop(3), Some(11));
    assert_eq!(c.pop(3), None);
}

#[test]
fn reusing_a_shared_cell_is_caught() {
    // Force a reuse whose condition does not hold: the input term is also
    // returned, so overwriting its cell makes the first output stale.
    let src = ":- module m.\n\
               :- type t ---> f(int) ; g(int).\n\
               :- pred both(t, t, t).\n\
               :- mode both(in, out, out) is det.\n\
               both(X, Z, Y) :- X => f(A), Z := X, Y <= g(A).\n";
    let chk = frontend(src).unwrap();
    let mut p = chk.module.procs[0].clone();
    let mut decon = None;
    p.body.walk_mut(&mut |g| match &mut g.kind {
        crate::ir::GoalKind::Deconstruct { .. } => decon = Some(g.point),
        crate::ir::GoalKind::Construct { ann, args, .. } if !args.is_empty() => {
            *ann = crate::ir::ConstructAnn::Reuse(decon.unwrap())
        }
        _ => {}
    });
    let prog = Program::new(chk.table.clone(), [p]);
    let err = run(&prog, "both", &["f(1)".to_string()], RunConfig::default()).unwrap_err();
    assert!(matches!(err, RuntimeError::StaleReference { .. }), "{err}");
}

#[test]
fn arity_and_literal_errors() {
    let p = compile(CONVERT, ReuseConstraint::MatchingArities);
    assert!(matches!(run(&p, "convert1", &[], RunConfig::default()), Err(RuntimeError::Arity { .. })));
    let bad = ["north".to_string()];
    assert!(matches!(run(&p, "convert1", &bad, RunConfig::default()), Err(RuntimeError::Literal(_))));
    assert!(matches!(run(&p, "nope", &[], RunConfig::default()), Err(RuntimeError::UnknownProc(_))));
}

#[test]
fn oracle_sees_no_read_after_the_last_use() {
    let p = compile(NREV, ReuseConstraint::MatchingArities).without_reuse();
    let r = run(&p, "nrev", &["[1..10]".to_string()], RunConfig { cache: false, track: true }).unwrap();
    let o = r.oracle.unwrap();
    assert!(!o.decons.is_empty());
    let construct_words: u64 = o.constructs.values().sum::<u64>() * 2;
    assert_eq!(construct_words, r.stats.words_allocated);
}
