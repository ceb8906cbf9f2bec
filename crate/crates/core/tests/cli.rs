use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ctgc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctgc")).args(args).current_dir(cwd).output().unwrap()
}

fn bench(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("bench").join(file).display().to_string()
}

fn fixture(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(file).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn kv(text: &str, key: &str) -> u64 {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap().parse().unwrap()
}

#[test]
fn run_source_prints_outputs_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctgc(&["run", &bench("convert.m0"), "convert1", "b(a(3, east))", "--kv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("b(a(3, north))"));
    assert_eq!((kv(&out, "words_allocated"), kv(&out, "reused")), (0, 2));

    let o = ctgc(&["--no-ctgc", "run", &bench("convert.m0"), "convert1", "b(a(3, east))", "--kv"], dir.path());
    let out = stdout(&o);
    assert_eq!((kv(&out, "words_allocated"), kv(&out, "reused")), (3, 0));
}

#[test]
fn semidet_failure_is_reported_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctgc(&["run", &bench("convert.m0"), "convert1", "a(3, east)"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("(failed)"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.m0");
    std::fs::write(&bad, ":- module bad.\np(X) :- q(X).\n").unwrap();
    assert_eq!(ctgc(&["compile", bad.to_str().unwrap()], dir.path()).status.code(), Some(1));
    assert_eq!(ctgc(&["compile", "missing.m0"], dir.path()).status.code(), Some(1));
    assert_eq!(ctgc(&["--constraint", "within:0", "compile", &bench("nrev.m0")], dir.path()).status.code(), Some(1));
    assert_eq!(ctgc(&["frobnicate"], dir.path()).status.code(), Some(1));
    let o = ctgc(&["run", &bench("convert.m0"), "convert1", "b(a(3,"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(ctgc(&["run", &bench("convert.m0"), "nosuch"], dir.path()).status.code(), Some(2));
    assert_eq!(ctgc(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn compile_writes_interfaces_and_archive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = ctgc(
        &["--dump", "reuse,dead", "compile", &bench("convert2.m0"), "--out-dir", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dumps = stdout(&o);
    assert!(dumps.contains("  reuse c@p7 <- d@p5 ([|]/2, cond={List0})\n"), "{dumps}");
    assert!(dumps.contains("  dead p5 List0 [|]/2 size=2"), "{dumps}");
    let iface = std::fs::read_to_string(out.join("convert2.ctgc")).unwrap();
    assert!(iface.starts_with("ctgc-interface 1\nmodule convert2\n"));
    let archive = out.join("program.json");
    let field = "[field1(1, 2, 3)]";
    let o = ctgc(&["run", archive.to_str().unwrap(), "convert2", field, "--kv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("[field2(1, 2)]"));
    assert_eq!(kv(&text, "words_allocated"), 2);
}

#[test]
fn compile_iterates_import_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctgc(&["--iterate", "compile", &fixture("iter_a.m0"), &fixture("iter_b.m0")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("3 round"), "{}", stderr(&o));
    let capped = ctgc(&["compile", "--iterate=2", &fixture("iter_a.m0"), &fixture("iter_b.m0")], dir.path());
    assert!(capped.status.success() && stderr(&capped).contains("2 round"), "{}", stderr(&capped));
    for m in ["iter_a", "iter_b"] {
        assert!(dir.path().join(format!("{m}.ctgc")).exists());
    }
    // Separate compilation against the interface written above.
    let o = ctgc(&["compile", &fixture("iter_b.m0")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    std::fs::create_dir(&suite).unwrap();
    std::fs::copy(bench("convert.m0"), suite.join("convert.m0")).unwrap();
    std::fs::write(
        suite.join("bench.toml"),
        "[[program]]\nname = \"convert1\"\nsources = [\"convert.m0\"]\nentry = \"convert1\"\nargs = [\"b(a(3, east))\"]\n",
    )
    .unwrap();
    let csv: PathBuf = dir.path().join("out.csv");
    let o = ctgc(
        &["bench", suite.to_str().unwrap(), "--configs", "no-ctgc,match+lifo", "--csv", csv.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "program,config,words,pct_vs_baseline,reused,cache_hits,leaked,seconds");
    assert!(lines[1].starts_with("convert1,no-ctgc,3,0.00,0,0,0,"), "{text}");
    assert!(lines[2].starts_with("convert1,match+lifo,0,-100.00,2,0,0,"), "{text}");
}

#[test]
fn empty_suite_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bench.toml"), "").unwrap();
    let csv = dir.path().join("out.csv");
    let o = ctgc(&["bench", ".", "--csv", csv.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        "program,config,words,pct_vs_baseline,reused,cache_hits,leaked,seconds\n"
    );
}

#[test]
fn failing_bench_row_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(bench("convert.m0"), dir.path().join("convert.m0")).unwrap();
    std::fs::write(
        dir.path().join("bench.toml"),
        "[[program]]\nname = \"broken\"\nsources = [\"convert.m0\"]\nentry = \"nosuch\"\n\n\
         [[program]]\nname = \"ok\"\nsources = [\"convert.m0\"]\nentry = \"generate\"\n",
    )
    .unwrap();
    let o = ctgc(&["bench", ".", "--configs", "match+lifo"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let table = stdout(&o);
    assert!(table.contains("broken") && table.contains("error"), "{table}");
    assert!(table.lines().any(|l| l.starts_with("ok ")), "{table}");
}
