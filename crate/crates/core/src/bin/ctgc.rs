use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctgc::bench::{run_bench, BenchSuite, DEFAULT_CONFIGS};
use ctgc::driver::{compile_all, link, run_entry, Archive, CtgcConfig, SourceModule, DUMP_KINDS};
use ctgc::interfaces::{interface_path, read_interface, write_interface};
use ctgc::reuse::{ReuseConstraint, SelectionStrategy};

const EXIT_COMPILE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_BENCH: u8 = 3;

/// Compile-time garbage collection for the core logic language.
#[derive(Parser)]
#[command(name = "ctgc", version)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Flags {
    /// Which dead cells may hold a new term: match, within:K or same-cons.
    #[arg(long, global = true, default_value = "match")]
    constraint: ReuseConstraint,
    /// lifo or random.
    #[arg(long, global = true, default_value = "lifo", value_parser = ["lifo", "random"])]
    strategy: String,
    /// Seed for the random strategy.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Widening threshold on alias set size; 0 turns widening off.
    #[arg(long, global = true, default_value_t = 200)]
    widen: usize,
    /// Recycle cacheable cells through the size-indexed cell cache.
    #[arg(long, global = true)]
    cache: bool,
    /// Plain versions only, no reuse.
    #[arg(long = "no-ctgc", global = true)]
    no_ctgc: bool,
    /// Repeat compilation of import cycles until interfaces are stable
    /// (at most N rounds, default 5).
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "5", value_name = "N")]
    iterate: Option<usize>,
    /// Comma-separated dumps to print: alias, dead, reuse.
    #[arg(long, global = true, value_delimiter = ',')]
    dump: Vec<String>,
}

impl Flags {
    fn config(&self) -> CtgcConfig {
        CtgcConfig {
            constraint: self.constraint,
            strategy: if self.strategy == "random" {
                SelectionStrategy::Random(self.seed)
            } else {
                SelectionStrategy::Lifo
            },
            widening_threshold: self.widen,
            cache: self.cache,
            ctgc_enabled: !self.no_ctgc,
            seed: self.seed,
            max_iterate_rounds: self.iterate.unwrap_or(5),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile modules: writes `.ctgc` interfaces and a program archive.
    Compile {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Where interfaces are read from and written to.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Program archive (default: OUT_DIR/program.json).
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Run an entry point of an archive or of a single source file.
    Run {
        program: PathBuf,
        entry: String,
        /// Input arguments as term literals, e.g. `[1..100]` or `b(a(3, east))`.
        args: Vec<String>,
        /// Print the statistics as one key=value per line.
        #[arg(long)]
        kv: bool,
    },
    /// Run a benchmark suite (a directory with bench.toml).
    Bench {
        suite: PathBuf,
        /// Comma-separated configuration labels, e.g. no-ctgc,match+lifo,within:1+lifo+cache.
        #[arg(long, value_delimiter = ',')]
        configs: Vec<String>,
        /// Also write the CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn print_dumps(kinds: &[String], modules: &[ctgc::driver::CompiledModule]) -> Result<(), String> {
    for k in kinds {
        if !DUMP_KINDS.contains(&k.as_str()) {
            return Err(format!("unknown dump `{k}` (expected alias, dead or reuse)"));
        }
    }
    for k in kinds {
        for m in modules {
            if modules.len() > 1 {
                println!("module {}", m.name());
            }
            print!("{}", m.dump(k).expect("checked above"));
        }
    }
    Ok(())
}

fn compile(flags: &Flags, files: &[PathBuf], out_dir: &Path, archive: Option<&Path>) -> ExitCode {
    let cfg = flags.config();
    let mut sources = Vec::new();
    for f in files {
        match SourceModule::load(f) {
            Ok(s) => sources.push(s),
            Err(e) => return fail(EXIT_COMPILE, e),
        }
    }
    let mut prior = BTreeMap::new();
    for s in &sources {
        for i in &s.module.imports {
            if sources.iter().any(|o| &o.module.name == i) || prior.contains_key(i) {
                continue;
            }
            let path = interface_path(out_dir, i);
            if !path.exists() {
                continue;
            }
            match read_interface(&path, None) {
                Ok((iface, warnings)) => {
                    warnings.iter().for_each(|w| eprintln!("warning: {w}"));
                    prior.insert(i.clone(), iface);
                }
                Err(e) => return fail(EXIT_COMPILE, e),
            }
        }
    }
    let c = match compile_all(&sources, &prior, &cfg, flags.iterate.is_some()) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_COMPILE, e),
    };
    c.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
    if flags.iterate.is_some() {
        eprintln!("{}", c.report());
    }
    if let Err(e) = print_dumps(&flags.dump, &c.modules) {
        return fail(EXIT_COMPILE, e);
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return fail(EXIT_COMPILE, format!("{}: {e}", out_dir.display()));
    }
    for m in &c.modules {
        if let Err(e) = write_interface(&m.interface, &interface_path(out_dir, m.name())) {
            return fail(EXIT_COMPILE, e);
        }
    }
    let program = match link(&c.modules) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_COMPILE, e),
    };
    let path = archive.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join("program.json"));
    if let Err(e) = std::fs::write(&path, Archive::new(cfg, program).to_json()) {
        return fail(EXIT_COMPILE, format!("{}: {e}", path.display()));
    }
    ExitCode::SUCCESS
}

fn run(flags: &Flags, program: &Path, entry: &str, args: &[String], kv: bool) -> ExitCode {
    let (prog, cfg) = if program.extension().is_some_and(|e| e == "json") {
        let text = match std::fs::read_to_string(program) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_RUNTIME, format!("{}: {e}", program.display())),
        };
        match Archive::from_json(&text) {
            Ok(a) => {
                let cfg = CtgcConfig {
                    cache: flags.cache,
                    ctgc_enabled: a.config.ctgc_enabled && !flags.no_ctgc,
                    ..a.config
                };
                (a.program, cfg)
            }
            Err(e) => return fail(EXIT_RUNTIME, format!("{}: {e}", program.display())),
        }
    } else {
        let cfg = flags.config();
        let src = match SourceModule::load(program) {
            Ok(s) => s,
            Err(e) => return fail(EXIT_COMPILE, e),
        };
        let built =
            compile_all(std::slice::from_ref(&src), &BTreeMap::new(), &cfg, flags.iterate.is_some()).and_then(|c| {
                print_dumps(&flags.dump, &c.modules).map_err(ctgc::pipeline::CompileError::Other)?;
                link(&c.modules)
            });
        match built {
            Ok(p) => (p, cfg),
            Err(e) => return fail(EXIT_COMPILE, e),
        }
    };
    match run_entry(&prog, entry, args, &cfg, false) {
        Ok(r) => {
            match &r.outputs {
                Some(outs) => outs.iter().for_each(|o| println!("{o}")),
                None => println!("(failed)"),
            }
            if kv {
                print!("{}", r.stats.key_values());
            } else {
                println!("{}", r.stats);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_RUNTIME, e),
    }
}

fn bench(suite_dir: &Path, labels: &[String], csv: Option<&Path>) -> ExitCode {
    let suite = match BenchSuite::load(suite_dir) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_BENCH, e),
    };
    let labels: Vec<String> =
        if labels.is_empty() { DEFAULT_CONFIGS.iter().map(|s| s.to_string()).collect() } else { labels.to_vec() };
    let mut configs = Vec::new();
    for l in &labels {
        match CtgcConfig::from_label(l) {
            Ok(c) => configs.push(c),
            Err(e) => return fail(EXIT_BENCH, e),
        }
    }
    let report = run_bench(suite_dir, &suite, &configs);
    print!("{}", report.table());
    if let Some(path) = csv {
        if let Err(e) = std::fs::write(path, report.csv()) {
            return fail(EXIT_BENCH, format!("{}: {e}", path.display()));
        }
    }
    match report.failures() {
        0 => ExitCode::SUCCESS,
        n => fail(EXIT_BENCH, format!("{n} benchmark row(s) failed")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_COMPILE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.cmd {
        Cmd::Compile { files, out_dir, archive } => compile(&cli.flags, files, out_dir, archive.as_deref()),
        Cmd::Run { program, entry, args, kv } => run(&cli.flags, program, entry, args, *kv),
        Cmd::Bench { suite, configs, csv } => bench(suite, configs, csv.as_deref()),
    }
}
