//! Ties the passes together: compile sets of modules (optionally iterating
//! over mutually dependent ones), link them into a runnable archive, run
//! entry points and produce dumps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataflow::{analyse_module, callee_table, ModuleAnalysis, ProcSummary};
use crate::interfaces::{module_order, InterfaceFile};
use crate::ir::{parse_module, Module, ProcDecl, Procedure, TypeDef, TypeTable};
use crate::pipeline::{check_module, Checked, CompileError};
use crate::reuse::{decide_module, ModuleReuse, ReuseConstraint, SelectionStrategy, VersionInfo};
use crate::runtime::{run, Program, RunConfig, RunResult, RuntimeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtgcConfig {
    pub constraint: ReuseConstraint,
    /// The seed inside `Random` is ignored in favour of `seed`.
    pub strategy: SelectionStrategy,
    /// Alias set size above which widening kicks in; 0 disables it.
    pub widening_threshold: usize,
    pub cache: bool,
    pub ctgc_enabled: bool,
    pub seed: u64,
    pub max_iterate_rounds: usize,
}

impl Default for CtgcConfig {
    fn default() -> Self {
        CtgcConfig {
            constraint: ReuseConstraint::MatchingArities,
            strategy: SelectionStrategy::Lifo,
            widening_threshold: 200,
            cache: false,
            ctgc_enabled: true,
            seed: 0,
            max_iterate_rounds: 5,
        }
    }
}

impl CtgcConfig {
    pub fn selection(&self) -> SelectionStrategy {
        match self.strategy {
            SelectionStrategy::Lifo => SelectionStrategy::Lifo,
            SelectionStrategy::Random(_) => SelectionStrategy::Random(self.seed),
        }
    }

    pub fn threshold(&self) -> Option<usize> {
        (self.widening_threshold > 0).then_some(self.widening_threshold)
    }

    /// Short label such as `match+lifo` or `no-ctgc+cache`.
    pub fn label(&self) -> String {
        let mut s = if self.ctgc_enabled {
            let strat = match self.strategy {
                SelectionStrategy::Lifo => "lifo".to_string(),
                SelectionStrategy::Random(_) => format!("random:{}", self.seed),
            };
            format!("{}+{strat}", self.constraint)
        } else {
            "no-ctgc".to_string()
        };
        if self.cache {
            s.push_str("+cache");
        }
        s
    }

    /// Parses a label: `+`-separated parts out of `no-ctgc`, a constraint,
    /// `lifo`, `random[:SEED]` and `cache`.
    pub fn from_label(label: &str) -> Result<Self, String> {
        let mut c = CtgcConfig::default();
        for part in label.split('+') {
            match part {
                "no-ctgc" => c.ctgc_enabled = false,
                "cache" => c.cache = true,
                "lifo" => c.strategy = SelectionStrategy::Lifo,
                "random" => c.strategy = SelectionStrategy::Random(0),
                _ => {
                    if let Some(seed) = part.strip_prefix("random:") {
                        c.seed = seed.parse().map_err(|_| format!("bad seed in `{part}`"))?;
                        c.strategy = SelectionStrategy::Random(c.seed);
                    } else {
                        c.constraint = part.parse().map_err(|e| format!("config `{label}`: {e}"))?;
                    }
                }
            }
        }
        Ok(c)
    }
}

/// A parsed source file.
#[derive(Clone, Debug)]
pub struct SourceModule {
    pub file: String,
    pub text: String,
    pub module: Module,
}

impl SourceModule {
    pub fn parse(file: &str, text: &str) -> Result<Self, CompileError> {
        let module = parse_module(text).map_err(|source| CompileError::Parse { file: file.to_string(), source })?;
        Ok(SourceModule { file: file.to_string(), text: text.to_string(), module })
    }

    pub fn load(path: &Path) -> Result<Self, CompileError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CompileError::Other(format!("{}: {e}", path.display())))?;
        Self::parse(&path.display().to_string(), &text)
    }
}

#[derive(Clone, Debug)]
pub struct CompiledModule {
    pub checked: Checked,
    pub analysis: ModuleAnalysis,
    pub reuse: ModuleReuse,
    /// All versions, annotated.
    pub procs: Vec<Procedure>,
    pub interface: InterfaceFile,
}

impl CompiledModule {
    pub fn name(&self) -> &str {
        &self.checked.module.name
    }

    /// `alias`, `dead` or `reuse`.
    pub fn dump(&self, kind: &str) -> Option<String> {
        let m = &self.checked.module;
        let mut s = String::new();
        match kind {
            "alias" => {
                for p in &m.procs {
                    if let Some(sum) = self.analysis.summaries.get(p.name()) {
                        let _ = writeln!(s, "summary {} {}", p.decl.id(), sum.exit_aliases);
                    }
                }
            }
            "dead" => {
                for p in &m.procs {
                    let _ = writeln!(s, "proc {}", p.decl.id());
                    for d in self.analysis.procs.get(p.name()).map(|a| a.dead.as_slice()).unwrap_or_default() {
                        let _ = writeln!(s, "  {d}");
                    }
                }
            }
            "reuse" => s = self.reuse.dump(m),
            _ => return None,
        }
        Some(s)
    }
}

pub const DUMP_KINDS: [&str; 3] = ["alias", "dead", "reuse"];

/// What a module sees of its imports.
struct ImportView {
    types: Vec<TypeDef>,
    decls: Vec<ProcDecl>,
    summaries: BTreeMap<String, ProcSummary>,
    versions: BTreeMap<String, VersionInfo>,
}

fn import_view(m: &Module, env: &BTreeMap<String, InterfaceFile>) -> Result<ImportView, CompileError> {
    let mut view =
        ImportView { types: Vec::new(), decls: Vec::new(), summaries: BTreeMap::new(), versions: BTreeMap::new() };
    let mut seen_types = BTreeSet::new();
    let imports: BTreeSet<&String> = m.imports.iter().filter(|i| **i != m.name).collect();
    for import in imports {
        let iface = env
            .get(import)
            .ok_or_else(|| CompileError::MissingImport { module: m.name.clone(), import: import.clone() })?;
        let table = iface.table().map_err(|e| CompileError::Other(format!("interface of `{import}`: {e}")))?;
        for t in &iface.types {
            if seen_types.insert(t.name.clone()) {
                view.types.push(t.clone());
            }
        }
        view.decls.extend(iface.decls());
        view.summaries.extend(iface.summaries(&table));
        view.versions.extend(iface.versions());
    }
    Ok(view)
}

/// Compiles one module against the interfaces of its imports.
pub fn compile_module(
    src: &SourceModule,
    env: &BTreeMap<String, InterfaceFile>,
    cfg: &CtgcConfig,
) -> Result<CompiledModule, CompileError> {
    let view = import_view(&src.module, env)?;
    let checked = check_module(src.module.clone(), &view.types, &view.decls)?;
    let m = &checked.module;
    let analysis = analyse_module(m, &checked.table, &view.decls, &view.summaries, cfg.threshold())
        .map_err(|source| CompileError::Dataflow { module: m.name.clone(), source })?;
    let reuse = if cfg.ctgc_enabled {
        let callees = callee_table(m, &view.decls);
        decide_module(m, &checked.table, &analysis, &callees, &view.versions, cfg.constraint, cfg.selection())
    } else {
        ModuleReuse::disabled(m)
    };
    let procs = reuse.annotated(m);
    let visible: Vec<TypeDef> = checked.table.defs().cloned().collect();
    let interface = InterfaceFile::from_results(m, &src.text, &visible, &analysis, &reuse);
    Ok(CompiledModule { checked, analysis, reuse, procs, interface })
}

#[derive(Clone, Debug)]
pub struct Compilation {
    /// In compilation order.
    pub modules: Vec<CompiledModule>,
    pub rounds: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// The interfaces produced in each round.
    pub history: Vec<BTreeMap<String, InterfaceFile>>,
}

impl Compilation {
    pub fn module(&self, name: &str) -> Option<&CompiledModule> {
        self.modules.iter().find(|m| m.name() == name)
    }

    pub fn report(&self) -> String {
        if self.converged {
            format!("converged after {} round(s)", self.rounds)
        } else {
            format!("not converged after {} round(s)", self.rounds)
        }
    }
}

/// Compiles `sources` in dependency order. Imports outside the set come
/// from `prior`. Modules of an import cycle see stubs (top summaries) for
/// members not compiled yet; with `iterate`, whole rounds are repeated
/// until no interface hash changes or `max_iterate_rounds` is reached.
pub fn compile_all(
    sources: &[SourceModule],
    prior: &BTreeMap<String, InterfaceFile>,
    cfg: &CtgcConfig,
    iterate: bool,
) -> Result<Compilation, CompileError> {
    let mut by_name: BTreeMap<&str, &SourceModule> = BTreeMap::new();
    for s in sources {
        if by_name.insert(&s.module.name, s).is_some() {
            return Err(CompileError::Other(format!("module `{}` given twice", s.module.name)));
        }
    }
    let modules: Vec<&Module> = sources.iter().map(|s| &s.module).collect();
    let order = module_order(&modules);
    let cyclic = order.iter().any(|scc| scc.len() > 1);
    let max_rounds = if iterate { cfg.max_iterate_rounds.max(1) } else { 1 };

    let mut env = prior.clone();
    for s in sources {
        env.remove(&s.module.name);
    }
    let mut history: Vec<BTreeMap<String, InterfaceFile>> = Vec::new();
    let mut compiled = Vec::new();
    let mut converged = false;
    let mut warnings = Vec::new();
    for round in 1..=max_rounds {
        compiled.clear();
        let mut produced = BTreeMap::new();
        for name in order.iter().flatten() {
            let src = by_name[name.as_str()];
            let mut round_env = env.clone();
            for other in order.iter().flatten() {
                if !round_env.contains_key(other) {
                    let o = by_name[other.as_str()];
                    round_env
                        .insert(other.clone(), InterfaceFile::stub(&o.module, &o.text, &stub_types(&o.module, &env)));
                }
            }
            let cm = compile_module(src, &round_env, cfg)?;
            env.insert(name.clone(), cm.interface.clone());
            produced.insert(name.clone(), cm.interface.clone());
            compiled.push(cm);
        }
        let same = history.last().is_some_and(|prev| {
            prev.len() == produced.len()
                && prev.iter().all(|(k, v)| produced.get(k).is_some_and(|p| p.hash() == v.hash()))
        });
        history.push(produced);
        if !cyclic || same {
            converged = true;
            break;
        }
        log::info!("round {round}: interfaces changed");
    }
    if !converged {
        let w = format!("import cycle not converged after {} round(s); keeping the last results", history.len());
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(Compilation { modules: compiled, rounds: history.len(), converged, warnings, history })
}

/// Own types plus whatever the available interfaces of its imports carry.
fn stub_types(m: &Module, env: &BTreeMap<String, InterfaceFile>) -> Vec<TypeDef> {
    let mut out = m.types.clone();
    for i in &m.imports {
        if let Some(f) = env.get(i) {
            out.extend(f.types.iter().cloned());
        }
    }
    out
}

/// One program out of compiled modules: the union of their types and all
/// procedure versions.
pub fn link(modules: &[CompiledModule]) -> Result<Program, CompileError> {
    let mut table = TypeTable::with_prelude();
    let mut procs: BTreeMap<String, Procedure> = BTreeMap::new();
    for m in modules {
        for def in m.checked.table.defs() {
            table.add(def.clone()).map_err(|source| CompileError::Types { module: m.name().to_string(), source })?;
        }
        for p in &m.procs {
            if procs.insert(p.decl.name.clone(), p.clone()).is_some() {
                return Err(CompileError::Other(format!("procedure `{}` defined in two modules", p.decl.name)));
            }
        }
    }
    Ok(Program::new(table, procs.into_values()))
}

/// A linked program with the configuration it was compiled under.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Archive {
    pub format: u32,
    pub config: CtgcConfig,
    pub program: Program,
}

pub const ARCHIVE_FORMAT: u32 = 1;

impl Archive {
    pub fn new(config: CtgcConfig, program: Program) -> Self {
        Archive { format: ARCHIVE_FORMAT, config, program }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archives serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let mut a: Archive = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if a.format != ARCHIVE_FORMAT {
            return Err(format!("unsupported archive format {}", a.format));
        }
        a.program.table.reindex();
        Ok(a)
    }
}

/// Runs `entry`: its reuse version when CTGC is on and one exists, the
/// plain program otherwise. Without CTGC the cache stays off as well.
pub fn run_entry(
    prog: &Program,
    entry: &str,
    args: &[String],
    cfg: &CtgcConfig,
    track: bool,
) -> Result<RunResult, RuntimeError> {
    if !prog.procs.contains_key(entry) {
        return Err(RuntimeError::UnknownProc(entry.to_string()));
    }
    if cfg.ctgc_enabled {
        run(prog, &prog.entry_version(entry), args, RunConfig { cache: cfg.cache, track })
    } else {
        run(&prog.without_reuse(), entry, args, RunConfig { cache: false, track })
    }
}

/// Parses and compiles a set of sources in one go (no prior interfaces).
pub fn build(
    sources: &[(&str, &str)],
    cfg: &CtgcConfig,
    iterate: bool,
) -> Result<(Compilation, Program), CompileError> {
    let parsed = sources.iter().map(|(f, t)| SourceModule::parse(f, t)).collect::<Result<Vec<_>, _>>()?;
    let c = compile_all(&parsed, &BTreeMap::new(), cfg, iterate)?;
    let p = link(&c.modules)?;
    Ok((c, p))
}
