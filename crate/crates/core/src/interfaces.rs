//! Per-module interface files (`.ctgc`): exit alias summaries, reuse
//! versions and their conditions, so that modules compile separately.
//!
//! The format is line oriented:
//!
//! ```text
//! ctgc-interface 1
//! module convert
//! source <sha256 of the module source>
//! type <TypeDef as JSON>
//! proc convert1/2 <ProcDecl as JSON>
//!   heads X Y
//!   summary {}
//!   version plain
//!   version reuse
//!   cond X
//!   cond X^b,1
//!   foreign { alias( A , B ) }
//! hash <sha256 of every preceding line except `source`>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alias::{parse_alias_set, parse_datastructure, AliasError, AliasSet};
use crate::dataflow::{heuristic_no_alias, ModuleAnalysis, ProcSummary, ReuseCondition};
use crate::ir::{Module, ProcDecl, TypeDef, TypeTable, Var};
use crate::reuse::{ModuleReuse, VersionInfo};

pub const HEADER: &str = "ctgc-interface 1";
pub const EXTENSION: &str = "ctgc";

#[derive(Debug, Error)]
pub enum InterfaceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceProc {
    pub decl: ProcDecl,
    pub heads: Vec<Var>,
    /// Exit aliasing over `heads`; `None` when not analysed yet.
    pub summary: Option<AliasSet>,
    /// Condition of the reuse version, when there is one.
    pub reuse_condition: Option<ReuseCondition>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceFile {
    pub module: String,
    pub source_hash: String,
    /// Every type visible in the module, so the file reads on its own.
    pub types: Vec<TypeDef>,
    /// Sorted by name.
    pub procs: Vec<InterfaceProc>,
}

pub fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

impl InterfaceFile {
    /// The interface of an analysed module. `visible_types` are all types
    /// the module was checked against, its own included.
    pub fn from_results(
        module: &Module,
        source: &str,
        visible_types: &[TypeDef],
        analysis: &ModuleAnalysis,
        reuse: &ModuleReuse,
    ) -> Self {
        let mut procs = Vec::new();
        for d in &module.decls {
            let (heads, summary) = match (module.proc(&d.name), analysis.summaries.get(&d.name)) {
                (Some(p), s) => (p.head_vars.clone(), s.map(|s| s.exit_aliases.clone())),
                (None, s) => match &d.foreign_alias {
                    Some(fa) => (fa.heads.clone(), s.map(|s| s.exit_aliases.clone())),
                    None => (Vec::new(), None),
                },
            };
            let reuse_condition =
                reuse.procs.get(&d.name).and_then(|r| r.reuse_version()).map(|v| v.conditions.clone());
            procs.push(InterfaceProc { decl: d.clone(), heads, summary, reuse_condition });
        }
        Self::assemble(module, source, visible_types, procs)
    }

    /// Declarations and types only: what callers see of a module that has
    /// not been analysed yet. Its procedures count as top.
    pub fn stub(module: &Module, source: &str, visible_types: &[TypeDef]) -> Self {
        let procs = module
            .decls
            .iter()
            .map(|d| InterfaceProc {
                decl: d.clone(),
                heads: module.proc(&d.name).map(|p| p.head_vars.clone()).unwrap_or_default(),
                summary: None,
                reuse_condition: None,
            })
            .collect();
        Self::assemble(module, source, visible_types, procs)
    }

    fn assemble(module: &Module, source: &str, visible_types: &[TypeDef], mut procs: Vec<InterfaceProc>) -> Self {
        procs.sort_by(|a, b| a.decl.name.cmp(&b.decl.name));
        let mut types: Vec<TypeDef> = visible_types.iter().filter(|t| !TypeTable::is_prelude(t)).cloned().collect();
        types.sort_by(|a, b| a.name.cmp(&b.name));
        types.dedup_by(|a, b| a.name == b.name);
        InterfaceFile { module: module.name.clone(), source_hash: sha256_hex(source), types, procs }
    }

    /// The result lines, everything the hash covers.
    fn body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "module {}", self.module);
        for t in &self.types {
            let _ = writeln!(s, "type {}", serde_json::to_string(t).expect("types serialize"));
        }
        for p in &self.procs {
            let _ = writeln!(s, "proc {} {}", p.decl.id(), serde_json::to_string(&p.decl).expect("decls serialize"));
            let heads: Vec<&str> = p.heads.iter().map(|v| v.name()).collect();
            let _ = writeln!(s, "  heads {}", heads.join(" "));
            if let Some(a) = &p.summary {
                let _ = writeln!(s, "  summary {a}");
            }
            let _ = writeln!(s, "  version plain");
            if let Some(c) = &p.reuse_condition {
                let _ = writeln!(s, "  version reuse");
                for d in c {
                    let _ = writeln!(s, "  cond {d}");
                }
            }
            if let Some(fa) = &p.decl.foreign_alias {
                let _ = writeln!(s, "  foreign {}", fa.text);
            }
        }
        s
    }

    /// Hash over the analysis results; equal across rounds iff nothing
    /// changed.
    pub fn hash(&self) -> String {
        sha256_hex(&self.body())
    }

    pub fn to_text(&self) -> String {
        let body = self.body();
        let hash = sha256_hex(&body);
        let mut parts = body.splitn(3, '\n');
        let (header, module, rest) =
            (parts.next().unwrap_or(""), parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        format!("{header}\n{module}\nsource {}\n{rest}hash {hash}\n", self.source_hash)
    }

    /// Types plus prelude: enough to resolve every summary in the file.
    pub fn table(&self) -> Result<TypeTable, String> {
        let mut t = TypeTable::with_prelude();
        for def in &self.types {
            t.add(def.clone()).map_err(|e| e.to_string())?;
        }
        Ok(t)
    }

    pub fn decls(&self) -> Vec<ProcDecl> {
        self.procs.iter().map(|p| p.decl.clone()).collect()
    }

    /// Summaries usable in place of top for calls into this module.
    pub fn summaries(&self, table: &TypeTable) -> BTreeMap<String, ProcSummary> {
        self.procs
            .iter()
            .filter_map(|p| {
                let s = p.summary.clone()?;
                Some((
                    p.decl.name.clone(),
                    ProcSummary {
                        proc: p.decl.name.clone(),
                        heads: p.heads.clone(),
                        exit_aliases: s,
                        no_alias_by_heuristic: heuristic_no_alias(&p.decl, table),
                    },
                ))
            })
            .collect()
    }

    pub fn versions(&self) -> BTreeMap<String, VersionInfo> {
        self.procs
            .iter()
            .map(|p| {
                (
                    p.decl.name.clone(),
                    VersionInfo { heads: p.heads.clone(), reuse_condition: p.reuse_condition.clone() },
                )
            })
            .collect()
    }

    /// Was the file produced from a source other than `source`?
    pub fn is_stale(&self, source: &str) -> bool {
        self.source_hash != sha256_hex(source)
    }

    pub fn parse(text: &str, path: &Path) -> Result<(InterfaceFile, Vec<String>), InterfaceError> {
        let err = |line: usize, message: String| InterfaceError::Parse { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, h)) if h == HEADER => {}
            Some((_, h)) if h.starts_with("ctgc-interface ") => {
                return Err(err(1, format!("unsupported interface version `{h}`")))
            }
            _ => return Err(err(1, format!("expected `{HEADER}`"))),
        }
        let mut file =
            InterfaceFile { module: String::new(), source_hash: String::new(), types: Vec::new(), procs: Vec::new() };
        let mut recorded_hash = None;
        let mut table: Option<TypeTable> = None;
        let mut conds: BTreeMap<usize, ReuseCondition> = BTreeMap::new();
        for (n, line) in lines {
            if recorded_hash.is_some() {
                return Err(err(n, "content after the hash line".into()));
            }
            let (key, rest) = line.trim_start().split_once(' ').unwrap_or((line.trim(), ""));
            let nested = line.starts_with("  ");
            let current = file.procs.len().checked_sub(1);
            let alias_err = |e: AliasError| err(n, e.to_string());
            match (nested, key) {
                (false, "module") => file.module = rest.to_string(),
                (false, "source") => file.source_hash = rest.to_string(),
                (false, "hash") => recorded_hash = Some(rest.to_string()),
                (false, "type") => {
                    if table.is_some() {
                        return Err(err(n, "type after the first proc".into()));
                    }
                    file.types.push(serde_json::from_str(rest).map_err(|e| err(n, e.to_string()))?);
                }
                (false, "proc") => {
                    if table.is_none() {
                        table = Some(file.table().map_err(|e| err(n, e))?);
                    }
                    let (_, json) = rest.split_once(' ').ok_or_else(|| err(n, "expected `proc name/N {..}`".into()))?;
                    let decl: ProcDecl = serde_json::from_str(json).map_err(|e| err(n, e.to_string()))?;
                    file.procs.push(InterfaceProc { decl, heads: Vec::new(), summary: None, reuse_condition: None });
                }
                (true, _) if current.is_none() => return Err(err(n, "indented line outside a proc".into())),
                (true, "heads") => {
                    file.procs[current.unwrap()].heads = rest.split_whitespace().map(Var::new).collect();
                }
                (true, "summary") => {
                    let t = table.as_ref().expect("set at proc");
                    file.procs[current.unwrap()].summary = Some(parse_alias_set(rest, t).map_err(alias_err)?);
                }
                (true, "version") => match rest {
                    "plain" => {}
                    "reuse" => {
                        conds.entry(current.unwrap()).or_default();
                    }
                    other => return Err(err(n, format!("unknown version kind `{other}`"))),
                },
                (true, "cond") => {
                    let t = table.as_ref().expect("set at proc");
                    let c = conds
                        .get_mut(&current.unwrap())
                        .ok_or_else(|| err(n, "`cond` before `version reuse`".into()))?;
                    c.insert(parse_datastructure(rest, t).map_err(alias_err)?);
                }
                (true, "foreign") => {
                    let p = &file.procs[current.unwrap()];
                    if p.decl.foreign_alias.as_ref().map(|f| f.text.as_str()) != Some(rest) {
                        return Err(err(n, "foreign annotation does not match the declaration".into()));
                    }
                }
                _ => return Err(err(n, format!("unexpected line `{line}`"))),
            }
        }
        for (i, c) in conds {
            file.procs[i].reuse_condition = Some(c);
        }
        if file.module.is_empty() {
            return Err(err(2, "missing `module` line".into()));
        }
        let mut warnings = Vec::new();
        match recorded_hash {
            None => return Err(err(text.lines().count(), "missing `hash` line".into())),
            Some(h) if h != file.hash() => {
                warnings.push(format!("{}: content hash mismatch; the file was edited by hand", path.display()))
            }
            Some(_) => {}
        }
        Ok((file, warnings))
    }
}

/// Writes through a temporary file and a rename, so readers never see a
/// half-written interface.
pub fn write_interface(file: &InterfaceFile, path: &Path) -> Result<(), InterfaceError> {
    let io = |source| InterfaceError::Io { path: path.to_path_buf(), source };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, file.to_text()).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Reads an interface; warnings cover hand-edited files and, when the
/// current `source` is given, files produced from another version of it.
pub fn read_interface(path: &Path, source: Option<&str>) -> Result<(InterfaceFile, Vec<String>), InterfaceError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| InterfaceError::Io { path: path.to_path_buf(), source })?;
    let (file, mut warnings) = InterfaceFile::parse(&text, path)?;
    if source.is_some_and(|s| file.is_stale(s)) {
        warnings.push(format!(
            "{}: stale interface; module `{}` changed since it was written",
            path.display(),
            file.module
        ));
    }
    Ok((file, warnings))
}

pub fn interface_path(dir: &Path, module: &str) -> PathBuf {
    dir.join(format!("{module}.{EXTENSION}"))
}

/// Import graph SCCs in dependency order (imported modules first), names
/// sorted within a component.
pub fn module_order(modules: &[&Module]) -> Vec<Vec<String>> {
    use petgraph::algo::tarjan_scc;
    use petgraph::graph::DiGraph;
    let mut g: DiGraph<String, ()> = DiGraph::new();
    let idx: BTreeMap<&str, _> = modules.iter().map(|m| (m.name.as_str(), g.add_node(m.name.clone()))).collect();
    for m in modules {
        let imports: BTreeSet<&str> = m.imports.iter().map(String::as_str).collect();
        for i in imports {
            if let Some(&to) = idx.get(i) {
                g.add_edge(idx[m.name.as_str()], to, ());
            }
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|scc| {
            let mut names: Vec<String> = scc.into_iter().map(|n| g[n].clone()).collect();
            names.sort();
            names
        })
        .collect()
}
