//! Benchmark harness: every program of a suite under every configuration,
//! compared against the plain (no-CTGC) run.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Deserialize;

use crate::driver::{build, run_entry, CtgcConfig};
use crate::runtime::HeapStats;

pub const CSV_HEADER: &str = "program,config,words,pct_vs_baseline,reused,cache_hits,leaked,seconds";

#[derive(Clone, Debug, Deserialize)]
pub struct BenchProgram {
    pub name: String,
    /// Source files, relative to the suite directory.
    pub sources: Vec<String>,
    pub entry: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct BenchSuite {
    #[serde(default, rename = "program")]
    pub programs: Vec<BenchProgram>,
}

impl BenchSuite {
    /// Reads `bench.toml` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, String> {
        let path = dir.join("bench.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub program: String,
    pub config: String,
    pub outcome: Result<(HeapStats, f64), String>,
    /// Words of the plain run, if it succeeded.
    pub baseline: Option<u64>,
}

impl BenchRow {
    pub fn pct(&self) -> Option<f64> {
        let (stats, _) = self.outcome.as_ref().ok()?;
        let base = self.baseline.filter(|b| *b > 0)?;
        Some((stats.words_allocated as f64 - base as f64) * 100.0 / base as f64)
    }

    fn csv(&self) -> String {
        match &self.outcome {
            Ok((s, secs)) => format!(
                "{},{},{},{},{},{},{},{:.3}",
                self.program,
                self.config,
                s.words_allocated,
                self.pct().map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}")),
                s.cells_reused_inplace,
                s.cache_hits,
                s.within_k_leaked_words,
                secs
            ),
            Err(_) => format!("{},{},error,,,,,", self.program, self.config),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.csv());
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<12} {:<22} {:>12} {:>10} {:>8} {:>10} {:>8} {:>8}\n",
            "program", "config", "words", "pct", "reused", "cache_hits", "leaked", "seconds"
        );
        for r in &self.rows {
            match &r.outcome {
                Ok((st, secs)) => {
                    let pct = r.pct().map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}%"));
                    let _ = writeln!(
                        s,
                        "{:<12} {:<22} {:>12} {:>10} {:>8} {:>10} {:>8} {:>8.3}",
                        r.program,
                        r.config,
                        st.words_allocated,
                        pct,
                        st.cells_reused_inplace,
                        st.cache_hits,
                        st.within_k_leaked_words,
                        secs
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{:<12} {:<22} error: {e}", r.program, r.config);
                }
            }
        }
        s
    }
}

fn run_one(dir: &Path, p: &BenchProgram, cfg: &CtgcConfig) -> Result<(HeapStats, f64), String> {
    let mut texts = Vec::new();
    for f in &p.sources {
        let path = dir.join(f);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        texts.push((path.display().to_string(), text));
    }
    let refs: Vec<(&str, &str)> = texts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let (_, prog) = build(&refs, cfg, true).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = run_entry(&prog, &p.entry, &p.args, cfg, false).map_err(|e| e.to_string())?;
    Ok((r.stats, start.elapsed().as_secs_f64()))
}

/// Runs every program under every config. Failures are recorded per row
/// and the rest of the suite still runs.
pub fn run_bench(dir: &Path, suite: &BenchSuite, configs: &[CtgcConfig]) -> BenchReport {
    let plain = CtgcConfig { ctgc_enabled: false, cache: false, ..CtgcConfig::default() };
    let mut rows = Vec::new();
    for p in &suite.programs {
        let baseline = run_one(dir, p, &plain).ok().map(|(s, _)| s.words_allocated);
        for cfg in configs {
            let outcome = run_one(dir, p, cfg);
            if let Err(e) = &outcome {
                log::warn!("{} under {}: {e}", p.name, cfg.label());
            }
            rows.push(BenchRow { program: p.name.clone(), config: cfg.label(), outcome, baseline });
        }
    }
    BenchReport { rows }
}

pub const DEFAULT_CONFIGS: [&str; 6] =
    ["no-ctgc", "match+lifo", "within:1+lifo", "within:2+lifo", "same-cons+lifo", "match+lifo+cache"];
