//! C interface to the ctgc toolchain: compile modules, inspect the
//! analysis dumps, run entry points and read back heap statistics.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`CtgcStatus`];
//! on failure [`ctgc_last_error_message`] describes what went wrong.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctgc::driver::{build, run_entry, Compilation, CtgcConfig, DUMP_KINDS};
use ctgc::runtime::{HeapStats, Program};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtgcStatus {
    Ok = 0,
    /// A null pointer, invalid UTF-8 or an unknown option.
    InvalidArgument = 1,
    /// Parsing, checking or analysis failed.
    CompileError = 2,
    /// The interpreter stopped with an error.
    RuntimeError = 3,
    /// A bug inside the library; the handle involved should be dropped.
    Internal = 4,
}

/// A compiled set of modules together with the configuration it was
/// compiled under.
pub struct CtgcProgram {
    compilation: Compilation,
    program: Program,
    config: CtgcConfig,
}

/// Outputs and statistics of one run.
pub struct CtgcRun {
    outputs: Option<Vec<CString>>,
    stats: HeapStats,
}

/// Heap statistics of a run, in words and cell counts.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CtgcHeapStats {
    pub words_allocated: u64,
    pub cells_reused_inplace: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub within_k_leaked_words: u64,
    pub reused_words: u64,
    pub cache_hit_words: u64,
}

impl From<HeapStats> for CtgcHeapStats {
    fn from(s: HeapStats) -> Self {
        CtgcHeapStats {
            words_allocated: s.words_allocated,
            cells_reused_inplace: s.cells_reused_inplace,
            cache_hits: s.cache_hits,
            cache_misses: s.cache_misses,
            within_k_leaked_words: s.within_k_leaked_words,
            reused_words: s.reused_words,
            cache_hit_words: s.cache_hit_words,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Failure = (CtgcStatus, String);

fn invalid(msg: impl Into<String>) -> Failure {
    (CtgcStatus::InvalidArgument, msg.into())
}

/// Runs `f`, turning errors and panics into a status plus the thread's
/// last error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtgcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CtgcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal error: {msg}"));
            CtgcStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn str_array<'a>(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<&'a str>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    std::slice::from_raw_parts(p, n).iter().enumerate().map(|(i, s)| str_arg(*s, &format!("{what}[{i}]"))).collect()
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Compiles `count` modules. `names[i]` labels `sources[i]` in messages.
/// `config` is a configuration label such as `match+lifo` or
/// `within:1+lifo+cache`; null means the defaults. Import cycles are
/// iterated until the interfaces are stable.
///
/// # Safety
/// `names` and `sources` must point to `count` valid C strings each, and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ctgc_compile(
    names: *const *const c_char,
    sources: *const *const c_char,
    count: usize,
    config: *const c_char,
    out: *mut *mut CtgcProgram,
) -> CtgcStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let names = str_array(names, count, "names")?;
        let sources = str_array(sources, count, "sources")?;
        let config = if config.is_null() {
            CtgcConfig::default()
        } else {
            CtgcConfig::from_label(str_arg(config, "config")?).map_err(invalid)?
        };
        let pairs: Vec<(&str, &str)> = names.into_iter().zip(sources).collect();
        let (compilation, program) =
            build(&pairs, &config, true).map_err(|e| (CtgcStatus::CompileError, e.to_string()))?;
        *out = Box::into_raw(Box::new(CtgcProgram { compilation, program, config }));
        Ok(())
    })
}

/// Releases a program. Null is ignored.
///
/// # Safety
/// `program` must come from [`ctgc_compile`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctgc_program_free(program: *mut CtgcProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Writes a textual dump (`alias`, `dead` or `reuse`) of every compiled
/// module to `*out`. Release it with [`ctgc_string_free`].
///
/// # Safety
/// `program` must be a live handle, `kind` a C string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ctgc_program_dump(
    program: *const CtgcProgram,
    kind: *const c_char,
    out: *mut *mut c_char,
) -> CtgcStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let p = program.as_ref().ok_or_else(|| invalid("program is null"))?;
        let kind = str_arg(kind, "kind")?;
        if !DUMP_KINDS.contains(&kind) {
            return Err(invalid(format!("unknown dump `{kind}`")));
        }
        let mut text = String::new();
        for m in &p.compilation.modules {
            if p.compilation.modules.len() > 1 {
                text += &format!("module {}\n", m.name());
            }
            text += &m.dump(kind).unwrap_or_default();
        }
        *out = owned_string(text);
        Ok(())
    })
}

/// Number of compilation rounds the program took.
///
/// # Safety
/// `program` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ctgc_program_rounds(program: *const CtgcProgram) -> usize {
    program.as_ref().map_or(0, |p| p.compilation.rounds)
}

/// Runs `entry` on `nargs` term literals under the program's
/// configuration; `plain` forces the version without reuse.
///
/// # Safety
/// `program` must be a live handle, `entry` a C string, `args` point to
/// `nargs` C strings and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn ctgc_run(
    program: *const CtgcProgram,
    entry: *const c_char,
    args: *const *const c_char,
    nargs: usize,
    plain: bool,
    out: *mut *mut CtgcRun,
) -> CtgcStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = ptr::null_mut();
        let p = program.as_ref().ok_or_else(|| invalid("program is null"))?;
        let entry = str_arg(entry, "entry")?;
        let args: Vec<String> = str_array(args, nargs, "args")?.into_iter().map(str::to_string).collect();
        let cfg = if plain { CtgcConfig { ctgc_enabled: false, ..p.config } } else { p.config };
        let r =
            run_entry(&p.program, entry, &args, &cfg, false).map_err(|e| (CtgcStatus::RuntimeError, e.to_string()))?;
        let outputs = r
            .outputs
            .map(|o| o.into_iter().map(|s| CString::new(s.replace('\0', " ")).expect("nul bytes replaced")).collect());
        *out = Box::into_raw(Box::new(CtgcRun { outputs, stats: r.stats }));
        Ok(())
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must come from [`ctgc_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctgc_run_free(run: *mut CtgcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// True when a semidet entry failed, so there are no outputs.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctgc_run_failed(run: *const CtgcRun) -> bool {
    run.as_ref().is_some_and(|r| r.outputs.is_none())
}

/// Number of printed outputs.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctgc_run_output_count(run: *const CtgcRun) -> usize {
    run.as_ref().and_then(|r| r.outputs.as_ref()).map_or(0, Vec::len)
}

/// The `index`-th output, owned by the run; null when out of range.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctgc_run_output(run: *const CtgcRun, index: usize) -> *const c_char {
    run.as_ref().and_then(|r| r.outputs.as_ref()).and_then(|o| o.get(index)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Copies the run's heap statistics to `*out`.
///
/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ctgc_run_stats(run: *const CtgcRun, out: *mut CtgcHeapStats) -> CtgcStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| invalid("run is null"))?;
        let out = out.as_mut().ok_or_else(|| invalid("out is null"))?;
        *out = r.stats.into();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctgc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ctgc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn ctgc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
