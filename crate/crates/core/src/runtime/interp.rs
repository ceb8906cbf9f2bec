use std::collections::HashMap;

use crate::ir::{Arg, ConsId, Functor, Goal, GoalKind, Mode, Point, Procedure, Type, Var};

use super::literal::{parse_term, Term};
use super::{
    CellCache, DeconRecord, HeapCell, HeapStats, OracleReport, Program, RunConfig, RunResult, RuntimeError, Value,
};

/// Interpreter stack; deep recursion over long lists needs room.
const STACK_BYTES: usize = 256 << 20;

struct Frame {
    vars: HashMap<Var, Value>,
    /// Cell released by the deconstruction at each point, if it ran.
    dead: HashMap<Point, usize>,
}

impl Frame {
    fn get(&self, v: &Var, proc: &str, point: Point) -> Result<Value, RuntimeError> {
        self.vars.get(v).cloned().ok_or_else(|| RuntimeError::Type {
            proc: proc.to_string(),
            point,
            message: format!("`{v}` is unbound"),
        })
    }
}

struct Machine<'p> {
    prog: &'p Program,
    cfg: RunConfig,
    heap: Vec<HeapCell>,
    cache: CellCache,
    stats: HeapStats,
    clock: u64,
    last_read: Vec<u64>,
    decon_events: Vec<(&'p str, Point, usize, u64)>,
    constructs: HashMap<(&'p str, Point), u64>,
}

fn type_err(proc: &str, point: Point, message: impl Into<String>) -> RuntimeError {
    RuntimeError::Type { proc: proc.to_string(), point, message: message.into() }
}

impl<'p> Machine<'p> {
    fn fresh(&mut self, fields: Vec<Value>) -> usize {
        self.heap.push(HeapCell { fields, gen: 0, cached: false });
        self.last_read.push(0);
        self.heap.len() - 1
    }

    fn alloc(&mut self, fields: Vec<Value>) -> (usize, u32) {
        let size = fields.len();
        if self.cfg.cache {
            if let Some(addr) = self.cache.pop(size) {
                self.stats.cache_hits += 1;
                self.stats.cache_hit_words += size as u64;
                let cell = &mut self.heap[addr];
                cell.cached = false;
                cell.gen += 1;
                cell.fields = fields;
                return (addr, cell.gen);
            }
            self.stats.cache_misses += 1;
        }
        self.stats.words_allocated += size as u64;
        (self.fresh(fields), 0)
    }

    /// The first `arity` fields of the cell behind a reference, after the
    /// generation and cache checks.
    fn read(
        &mut self,
        addr: usize,
        gen: u32,
        arity: usize,
        proc: &str,
        point: Point,
    ) -> Result<Vec<Value>, RuntimeError> {
        let cell = &self.heap[addr];
        if cell.cached {
            return Err(RuntimeError::CachedCellRead { proc: proc.to_string(), point });
        }
        if cell.gen != gen {
            return Err(RuntimeError::StaleReference { proc: proc.to_string(), point });
        }
        let fields = cell.fields[..arity].to_vec();
        if self.cfg.track {
            self.clock += 1;
            self.last_read[addr] = self.clock;
        }
        Ok(fields)
    }

    fn constant(&self, name: &str, proc: &str, point: Point) -> Result<Value, RuntimeError> {
        let (_, ordinal) =
            self.prog.table.functor(name).ok_or_else(|| type_err(proc, point, format!("unknown constant `{name}`")))?;
        Ok(Value::Enum { ordinal: ordinal as u32, name: name.into() })
    }

    fn is_heap_functor(&self, f: &Functor) -> bool {
        f.arity > 0
    }

    fn equal(&mut self, a: &Value, b: &Value, proc: &str, point: Point) -> Result<bool, RuntimeError> {
        match (a, b) {
            (Value::Ref { functor: fa, addr: xa, gen: ga }, Value::Ref { functor: fb, addr: xb, gen: gb }) => {
                if fa != fb {
                    return Ok(false);
                }
                let xs = self.read(*xa, *ga, fa.arity, proc, point)?;
                let ys = self.read(*xb, *gb, fb.arity, proc, point)?;
                for (x, y) in xs.iter().zip(&ys) {
                    if !self.equal(x, y, proc, point)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            (Value::Enum { ordinal: x, name: nx }, Value::Enum { ordinal: y, name: ny }) => Ok(x == y && nx == ny),
            _ => Ok(a == b),
        }
    }

    fn builtin(&self, name: &str, x: i64, y: i64, proc: &str, point: Point) -> Result<Option<Value>, RuntimeError> {
        let b = |c: bool| Value::Enum { ordinal: c as u32, name: if c { "yes".into() } else { "no".into() } };
        let zero = || RuntimeError::DivisionByZero { proc: proc.to_string(), point };
        Ok(Some(match name {
            "int_add" => Value::Int(x.wrapping_add(y)),
            "int_sub" => Value::Int(x.wrapping_sub(y)),
            "int_mul" => Value::Int(x.wrapping_mul(y)),
            "int_div" => Value::Int(x.checked_div(y).ok_or_else(zero)?),
            "int_mod" => Value::Int(x.checked_rem(y).ok_or_else(zero)?),
            "int_lt" => b(x < y),
            "int_le" => b(x <= y),
            "int_gt" => b(x > y),
            "int_ge" => b(x >= y),
            "int_eq" => b(x == y),
            _ => return Ok(None),
        }))
    }

    fn call(&mut self, p: &'p Procedure, inputs: Vec<Value>) -> Result<Option<Vec<Value>>, RuntimeError> {
        let mut frame = Frame { vars: HashMap::new(), dead: HashMap::new() };
        for (v, val) in p.inputs().zip(inputs) {
            frame.vars.insert(v.clone(), val);
        }
        if !self.exec(p, &p.body, &mut frame)? {
            return Ok(None);
        }
        let mut out = Vec::new();
        for v in p.outputs() {
            out.push(frame.get(v, p.name(), p.body.point)?);
        }
        Ok(Some(out))
    }

    fn exec(&mut self, p: &'p Procedure, g: &'p Goal, f: &mut Frame) -> Result<bool, RuntimeError> {
        let name = p.name();
        match &g.kind {
            GoalKind::Test(x, y) => {
                let (a, b) = (f.get(x, name, g.point)?, f.get(y, name, g.point)?);
                self.equal(&a, &b, name, g.point)
            }
            GoalKind::Assign(x, y) => {
                let v = f.get(y, name, g.point)?;
                f.vars.insert(x.clone(), v);
                Ok(true)
            }
            GoalKind::Construct { var, cons, args, ann } => {
                let value = match cons {
                    ConsId::Int(i) => Value::Int(*i),
                    ConsId::Functor(func) if !self.is_heap_functor(func) => self.constant(&func.name, name, g.point)?,
                    ConsId::Functor(func) => {
                        let mut fields = Vec::with_capacity(args.len());
                        for a in args {
                            fields.push(match a {
                                Arg::Var(v) => f.get(v, name, g.point)?,
                                Arg::Int(i) => Value::Int(*i),
                                Arg::Const(c) => self.constant(c, name, g.point)?,
                            });
                        }
                        if self.cfg.track {
                            *self.constructs.entry((name, g.point)).or_default() += 1;
                        }
                        let (addr, gen) = match ann {
                            crate::ir::ConstructAnn::Reuse(d) => {
                                let addr = *f.dead.get(d).ok_or_else(|| RuntimeError::MissingDeadCell {
                                    proc: name.to_string(),
                                    point: g.point,
                                    decon: *d,
                                })?;
                                let cell = &mut self.heap[addr];
                                if cell.cached || cell.fields.len() < fields.len() {
                                    return Err(type_err(name, g.point, "reused cell is cached or too small"));
                                }
                                let n = fields.len();
                                self.stats.cells_reused_inplace += 1;
                                self.stats.reused_words += n as u64;
                                self.stats.within_k_leaked_words += (cell.fields.len() - n) as u64;
                                cell.gen += 1;
                                cell.fields.splice(..n, fields);
                                (addr, cell.gen)
                            }
                            crate::ir::ConstructAnn::None => self.alloc(fields),
                        };
                        Value::Ref { functor: func.clone(), addr, gen }
                    }
                };
                f.vars.insert(var.clone(), value);
                Ok(true)
            }
            GoalKind::Deconstruct { var, cons, args, ann } => {
                let v = f.get(var, name, g.point)?;
                match (cons, &v) {
                    (ConsId::Int(i), Value::Int(j)) => Ok(i == j),
                    (ConsId::Functor(func), Value::Enum { name: n, .. }) => Ok(func.arity == 0 && *func.name == **n),
                    (ConsId::Functor(func), Value::Ref { functor, addr, gen }) => {
                        if functor != func {
                            return Ok(false);
                        }
                        let fields = self.read(*addr, *gen, func.arity, name, g.point)?;
                        for (a, val) in args.iter().zip(fields) {
                            f.vars.insert(a.clone(), val);
                        }
                        f.dead.insert(g.point, *addr);
                        if self.cfg.track {
                            self.decon_events.push((name, g.point, *addr, self.clock));
                        }
                        if self.cfg.cache && *ann == crate::ir::DeconstructAnn::Cacheable {
                            let cell = &mut self.heap[*addr];
                            cell.cached = true;
                            let size = cell.fields.len();
                            self.cache.push(size, *addr);
                        }
                        Ok(true)
                    }
                    (ConsId::Functor(_), Value::Int(_)) | (ConsId::Int(_), _) => {
                        Err(type_err(name, g.point, format!("`{var}` has the wrong kind of value for `{cons}`")))
                    }
                    _ => Ok(false),
                }
            }
            GoalKind::Call { proc, args } => {
                if let Some(callee) = self.prog.procs.get(proc) {
                    let mut inputs = Vec::new();
                    for (a, m) in args.iter().zip(&callee.decl.arg_modes) {
                        if *m == Mode::In {
                            inputs.push(f.get(a, name, g.point)?);
                        }
                    }
                    let Some(outs) = self.call(callee, inputs)? else { return Ok(false) };
                    let out_vars = args.iter().zip(&callee.decl.arg_modes).filter(|(_, m)| **m == Mode::Out);
                    for ((a, _), v) in out_vars.zip(outs) {
                        f.vars.insert(a.clone(), v);
                    }
                    return Ok(true);
                }
                let [x, y, z] = args.as_slice() else { return Err(RuntimeError::UnknownProc(proc.clone())) };
                let (Value::Int(x), Value::Int(y)) = (f.get(x, name, g.point)?, f.get(y, name, g.point)?) else {
                    return Err(type_err(name, g.point, "arithmetic on a non-integer"));
                };
                let r =
                    self.builtin(proc, x, y, name, g.point)?.ok_or_else(|| RuntimeError::UnknownProc(proc.clone()))?;
                f.vars.insert(z.clone(), r);
                Ok(true)
            }
            GoalKind::Conj(gs) => {
                for s in gs {
                    if !self.exec(p, s, f)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            GoalKind::Disj(branches) => {
                for b in branches {
                    let (guard, rest): (&Goal, &[Goal]) = match &b.kind {
                        GoalKind::Conj(gs)
                            if matches!(
                                gs.first().map(|g| &g.kind),
                                Some(GoalKind::Deconstruct { .. } | GoalKind::Test(..))
                            ) =>
                        {
                            (&gs[0], &gs[1..])
                        }
                        GoalKind::Deconstruct { .. } | GoalKind::Test(..) => (b, &[]),
                        // Without a guard the branch is taken unconditionally.
                        _ => return self.exec(p, b, f),
                    };
                    if !self.exec(p, guard, f)? {
                        continue;
                    }
                    for s in rest {
                        if !self.exec(p, s, f)? {
                            return Ok(false);
                        }
                    }
                    return Ok(true);
                }
                Ok(false)
            }
        }
    }

    fn build(&mut self, t: &Term, ty: Option<&Type>) -> Result<Value, RuntimeError> {
        let expected = ty.filter(|t| !matches!(t, Type::Param(_)));
        match t {
            Term::Int(i) => match expected {
                None | Some(Type::Int) => Ok(Value::Int(*i)),
                Some(other) => Err(RuntimeError::Literal(format!("integer {i} where `{other}` is expected"))),
            },
            Term::App(name, args) => {
                let (def, ordinal) = self
                    .prog
                    .table
                    .functor(name)
                    .ok_or_else(|| RuntimeError::Literal(format!("unknown functor `{name}`")))?;
                let arity = def.alternatives[ordinal].args.len();
                if let Some(Type::Named { name: tn, .. }) = expected {
                    if *tn != def.name {
                        return Err(RuntimeError::Literal(format!("`{name}` does not build a `{tn}`")));
                    }
                }
                if arity != args.len() {
                    return Err(RuntimeError::Literal(format!("`{name}` takes {arity} argument(s)")));
                }
                let functor = Functor::new(name, arity);
                if arity == 0 {
                    return Ok(Value::Enum { ordinal: ordinal as u32, name: name.as_str().into() });
                }
                let mut fields = Vec::new();
                for (i, a) in args.iter().enumerate() {
                    let child = expected.and_then(|t| self.prog.table.field_type(t, &functor, i + 1));
                    fields.push(self.build(a, child.as_ref())?);
                }
                let addr = self.fresh(fields);
                Ok(Value::Ref { functor, addr, gen: 0 })
            }
        }
    }

    fn print(&mut self, v: &Value, out: &mut String) -> Result<(), RuntimeError> {
        let here = ("<output>", Point(0));
        match v {
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Opaque(w) => out.push_str(&format!("<{w}>")),
            Value::Enum { name, .. } => out.push_str(name),
            Value::Ref { functor, addr, gen } if &*functor.name == "[|]" && functor.arity == 2 => {
                out.push('[');
                let mut fields = self.read(*addr, *gen, 2, here.0, here.1)?;
                loop {
                    self.print(&fields[0], out)?;
                    match &fields[1] {
                        Value::Ref { functor, addr, gen } if &*functor.name == "[|]" => {
                            out.push_str(", ");
                            fields = self.read(*addr, *gen, 2, here.0, here.1)?;
                        }
                        Value::Enum { name, .. } if &**name == "[]" => break,
                        tail => {
                            out.push_str(" | ");
                            let tail = tail.clone();
                            self.print(&tail, out)?;
                            break;
                        }
                    }
                }
                out.push(']');
            }
            Value::Ref { functor, addr, gen } => {
                let fields = self.read(*addr, *gen, functor.arity, here.0, here.1)?;
                out.push_str(&functor.name);
                out.push('(');
                for (i, x) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    self.print(x, out)?;
                }
                out.push(')');
            }
        }
        Ok(())
    }
}

fn run_inner(prog: &Program, entry: &str, args: &[String], cfg: RunConfig) -> Result<RunResult, RuntimeError> {
    let p = prog.procs.get(entry).ok_or_else(|| RuntimeError::UnknownProc(entry.to_string()))?;
    let in_types: Vec<&Type> =
        p.decl.arg_types.iter().zip(&p.decl.arg_modes).filter(|(_, m)| **m == Mode::In).map(|(t, _)| t).collect();
    if in_types.len() != args.len() {
        return Err(RuntimeError::Arity { entry: entry.to_string(), expected: in_types.len(), got: args.len() });
    }
    let mut m = Machine {
        prog,
        cfg,
        heap: Vec::new(),
        cache: CellCache::default(),
        stats: HeapStats::default(),
        clock: 0,
        last_read: Vec::new(),
        decon_events: Vec::new(),
        constructs: HashMap::new(),
    };
    let mut inputs = Vec::new();
    for (text, ty) in args.iter().zip(in_types) {
        let t = parse_term(text)?;
        inputs.push(m.build(&t, Some(ty))?);
    }
    let result = m.call(p, inputs)?;
    let stats = m.stats;
    let outputs = match result {
        None => None,
        Some(vals) => {
            let mut texts = Vec::new();
            for v in &vals {
                let mut s = String::new();
                m.print(v, &mut s)?;
                texts.push(s);
            }
            Some(texts)
        }
    };
    let oracle = cfg.track.then(|| {
        let mut report = OracleReport::default();
        for (proc, point, addr, t) in &m.decon_events {
            let r: &mut DeconRecord = report.decons.entry((proc.to_string(), *point)).or_default();
            r.executed += 1;
            if m.last_read[*addr] > *t {
                r.read_after += 1;
            }
        }
        report.constructs = m.constructs.iter().map(|((p, pt), n)| ((p.to_string(), *pt), *n)).collect();
        report
    });
    Ok(RunResult { version: entry.to_string(), outputs, stats, oracle })
}

/// Runs `entry` with the given literal input arguments on a fresh heap.
/// Building the inputs is not counted in the statistics.
pub fn run(prog: &Program, entry: &str, args: &[String], cfg: RunConfig) -> Result<RunResult, RuntimeError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(STACK_BYTES)
            .spawn_scoped(s, || run_inner(prog, entry, args, cfg))
            .map_err(|e| RuntimeError::Thread(e.to_string()))?
            .join()
            .map_err(|_| RuntimeError::Thread("interpreter panicked".into()))?
    })
}
