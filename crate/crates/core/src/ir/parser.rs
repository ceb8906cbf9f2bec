use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use super::lexer::{tokenize, Tok, Token};
use super::types::TypeTable;
use super::{
    Alternative, Arg, ConsId, ConstructAnn, DeconstructAnn, Determinism, ForeignAlias, Functor, Goal, GoalKind, Mode,
    Module, ProcDecl, Procedure, Type, TypeDef, Var,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Duplicate,
    UnknownType,
    NotNormalized,
    Unsupported,
    Undeclared,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { kind: ParseErrorKind::Syntax, line, col, message: message.into() }
    }

    fn with_kind(mut self, kind: ParseErrorKind) -> Self {
        self.kind = kind;
        self
    }
}

struct PredInfo {
    types: Vec<Type>,
    foreign: bool,
    at: (usize, usize),
}

/// Source position, line and column.
type At = (usize, usize);

struct Clause {
    heads: Vec<Var>,
    body: Goal,
    at: (usize, usize),
}

struct Parser<'s> {
    src: &'s str,
    toks: Vec<Token>,
    pos: usize,
    fresh: usize,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a core-language module. Program points are assigned and
/// annotations are empty; type inference and mode checking are separate
/// passes.
pub fn parse_module(src: &str) -> Result<Module, ParseError> {
    let mut p = Parser { src, toks: tokenize(src)?, pos: 0, fresh: 0 };
    p.module()
}

/// Parses a type term such as `list(int)` or `T`.
pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut p = Parser { src, toks: tokenize(src)?, pos: 0, fresh: 0 };
    let t = p.type_expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err("trailing text after type"));
    }
    Ok(t)
}

impl<'s> Parser<'s> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        ParseError::at(l, c, msg)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    fn atom(&mut self) -> PResult<String> {
        match self.bump() {
            Tok::Atom(a) => Ok(a),
            other => {
                self.pos -= 1;
                Err(self.err(format!("expected a name, found {}", describe(&other))))
            }
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Atom(a) if a == kw => {
                self.bump();
                Ok(())
            }
            other => Err(self.err(format!("expected `{kw}`, found {}", describe(other)))),
        }
    }

    fn module(&mut self) -> PResult<Module> {
        let mut name: Option<String> = None;
        let mut imports = Vec::new();
        let mut types: Vec<(TypeDef, (usize, usize))> = Vec::new();
        let mut preds: BTreeMap<String, PredInfo> = BTreeMap::new();
        let mut pred_order: Vec<String> = Vec::new();
        let mut modes: BTreeMap<String, (Vec<Mode>, Determinism, At)> = BTreeMap::new();
        let mut foreign_alias: BTreeMap<String, (ForeignAlias, (usize, usize))> = BTreeMap::new();
        let mut clauses: BTreeMap<String, Clause> = BTreeMap::new();

        while *self.peek() != Tok::Eof {
            let at = self.here();
            if self.eat(":-") {
                let kw = self.atom()?;
                match kw.as_str() {
                    "module" => {
                        if name.is_some() {
                            return Err(
                                ParseError::at(at.0, at.1, "second module header").with_kind(ParseErrorKind::Duplicate)
                            );
                        }
                        name = Some(self.atom()?);
                    }
                    "end_module" => {
                        self.atom()?;
                    }
                    "import_module" | "use_module" => loop {
                        imports.push(self.atom()?);
                        if !self.eat(",") {
                            break;
                        }
                    },
                    "type" => types.push((self.type_def()?, at)),
                    "pred" | "foreign_pred" => {
                        let pname = self.atom()?;
                        let tys = if self.eat("(") { self.type_list()? } else { Vec::new() };
                        if preds.contains_key(&pname) {
                            return Err(ParseError::at(at.0, at.1, format!("predicate `{pname}` declared twice"))
                                .with_kind(ParseErrorKind::Duplicate));
                        }
                        pred_order.push(pname.clone());
                        preds.insert(pname, PredInfo { types: tys, foreign: kw == "foreign_pred", at });
                    }
                    "mode" => {
                        let pname = self.atom()?;
                        let mut ms = Vec::new();
                        if self.eat("(") {
                            loop {
                                let m = self.atom()?;
                                ms.push(match m.as_str() {
                                    "in" | "di" => Mode::In,
                                    "out" | "uo" => Mode::Out,
                                    other => return Err(self.err(format!("unknown mode `{other}`"))),
                                });
                                if !self.eat(",") {
                                    break;
                                }
                            }
                            self.expect(")")?;
                        }
                        self.keyword("is")?;
                        let det = match self.atom()?.as_str() {
                            "det" => Determinism::Det,
                            "semidet" => Determinism::Semidet,
                            other => {
                                return Err(self
                                    .err(format!("determinism `{other}` is not supported (only det and semidet)"))
                                    .with_kind(ParseErrorKind::Unsupported))
                            }
                        };
                        if modes.contains_key(&pname) {
                            return Err(ParseError::at(
                                at.0,
                                at.1,
                                format!("predicate `{pname}` has more than one mode; declare one predicate per mode"),
                            )
                            .with_kind(ParseErrorKind::Duplicate));
                        }
                        modes.insert(pname, (ms, det, at));
                    }
                    "foreign_alias" => {
                        let pname = self.atom()?;
                        let heads = if self.eat("(") { self.head_vars()? } else { Vec::new() };
                        self.expect("=")?;
                        let text = if self.is_punct("{") {
                            let start = self.toks[self.pos].offset;
                            let mut depth = 0usize;
                            loop {
                                match self.bump() {
                                    Tok::Punct("{") => depth += 1,
                                    Tok::Punct("}") => {
                                        depth -= 1;
                                        if depth == 0 {
                                            break;
                                        }
                                    }
                                    Tok::Eof => return Err(self.err("unterminated alias block")),
                                    _ => {}
                                }
                            }
                            let end = self.toks[self.pos - 1].offset + 1;
                            self.src[start..end].to_string()
                        } else {
                            self.keyword("top")?;
                            "top".to_string()
                        };
                        foreign_alias.insert(pname, (ForeignAlias { heads, text }, at));
                    }
                    other => return Err(ParseError::at(at.0, at.1, format!("unknown declaration `:- {other}`"))),
                }
                self.expect(".")?;
            } else {
                let (pname, clause) = self.clause()?;
                if clauses.contains_key(&pname) {
                    return Err(ParseError::at(
                        at.0,
                        at.1,
                        format!("second clause for `{pname}`; write a single clause with an explicit disjunction"),
                    )
                    .with_kind(ParseErrorKind::Duplicate));
                }
                clauses.insert(pname, clause);
            }
        }

        let mut table = TypeTable::with_prelude();
        for (def, at) in &types {
            table
                .add(def.clone())
                .map_err(|e| ParseError::at(at.0, at.1, e.to_string()).with_kind(ParseErrorKind::Duplicate))?;
        }
        // Types from imported modules are only known at link time.
        let check_types = imports.is_empty();
        let unknown = |ty: &Type, params: &[Arc<str>], at: (usize, usize)| -> PResult<()> {
            match table.check_type(ty, params) {
                Err(e) if check_types || matches!(ty, Type::Param(_)) => {
                    Err(ParseError::at(at.0, at.1, e.to_string()).with_kind(ParseErrorKind::UnknownType))
                }
                _ => Ok(()),
            }
        };
        for (def, at) in &types {
            for alt in &def.alternatives {
                for a in &alt.args {
                    unknown(a, &def.params, *at)?;
                }
            }
        }

        let mut decls = Vec::new();
        let mut procs = Vec::new();
        for pname in &pred_order {
            let info = &preds[pname];
            let params = {
                let d = ProcDecl {
                    name: pname.clone(),
                    arg_types: info.types.clone(),
                    arg_modes: vec![],
                    determinism: Determinism::Det,
                    foreign: false,
                    foreign_alias: None,
                };
                d.type_params()
            };
            for t in &info.types {
                unknown(t, &params, info.at)?;
            }
            let (ms, det, mat) = modes.remove(pname).ok_or_else(|| {
                ParseError::at(info.at.0, info.at.1, format!("predicate `{pname}` has no mode declaration"))
                    .with_kind(ParseErrorKind::Undeclared)
            })?;
            if ms.len() != info.types.len() {
                return Err(ParseError::at(
                    mat.0,
                    mat.1,
                    format!("mode of `{pname}` has {} argument(s), predicate has {}", ms.len(), info.types.len()),
                ));
            }
            let fa = foreign_alias.remove(pname);
            if let Some((fa, at)) = &fa {
                if !info.foreign {
                    return Err(ParseError::at(
                        at.0,
                        at.1,
                        format!("alias annotation on `{pname}`, which is not a foreign predicate"),
                    ));
                }
                if fa.heads.len() != info.types.len() {
                    return Err(ParseError::at(at.0, at.1, format!("alias annotation of `{pname}` has wrong arity")));
                }
            }
            let decl = ProcDecl {
                name: pname.clone(),
                arg_types: info.types.clone(),
                arg_modes: ms,
                determinism: det,
                foreign: info.foreign,
                foreign_alias: fa.map(|(f, _)| f),
            };
            match clauses.remove(pname) {
                Some(c) if decl.foreign => {
                    return Err(ParseError::at(c.at.0, c.at.1, format!("foreign predicate `{pname}` has a clause"))
                        .with_kind(ParseErrorKind::Duplicate))
                }
                Some(mut c) => {
                    if c.heads.len() != decl.arity() {
                        return Err(ParseError::at(
                            c.at.0,
                            c.at.1,
                            format!(
                                "clause head of `{pname}` has {} argument(s), expected {}",
                                c.heads.len(),
                                decl.arity()
                            ),
                        ));
                    }
                    c.body.renumber(0);
                    procs.push(Procedure {
                        decl: decl.clone(),
                        head_vars: c.heads,
                        body: c.body,
                        var_types: BTreeMap::new(),
                    });
                }
                None if !decl.foreign => {
                    return Err(ParseError::at(info.at.0, info.at.1, format!("predicate `{pname}` has no clause"))
                        .with_kind(ParseErrorKind::Undeclared))
                }
                None => {}
            }
            decls.push(decl);
        }
        if let Some((pname, (_, _, at))) = modes.into_iter().next() {
            return Err(ParseError::at(at.0, at.1, format!("mode declaration for undeclared predicate `{pname}`"))
                .with_kind(ParseErrorKind::Undeclared));
        }
        if let Some((pname, (_, at))) = foreign_alias.into_iter().next() {
            return Err(ParseError::at(at.0, at.1, format!("alias annotation for undeclared predicate `{pname}`"))
                .with_kind(ParseErrorKind::Undeclared));
        }
        if let Some((pname, c)) = clauses.into_iter().next() {
            return Err(ParseError::at(c.at.0, c.at.1, format!("clause for undeclared predicate `{pname}`"))
                .with_kind(ParseErrorKind::Undeclared));
        }

        Ok(Module {
            name: name.unwrap_or_else(|| "main".to_string()),
            imports,
            types: types.into_iter().map(|(d, _)| d).filter(|d| !TypeTable::is_prelude(d)).collect(),
            decls,
            procs,
        })
    }

    fn type_def(&mut self) -> PResult<TypeDef> {
        let name = self.atom()?;
        let mut params = Vec::new();
        if self.eat("(") {
            loop {
                match self.bump() {
                    Tok::Var(v) => params.push(Arc::from(v.as_str())),
                    other => {
                        self.pos -= 1;
                        return Err(self.err(format!("expected a type parameter, found {}", describe(&other))));
                    }
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
        }
        self.expect("--->")?;
        let mut alternatives = Vec::new();
        loop {
            if self.eat("[") {
                if self.eat("]") {
                    alternatives.push(Alternative { name: Arc::from("[]"), args: vec![] });
                } else {
                    let head = self.type_expr()?;
                    self.expect("|")?;
                    let tail = self.type_expr()?;
                    self.expect("]")?;
                    alternatives.push(Alternative { name: Arc::from("[|]"), args: vec![head, tail] });
                }
            } else {
                let fname = self.atom()?;
                let args = if self.eat("(") { self.type_list()? } else { Vec::new() };
                alternatives.push(Alternative { name: Arc::from(fname.as_str()), args });
            }
            if !self.eat(";") {
                break;
            }
        }
        Ok(TypeDef { name: Arc::from(name.as_str()), params, alternatives })
    }

    /// Types separated by commas, after an opening paren; consumes `)`.
    fn type_list(&mut self) -> PResult<Vec<Type>> {
        let mut out = Vec::new();
        loop {
            out.push(self.type_expr()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(out)
    }

    fn type_expr(&mut self) -> PResult<Type> {
        match self.bump() {
            Tok::Var(v) => Ok(Type::param(&v)),
            Tok::Atom(a) => {
                let args = if self.eat("(") { self.type_list()? } else { Vec::new() };
                Ok(match (a.as_str(), args.is_empty()) {
                    ("int", true) => Type::Int,
                    ("char", true) => Type::Char,
                    ("string", true) => Type::Str,
                    ("float", true) => Type::Float,
                    _ => Type::named(&a, args),
                })
            }
            other => {
                self.pos -= 1;
                Err(self.err(format!("expected a type, found {}", describe(&other))))
            }
        }
    }

    fn head_vars(&mut self) -> PResult<Vec<Var>> {
        let mut out: Vec<Var> = Vec::new();
        loop {
            let at = self.here();
            match self.bump() {
                Tok::Var(v) if v != "_" => {
                    let v = Var::new(&v);
                    if out.contains(&v) {
                        return Err(ParseError::at(at.0, at.1, format!("head variable `{v}` repeated"))
                            .with_kind(ParseErrorKind::NotNormalized));
                    }
                    out.push(v);
                }
                other => {
                    self.pos -= 1;
                    return Err(self
                        .err(format!("clause heads must be distinct named variables, found {}", describe(&other)))
                        .with_kind(ParseErrorKind::NotNormalized));
                }
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(out)
    }

    fn clause(&mut self) -> PResult<(String, Clause)> {
        let at = self.here();
        let name = self.atom()?;
        let heads = if self.eat("(") { self.head_vars()? } else { Vec::new() };
        self.fresh = 0;
        let body = if self.eat(":-") { self.conj()? } else { Goal::new(GoalKind::Conj(vec![])) };
        self.expect(".")?;
        Ok((name, Clause { heads, body, at }))
    }

    fn conj(&mut self) -> PResult<Goal> {
        let mut goals = Vec::new();
        loop {
            let g = self.goal()?;
            match g.kind {
                GoalKind::Conj(inner) => goals.extend(inner),
                _ => goals.push(g),
            }
            if !self.eat(",") {
                break;
            }
        }
        Ok(if goals.len() == 1 { goals.pop().unwrap() } else { Goal::new(GoalKind::Conj(goals)) })
    }

    fn unsupported(&self, what: &str) -> ParseError {
        self.err(format!("{what} is not supported by the core language")).with_kind(ParseErrorKind::Unsupported)
    }

    fn goal(&mut self) -> PResult<Goal> {
        if self.eat("(") {
            let mut branches = vec![self.conj()?];
            if self.is_punct("->") {
                return Err(self.unsupported("if-then-else"));
            }
            while self.eat(";") {
                branches.push(self.conj()?);
                if self.is_punct("->") {
                    return Err(self.unsupported("if-then-else"));
                }
            }
            self.expect(")")?;
            return Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Goal::new(GoalKind::Disj(branches)) });
        }
        if self.is_punct("\\+") {
            return Err(self.unsupported("negation"));
        }
        match self.peek().clone() {
            Tok::Var(x) => {
                if matches!(self.peek_at(1), Tok::Punct("(")) {
                    return Err(self.unsupported("a higher-order call"));
                }
                self.bump();
                let x = Var::new(&x);
                let op_at = self.here();
                match self.bump() {
                    Tok::Punct("==") => Ok(Goal::new(GoalKind::Test(x, self.plain_var()?))),
                    Tok::Punct(":=") => Ok(Goal::new(GoalKind::Assign(x, self.plain_var()?))),
                    Tok::Punct("<=") => {
                        let (cons, args) = self.term(true)?;
                        Ok(Goal::new(GoalKind::Construct { var: x, cons, args, ann: ConstructAnn::None }))
                    }
                    Tok::Punct("=>") => {
                        let (cons, args) = self.term(false)?;
                        let args = args
                            .into_iter()
                            .map(|a| match a {
                                Arg::Var(v) => v,
                                _ => unreachable!("deconstruction arguments are variables"),
                            })
                            .collect();
                        Ok(Goal::new(GoalKind::Deconstruct { var: x, cons, args, ann: DeconstructAnn::None }))
                    }
                    Tok::Punct("=") => {
                        Err(ParseError::at(op_at.0, op_at.1, "general unification `=`; use `==`, `:=`, `<=` or `=>`")
                            .with_kind(ParseErrorKind::NotNormalized))
                    }
                    other => {
                        self.pos -= 1;
                        Err(self.err(format!("expected a unification operator, found {}", describe(&other))))
                    }
                }
            }
            Tok::Atom(a) => {
                match a.as_str() {
                    "if" | "then" | "else" => return Err(self.unsupported("if-then-else")),
                    "not" => return Err(self.unsupported("negation")),
                    "call" if matches!(self.peek_at(1), Tok::Punct("(")) => {
                        return Err(self.unsupported("a higher-order call"))
                    }
                    "true" => {
                        self.bump();
                        return Ok(Goal::new(GoalKind::Conj(vec![])));
                    }
                    _ => {}
                }
                self.bump();
                let mut args: Vec<Var> = Vec::new();
                if self.eat("(") {
                    loop {
                        let at = self.here();
                        match self.bump() {
                            Tok::Var(v) => {
                                let v = self.var_or_fresh(&v);
                                if args.contains(&v) {
                                    return Err(ParseError::at(at.0, at.1, format!("variable `{v}` repeated in call"))
                                        .with_kind(ParseErrorKind::NotNormalized));
                                }
                                args.push(v);
                            }
                            other => {
                                self.pos -= 1;
                                return Err(self
                                    .err(format!("call arguments must be variables, found {}", describe(&other)))
                                    .with_kind(ParseErrorKind::NotNormalized));
                            }
                        }
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect(")")?;
                }
                if self.is_punct("=") {
                    return Err(self
                        .err("general unification `=`; use `==`, `:=`, `<=` or `=>`")
                        .with_kind(ParseErrorKind::NotNormalized));
                }
                Ok(Goal::new(GoalKind::Call { proc: a, args }))
            }
            other => Err(self.err(format!("expected a goal, found {}", describe(&other)))),
        }
    }

    fn var_or_fresh(&mut self, name: &str) -> Var {
        if name == "_" {
            self.fresh += 1;
            Var::new(&format!("__{}", self.fresh))
        } else {
            Var::new(name)
        }
    }

    fn plain_var(&mut self) -> PResult<Var> {
        match self.bump() {
            Tok::Var(v) if v != "_" => Ok(Var::new(&v)),
            other => {
                self.pos -= 1;
                Err(self
                    .err(format!("expected a variable, found {}", describe(&other)))
                    .with_kind(ParseErrorKind::NotNormalized))
            }
        }
    }

    /// The right-hand side of `<=` (`construct = true`) or `=>`.
    fn term(&mut self, construct: bool) -> PResult<(ConsId, Vec<Arg>)> {
        let start = self.here();
        let (cons, args) = match self.bump() {
            Tok::Int(i) => (ConsId::Int(i), Vec::new()),
            Tok::Punct("[") => {
                if self.eat("]") {
                    (ConsId::Functor(Functor::new("[]", 0)), Vec::new())
                } else {
                    let h = self.arg(construct)?;
                    self.expect("|")?;
                    let t = self.arg(construct)?;
                    self.expect("]")?;
                    (ConsId::Functor(Functor::new("[|]", 2)), vec![h, t])
                }
            }
            Tok::Atom(f) => {
                let mut args = Vec::new();
                if self.eat("(") {
                    loop {
                        args.push(self.arg(construct)?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect(")")?;
                }
                (ConsId::Functor(Functor::new(&f, args.len())), args)
            }
            other => {
                self.pos -= 1;
                return Err(self.err(format!("expected a term, found {}", describe(&other))));
            }
        };
        let mut seen = BTreeSet::new();
        for a in &args {
            if let Arg::Var(v) = a {
                if !seen.insert(v.clone()) {
                    return Err(ParseError::at(start.0, start.1, format!("variable `{v}` repeated in arguments"))
                        .with_kind(ParseErrorKind::NotNormalized));
                }
            }
        }
        Ok((cons, args))
    }

    fn arg(&mut self, construct: bool) -> PResult<Arg> {
        let at = self.here();
        let not_normalized = |msg: String| ParseError::at(at.0, at.1, msg).with_kind(ParseErrorKind::NotNormalized);
        match self.bump() {
            Tok::Var(v) if v == "_" && construct => {
                Err(not_normalized("anonymous variable in a construction".to_string()))
            }
            Tok::Var(v) => Ok(Arg::Var(self.var_or_fresh(&v))),
            Tok::Int(i) if construct => Ok(Arg::Int(i)),
            Tok::Atom(a) if construct => {
                if self.is_punct("(") {
                    return Err(not_normalized(format!("nested term `{a}(..)`; introduce a variable")));
                }
                Ok(Arg::Const(Arc::from(a.as_str())))
            }
            Tok::Punct("[") if construct => Err(not_normalized("nested list term; introduce a variable".into())),
            other => {
                Err(not_normalized(format!("deconstruction arguments must be variables, found {}", describe(&other))))
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Atom(a) => format!("`{a}`"),
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}
