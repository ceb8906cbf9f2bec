use std::collections::BTreeSet;

use thiserror::Error;

use super::types::builtin_decls;
use super::{Arg, Goal, GoalKind, Mode, Point, ProcDecl, Procedure, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("mode error in `{proc}` at {point}, variable `{var}`: {message}")]
pub struct ModeError {
    pub proc: String,
    pub point: Point,
    pub var: Var,
    pub message: String,
}

struct Checker<'a> {
    proc: &'a Procedure,
    decls: &'a [ProcDecl],
    builtins: Vec<ProcDecl>,
}

type Ground = BTreeSet<Var>;

impl Checker<'_> {
    fn err(&self, g: &Goal, var: &Var, message: &str) -> ModeError {
        ModeError { proc: self.proc.decl.name.clone(), point: g.point, var: var.clone(), message: message.into() }
    }

    fn need(&self, g: &Goal, ground: &Ground, v: &Var) -> Result<(), ModeError> {
        if ground.contains(v) {
            Ok(())
        } else {
            Err(self.err(g, v, "used as input before it is bound"))
        }
    }

    fn bind(&self, g: &Goal, ground: &mut Ground, v: &Var) -> Result<(), ModeError> {
        if ground.insert(v.clone()) {
            Ok(())
        } else {
            Err(self.err(g, v, "bound as output but already bound"))
        }
    }

    /// Variables occurring in the procedure outside the goal at `skip`.
    fn outside(&self, skip: Point) -> BTreeSet<Var> {
        fn collect(g: &Goal, skip: Point, out: &mut BTreeSet<Var>) {
            if g.point == skip {
                return;
            }
            match &g.kind {
                GoalKind::Conj(gs) | GoalKind::Disj(gs) => gs.iter().for_each(|s| collect(s, skip, out)),
                _ => out.extend(g.vars()),
            }
        }
        let mut out: BTreeSet<Var> = self.proc.head_vars.iter().cloned().collect();
        collect(&self.proc.body, skip, &mut out);
        out
    }

    fn goal(&self, g: &Goal, ground: &mut Ground) -> Result<(), ModeError> {
        match &g.kind {
            GoalKind::Test(x, y) => {
                self.need(g, ground, x)?;
                self.need(g, ground, y)
            }
            GoalKind::Assign(x, y) => {
                self.need(g, ground, y)?;
                self.bind(g, ground, x)
            }
            GoalKind::Construct { var, args, .. } => {
                for a in args {
                    if let Arg::Var(v) = a {
                        self.need(g, ground, v)?;
                    }
                }
                self.bind(g, ground, var)
            }
            GoalKind::Deconstruct { var, args, .. } => {
                self.need(g, ground, var)?;
                args.iter().try_for_each(|a| self.bind(g, ground, a))
            }
            GoalKind::Call { proc, args } => {
                let decl = self
                    .decls
                    .iter()
                    .chain(&self.builtins)
                    .find(|d| &d.name == proc)
                    .ok_or_else(|| self.err(g, args.first().unwrap_or(&Var::new("_")), "unknown predicate"))?;
                for (v, m) in args.iter().zip(&decl.arg_modes) {
                    if *m == Mode::In {
                        self.need(g, ground, v)?;
                    }
                }
                for (v, m) in args.iter().zip(&decl.arg_modes) {
                    if *m == Mode::Out {
                        self.bind(g, ground, v)?;
                    }
                }
                Ok(())
            }
            GoalKind::Conj(gs) => gs.iter().try_for_each(|s| self.goal(s, ground)),
            GoalKind::Disj(gs) => {
                let nonlocal = self.outside(g.point);
                let mut common: Option<(Ground, &Goal)> = None;
                for branch in gs {
                    let mut b = ground.clone();
                    self.goal(branch, &mut b)?;
                    let bound: Ground = b.difference(ground).filter(|v| nonlocal.contains(*v)).cloned().collect();
                    match &common {
                        None => common = Some((bound, branch)),
                        Some((first, _)) if *first != bound => {
                            let v = first.symmetric_difference(&bound).next().unwrap();
                            return Err(self.err(branch, v, "disjunction branches bind different variables"));
                        }
                        _ => {}
                    }
                }
                if let Some((bound, _)) = common {
                    ground.extend(bound);
                }
                Ok(())
            }
        }
    }
}

/// Checks that `p` is well moded under left-to-right execution. `decls`
/// holds every callable declaration except the builtins.
pub fn check_well_modedness(p: &Procedure, decls: &[ProcDecl]) -> Result<(), ModeError> {
    let c = Checker { proc: p, decls, builtins: builtin_decls() };
    let mut ground: Ground = p.inputs().cloned().collect();
    c.goal(&p.body, &mut ground)?;
    for out in p.outputs() {
        if !ground.contains(out) {
            return Err(c.err(&p.body, out, "output is never bound"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    const TYPES: &str = ":- type dir ---> north ; south.\n:- type ex ---> a(int, dir) ; b(ex).\n";

    fn check(body: &str) -> Result<(), ModeError> {
        let m = parse_module(&format!("{TYPES}:- pred p(int, ex).\n:- mode p(in, out) is det.\n{body}\n")).unwrap();
        check_well_modedness(&m.procs[0], &m.decls)
    }

    #[test]
    fn construct_before_its_argument_is_bound() {
        let err = check("p(A, Y) :- Y <= b(Y1), Y1 <= a(A, north).").unwrap_err();
        assert_eq!(err.point, Point(1));
        assert_eq!(err.var, Var::new("Y1"));
        assert!(check("p(A, Y) :- Y1 <= a(A, north), Y <= b(Y1).").is_ok());
    }

    #[test]
    fn branches_must_bind_the_same_outputs() {
        let err = check("p(A, Y) :- ( A => 0, Y <= a(A, north) ; A => 1, Z <= a(A, south) ).").unwrap_err();
        assert_eq!(err.var, Var::new("Y"));
        assert!(check("p(A, Y) :- ( A => 0, Y <= a(A, north) ; A => 1, Y <= a(A, south) ).").is_ok());
    }

    #[test]
    fn unbound_output_and_double_binding() {
        assert_eq!(check("p(A, Y) :- B := A.").unwrap_err().var, Var::new("Y"));
        assert_eq!(check("p(A, Y) :- A := A, Y <= a(A, north).").unwrap_err().var, Var::new("A"));
    }
}
