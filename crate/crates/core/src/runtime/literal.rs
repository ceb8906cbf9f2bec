//! Term literals for entry arguments: integers, atoms, `f(a, b)`, lists
//! `[1, 2 | T]` and ranges `[1..5]`.

use super::RuntimeError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Int(i64),
    App(String, Vec<Term>),
}

impl Term {
    fn cons(h: Term, t: Term) -> Term {
        Term::App("[|]".into(), vec![h, t])
    }

    fn nil() -> Term {
        Term::App("[]".into(), vec![])
    }
}

struct P<'a> {
    s: &'a [u8],
    i: usize,
}

impl P<'_> {
    fn err<T>(&self, msg: &str) -> Result<T, RuntimeError> {
        Err(RuntimeError::Literal(format!("{msg} at offset {}", self.i)))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.i) == Some(&c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, t: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(t.as_bytes()) {
            self.i += t.len();
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Option<i64> {
        self.ws();
        let start = self.i;
        if self.s.get(self.i) == Some(&b'-') {
            self.i += 1;
        }
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.i]).ok()?;
        match text.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.i = start;
                None
            }
        }
    }

    fn term(&mut self) -> Result<Term, RuntimeError> {
        self.ws();
        if let Some(v) = self.int() {
            return Ok(Term::Int(v));
        }
        if self.eat(b'[') {
            return self.list();
        }
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        if start == self.i || !self.s[start].is_ascii_lowercase() {
            return self.err("expected a term");
        }
        let name = String::from_utf8_lossy(&self.s[start..self.i]).into_owned();
        let mut args = Vec::new();
        if self.s.get(self.i) == Some(&b'(') {
            self.i += 1;
            loop {
                args.push(self.term()?);
                if self.eat(b')') {
                    break;
                }
                if !self.eat(b',') {
                    return self.err("expected `,` or `)`");
                }
            }
        }
        Ok(Term::App(name, args))
    }

    fn list(&mut self) -> Result<Term, RuntimeError> {
        if self.eat(b']') {
            return Ok(Term::nil());
        }
        let first = self.term()?;
        if self.eat_str("..") {
            let (Term::Int(lo), Some(hi)) = (&first, self.int()) else { return self.err("bad range") };
            if !self.eat(b']') {
                return self.err("expected `]`");
            }
            return Ok((*lo..=hi).rev().fold(Term::nil(), |t, v| Term::cons(Term::Int(v), t)));
        }
        let mut items = vec![first];
        let mut tail = Term::nil();
        loop {
            if self.eat(b']') {
                break;
            }
            if self.eat(b'|') {
                tail = self.term()?;
                if !self.eat(b']') {
                    return self.err("expected `]`");
                }
                break;
            }
            if !self.eat(b',') {
                return self.err("expected `,`, `|` or `]`");
            }
            items.push(self.term()?);
        }
        Ok(items.into_iter().rev().fold(tail, |t, h| Term::cons(h, t)))
    }
}

pub fn parse_term(text: &str) -> Result<Term, RuntimeError> {
    let mut p = P { s: text.as_bytes(), i: 0 };
    let t = p.term()?;
    p.ws();
    if p.i != p.s.len() {
        return p.err("trailing input");
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_term("[1..3]").unwrap(), parse_term("[1, 2, 3]").unwrap());
        assert_eq!(parse_term("[1 | [2, 3]]").unwrap(), parse_term("[1,2,3]").unwrap());
        assert_eq!(parse_term("[]").unwrap(), Term::nil());
        assert_eq!(parse_term("[5..4]").unwrap(), Term::nil());
    }

    #[test]
    fn nested_terms() {
        let t = parse_term("b(a(-3, east))").unwrap();
        assert_eq!(
            t,
            Term::App("b".into(), vec![Term::App("a".into(), vec![Term::Int(-3), Term::App("east".into(), vec![])])])
        );
        assert!(parse_term("b(").is_err());
        assert!(parse_term("X").is_err());
        assert!(parse_term("a b").is_err());
    }
}
