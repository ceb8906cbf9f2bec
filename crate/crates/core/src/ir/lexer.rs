use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Lower-case identifier or quoted atom.
    Atom(String),
    /// Upper-case or underscore-initial identifier.
    Var(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

const PUNCTS: &[&str] =
    &["--->", ":-", "=>", "<=", ":=", "==", "->", "\\+", "(", ")", "[", "]", "|", ",", ";", ".", "{", "}", "^", "="];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i - line_start + 1;
        if c == b'\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'%' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            if c.is_ascii_uppercase() || c == b'_' {
                Tok::Var(word.to_string())
            } else {
                Tok::Atom(word.to_string())
            }
        } else if c.is_ascii_digit() || (c == b'-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            Tok::Int(text.parse().map_err(|_| ParseError::at(line, col, format!("integer out of range: {text}")))?)
        } else if c == b'"' || c == b'\'' {
            i += 1;
            let mut s = String::new();
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => return Err(ParseError::at(line, col, "unterminated quoted text")),
                    Some(&q) if q == c => {
                        i += 1;
                        break;
                    }
                    Some(b'\\') => {
                        let esc = bytes.get(i + 1).copied().unwrap_or(b'\\');
                        s.push(match esc {
                            b'n' => '\n',
                            b't' => '\t',
                            other => other as char,
                        });
                        i += 2;
                    }
                    Some(_) => {
                        let ch = src[i..].chars().next().unwrap();
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            if c == b'"' {
                Tok::Str(s)
            } else {
                Tok::Atom(s)
            }
        } else if let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            i += p.len();
            Tok::Punct(p)
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(ParseError::at(line, col, format!("unexpected character `{ch}`")));
        };
        out.push(Token { tok, line, col, offset: start });
    }
    let col = i - line_start + 1;
    out.push(Token { tok: Tok::Eof, line, col, offset: src.len() });
    Ok(out)
}
