use crate::ir::{parse_type, Functor, TypeTable, Var};

use super::{AliasError, AliasSet, Datastructure, Selector};

fn syntax(msg: impl Into<String>) -> AliasError {
    AliasError::Syntax(msg.into())
}

/// Splits at depth-0 occurrences of `sep` for which `accept` holds on the
/// text that follows.
fn split_top(s: &str, sep: char, accept: impl Fn(&str) -> bool) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 && accept(&s[i + 1..]) => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Parses `V`, `V^f,1.g,2` or `V^f,1.T(type)`. Functor arities come from
/// the type table.
pub fn parse_datastructure(text: &str, table: &TypeTable) -> Result<Datastructure, AliasError> {
    let text = text.trim();
    let (v, rest) = match text.split_once('^') {
        Some((v, r)) => (v.trim(), Some(r)),
        None => (text, None),
    };
    if !v.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
        || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return Err(syntax(format!("`{v}` is not a variable")));
    }
    let mut path = Vec::new();
    if let Some(rest) = rest {
        for sel in split_top(rest, '.', |_| true) {
            let sel = sel.trim();
            if let Some(inner) = sel.strip_prefix("T(").and_then(|s| s.strip_suffix(')')) {
                let t = parse_type(inner).map_err(|e| syntax(format!("type selector `{sel}`: {e}")))?;
                path.push(Selector::Type(t));
            } else {
                let (name, idx) = sel.rsplit_once(',').ok_or_else(|| syntax(format!("bad selector `{sel}`")))?;
                let idx: usize = idx.trim().parse().map_err(|_| syntax(format!("bad argument index in `{sel}`")))?;
                let name = name.trim();
                let arity = table.functor_arity(name).ok_or_else(|| syntax(format!("unknown functor `{name}`")))?;
                if idx == 0 || idx > arity {
                    return Err(syntax(format!("argument index out of range in `{sel}`")));
                }
                path.push(Selector::Field(Functor::new(name, arity), idx));
            }
        }
    }
    Ok(Datastructure { var: Var::new(v), path })
}

/// Parses `top`, `{}` or `{ alias( D1 , D2 ) ... }`. Pairs may be separated
/// by whitespace or commas.
pub fn parse_alias_set(text: &str, table: &TypeTable) -> Result<AliasSet, AliasError> {
    let text = text.trim();
    if text == "top" {
        return Ok(AliasSet::Top);
    }
    let inner = text
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| syntax("expected `top` or a braced set"))?;
    let mut set = AliasSet::empty();
    let mut rest = inner.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
    while !rest.is_empty() {
        let body = rest.strip_prefix("alias").map(str::trim_start).and_then(|s| s.strip_prefix('('));
        let body = body.ok_or_else(|| syntax(format!("expected `alias(` at `{rest}`")))?;
        let mut depth = 1;
        let mut end = None;
        for (i, c) in body.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or_else(|| syntax("unbalanced parentheses"))?;
        // A comma inside a field selector is followed by its index.
        let sides = split_top(&body[..end], ',', |after| !after.trim_start().starts_with(|c: char| c.is_ascii_digit()));
        if sides.len() != 2 {
            return Err(syntax(format!("alias pair needs two sides: `{}`", &body[..end])));
        }
        set.insert(parse_datastructure(sides[0], table)?, parse_datastructure(sides[1], table)?);
        rest = body[end + 1..].trim_start_matches(|c: char| c.is_whitespace() || c == ',');
    }
    Ok(set)
}
