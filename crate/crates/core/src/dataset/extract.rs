//! Lexical extraction of function definitions from flattened Solidity.

use std::collections::BTreeMap;

use crate::solidity::{lex, Token, TokenKind};
use crate::tac::Visibility;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionKind {
    Function,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFunction {
    pub kind: FunctionKind,
    pub name: String,
    /// Canonical `name(type,...)`; for fallback and receive the bare
    /// keyword form, e.g. `fallback()`.
    pub signature: String,
    pub visibility: Option<Visibility>,
    /// From the `function` keyword through the closing brace.
    pub text: String,
    /// Between the outer braces.
    pub body: String,
}

/// User-defined type names that show up in parameter lists.
#[derive(Debug, Default)]
struct TypeNames {
    address_like: Vec<String>,
    enums: Vec<String>,
    structs: BTreeMap<String, Vec<Vec<String>>>,
    aliases: BTreeMap<String, String>,
}

fn collect_types(toks: &[Token]) -> TypeNames {
    let mut names = TypeNames::default();
    let mut i = 0;
    while i + 1 < toks.len() {
        let word = toks[i].text;
        let next = toks[i + 1];
        match word {
            "contract" | "interface" if next.kind == TokenKind::Ident => names.address_like.push(next.text.into()),
            "enum" if next.kind == TokenKind::Ident => names.enums.push(next.text.into()),
            "type" if next.kind == TokenKind::Ident && toks.get(i + 2).is_some_and(|t| t.is("is")) => {
                if let Some(under) = toks.get(i + 3) {
                    names.aliases.insert(next.text.into(), under.text.into());
                }
            }
            "struct" if next.kind == TokenKind::Ident && toks.get(i + 2).is_some_and(|t| t.is("{")) => {
                let close = matching(toks, i + 2).unwrap_or(toks.len());
                let members = toks[i + 3..close]
                    .split(|t| t.is(";"))
                    .filter(|m| !m.is_empty())
                    .map(|m| m.iter().map(|t| t.text.to_string()).collect())
                    .collect();
                names.structs.entry(next.text.into()).or_insert(members);
                i = close;
            }
            _ => {}
        }
        i += 1;
    }
    names
}

/// Index of the token closing the bracket at `open`.
fn matching(toks: &[Token], open: usize) -> Option<usize> {
    let (o, c) = match toks[open].text {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        _ => ("{", "}"),
    };
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

const ELEMENTARY: [(&str, &str); 5] = [
    ("uint", "uint256"),
    ("int", "int256"),
    ("byte", "bytes1"),
    ("fixed", "fixed128x18"),
    ("ufixed", "ufixed128x18"),
];

impl TypeNames {
    /// Canonical ABI type for one parameter written as `words`, which may
    /// include a data location and a name after the type.
    fn canonical(&self, words: &[String], depth: usize) -> String {
        let Some(first) = words.first() else {
            return String::new();
        };
        let mut rest = &words[1..];
        if first == "function" {
            return "function".into();
        }
        let mut path = first.clone();
        while rest.len() >= 2 && rest[0] == "." {
            path = rest[1].clone();
            rest = &rest[2..];
        }
        let mut base = self.resolve(&path, depth);
        if base == "address" && rest.first().is_some_and(|w| w == "payable") {
            rest = &rest[1..];
        }
        while rest.first().is_some_and(|w| w == "[") {
            let close = rest.iter().position(|w| w == "]").unwrap_or(rest.len() - 1);
            base.push('[');
            base.extend(rest[1..close].iter().map(String::as_str));
            base.push(']');
            rest = &rest[close + 1..];
        }
        base
    }

    fn resolve(&self, name: &str, depth: usize) -> String {
        if let Some((_, canon)) = ELEMENTARY.iter().find(|(short, _)| *short == name) {
            return canon.to_string();
        }
        if self.address_like.iter().any(|n| n == name) {
            return "address".into();
        }
        if self.enums.iter().any(|n| n == name) {
            return "uint8".into();
        }
        if let Some(under) = self.aliases.get(name) {
            return self.resolve(under, depth);
        }
        if let Some(members) = self.structs.get(name) {
            if depth > 16 {
                return name.into();
            }
            let inner: Vec<String> = members.iter().map(|m| self.canonical(m, depth + 1)).collect();
            return format!("({})", inner.join(","));
        }
        name.into()
    }
}

/// Parameter types of the list between `open` and its closing paren.
fn param_types(toks: &[Token], open: usize, close: usize, names: &TypeNames) -> Vec<String> {
    let inner = &toks[open + 1..close];
    if inner.is_empty() {
        return Vec::new();
    }
    let mut params = Vec::new();
    let mut start = 0;
    let mut level = 0i32;
    for (j, t) in inner.iter().enumerate() {
        match t.text {
            "(" | "[" => level += 1,
            ")" | "]" => level -= 1,
            "," if level == 0 => {
                params.push(&inner[start..j]);
                start = j + 1;
            }
            _ => {}
        }
    }
    params.push(&inner[start..]);
    params
        .into_iter()
        .map(|p| {
            let words: Vec<String> = p.iter().map(|t| t.text.to_string()).collect();
            names.canonical(&words, 0)
        })
        .collect()
}

/// Function, fallback and receive definitions with bodies, in source
/// order. Declarations without a body are skipped.
pub fn extract_function_sources(source: &str) -> Vec<SourceFunction> {
    let lexed = lex(source);
    let toks = &lexed.tokens;
    let names = collect_types(toks);
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        let (kind, name, open) = match t.text {
            "function" if toks.get(i + 1).is_some_and(|n| n.kind == TokenKind::Ident)
                && toks.get(i + 2).is_some_and(|p| p.is("(")) =>
            {
                (FunctionKind::Function, toks[i + 1].text, i + 2)
            }
            "fallback" if toks.get(i + 1).is_some_and(|p| p.is("(")) => (FunctionKind::Fallback, "fallback", i + 1),
            "receive" if toks.get(i + 1).is_some_and(|p| p.is("(")) => (FunctionKind::Receive, "receive", i + 1),
            _ => {
                i += 1;
                continue;
            }
        };
        let Some(close) = matching(toks, open) else {
            log::debug!("unclosed parameter list at byte {}", t.start);
            break;
        };
        let mut j = close + 1;
        let mut visibility = None;
        while j < toks.len() && !toks[j].is("{") && !toks[j].is(";") && !toks[j].is("}") {
            if toks[j].is("(") {
                j = matching(toks, j).unwrap_or(toks.len());
            } else if visibility.is_none() {
                visibility = Visibility::parse(toks[j].text);
            }
            j += 1;
        }
        if j >= toks.len() || !toks[j].is("{") {
            i = j;
            continue;
        }
        let Some(end) = matching(toks, j) else {
            log::debug!("unclosed body of {name} at byte {}", t.start);
            break;
        };
        let types = match kind {
            FunctionKind::Function => param_types(toks, open, close, &names),
            _ => Vec::new(),
        };
        out.push(SourceFunction {
            kind,
            name: name.to_string(),
            signature: format!("{name}({})", types.join(",")),
            visibility,
            text: source[t.start..toks[end].end()].to_string(),
            body: source[toks[j].end()..toks[end].start].to_string(),
        });
        i = end + 1;
    }
    out
}
