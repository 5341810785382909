//! Shape checks on generated Solidity: balanced delimiters, a function
//! header, and no prompt markers in the output. Not a parser.

use super::DELIMITERS;
use crate::solidity::{lex, Token, TokenKind};

/// Problems found in `text`; empty means it passes.
pub fn validate(text: &str) -> Vec<String> {
    let mut problems = Vec::new();
    let lexed = lex(text);
    if let Some(at) = lexed.unterminated {
        problems.push(format!("unterminated comment or string at byte {at}"));
    }
    let mut open: Vec<&Token> = Vec::new();
    let mut mismatch = false;
    for t in lexed.tokens.iter().filter(|t| t.kind == TokenKind::Punct) {
        let want = match t.text {
            "(" | "{" | "[" => {
                open.push(t);
                continue;
            }
            ")" => "(",
            "}" => "{",
            "]" => "[",
            _ => continue,
        };
        match open.pop() {
            Some(o) if o.text == want => {}
            Some(o) => {
                problems.push(format!("`{}` at byte {} closes `{}` from byte {}", t.text, t.start, o.text, o.start));
                mismatch = true;
                break;
            }
            None => {
                problems.push(format!("unmatched `{}` at byte {}", t.text, t.start));
                mismatch = true;
                break;
            }
        }
    }
    if !mismatch {
        if let Some(o) = open.first() {
            problems.push(format!("`{}` at byte {} is never closed", o.text, o.start));
        }
    }
    if !has_header(&lexed.tokens) {
        problems.push("no function header".into());
    }
    for d in DELIMITERS {
        if text.contains(d) {
            problems.push(format!("prompt delimiter {d} in output"));
        }
    }
    problems
}

fn has_header(tokens: &[Token]) -> bool {
    tokens.windows(3).any(|w| match w[0].text {
        "function" => w[1].kind == TokenKind::Ident && w[2].is("("),
        "fallback" | "receive" | "constructor" => w[1].is("("),
        _ => false,
    })
}
