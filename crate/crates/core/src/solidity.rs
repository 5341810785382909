//! Lexer for Solidity-shaped text. Shared by the source extractor, the
//! output validator and the metrics.
//!
//! Comments are dropped. Member accesses on the global objects (`msg`,
//! `block`, `tx`, `abi`) come out as one identifier token, so `msg.sender`
//! counts as a single unit.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset into the source.
    pub start: usize,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexed<'a> {
    pub tokens: Vec<Token<'a>>,
    /// Byte offset of a comment or string literal that never closes.
    pub unterminated: Option<usize>,
}

const GLOBALS: [&str; 4] = ["msg", "block", "tx", "abi"];

const OPERATORS: [&str; 26] = [
    ">>>=", "<<=", ">>=", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "|=", "&=", "^=", "<<", ">>", "=>", "->", ":=",
];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

pub fn lex(src: &str) -> Lexed<'_> {
    let bytes = src.as_bytes();
    let mut out = Lexed::default();
    let mut i = 0;
    while i < src.len() {
        let rest = &src[i..];
        let c = rest.chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
        } else if rest.starts_with("//") {
            i += rest.find('\n').unwrap_or(rest.len());
        } else if rest.starts_with("/*") {
            match rest[2..].find("*/") {
                Some(end) => i += end + 4,
                None => {
                    out.unterminated.get_or_insert(i);
                    break;
                }
            }
        } else if c == '"' || c == '\'' {
            let mut j = i + 1;
            let mut closed = false;
            while j < bytes.len() {
                match bytes[j] {
                    b'\\' => j += 2,
                    b'\n' => break,
                    b if b == c as u8 => {
                        closed = true;
                        j += 1;
                        break;
                    }
                    _ => j += 1,
                }
            }
            let j = j.min(src.len());
            if !closed {
                out.unterminated.get_or_insert(i);
            }
            out.tokens.push(Token { kind: TokenKind::Str, text: &src[i..j], start: i });
            i = j;
        } else if c.is_ascii_digit() {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_' || ch == '.'))
                .unwrap_or(rest.len());
            out.tokens.push(Token { kind: TokenKind::Number, text: &rest[..len], start: i });
            i += len;
        } else if is_ident_start(c) {
            let mut len = rest.find(|ch: char| !is_ident_char(ch)).unwrap_or(rest.len());
            if GLOBALS.contains(&&rest[..len]) && rest[len..].starts_with('.') {
                let member = &rest[len + 1..];
                if member.starts_with(is_ident_start) {
                    len += 1 + member.find(|ch: char| !is_ident_char(ch)).unwrap_or(member.len());
                }
            }
            out.tokens.push(Token { kind: TokenKind::Ident, text: &rest[..len], start: i });
            i += len;
        } else {
            let len = OPERATORS
                .iter()
                .find(|op| rest.starts_with(*op))
                .map_or(c.len_utf8(), |op| op.len());
            out.tokens.push(Token { kind: TokenKind::Punct, text: &rest[..len], start: i });
            i += len;
        }
    }
    out
}

/// Token texts only.
pub fn token_texts(src: &str) -> Vec<&str> {
    lex(src).tokens.into_iter().map(|t| t.text).collect()
}
