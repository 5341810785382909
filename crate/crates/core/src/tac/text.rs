//! Textual TAC.
//!
//! ```text
//! function  := block+
//! block     := LABEL ":" NEWLINE instr*
//! instr     := "  " (assign | effect | control) NEWLINE
//! assign    := VAR "=" (operand BINOP operand | NAME "(" operands? ")"
//!                       | "phi" "(" (LABEL ":" operand ("," LABEL ":" operand)*)? ")"
//!                       | operand)
//! effect    := NAME "(" operands? ")" | NAME
//! control   := "jump" LABEL | "cjump" operand "," LABEL
//!            | "ijump" operand | "icjump" operand "," operand | "truncated"
//! operand   := VAR | NUMBER
//! BINOP     := "+" | "-" | "*" | "/" | "%" | "&" | "|" | "^" | "<<" | ">>" | "<" | ">" | "=="
//! ```
//!
//! `a << b` and `a >> b` shift `a` by `b` bits. Numbers below ten are
//! decimal, larger ones `0x` hex. Blank lines and lines starting with `#`
//! are ignored.

use std::collections::BTreeSet;
use std::fmt::Write;

use ruint::aliases::U256;

use super::ir::{Operand, TacBlock, TacFunction, TacInstruction, TacOp};
use crate::disasm::{self, Opcode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

const INFIX: [(u8, &str); 13] = [
    (0x01, "+"),
    (0x03, "-"),
    (0x02, "*"),
    (0x04, "/"),
    (0x06, "%"),
    (0x16, "&"),
    (0x17, "|"),
    (0x18, "^"),
    (0x1b, "<<"),
    (0x1c, ">>"),
    (0x10, "<"),
    (0x11, ">"),
    (0x14, "=="),
];

pub(crate) fn infix_symbol(op: Opcode) -> Option<&'static str> {
    INFIX.iter().find(|(b, _)| *b == op.0).map(|(_, s)| *s)
}

pub(crate) fn is_shift(op: Opcode) -> bool {
    matches!(op.0, 0x1b | 0x1c)
}

fn join(args: &[Operand]) -> String {
    args.iter().map(Operand::to_string).collect::<Vec<_>>().join(", ")
}

pub fn render_instruction(ins: &TacInstruction) -> String {
    let a = &ins.args;
    let rhs = match ins.op {
        TacOp::Jump => return format!("jump {}", join(a)),
        TacOp::CJump => return format!("cjump {}", join(a)),
        TacOp::IJump => return format!("ijump {}", join(a)),
        TacOp::ICJump => return format!("icjump {}", join(a)),
        TacOp::Truncated => return "truncated".into(),
        TacOp::Copy => join(a),
        TacOp::Phi => {
            let pairs: Vec<String> = a.chunks(2).map(|p| format!("{}: {}", p[0], p.get(1).map(Operand::to_string).unwrap_or_default())).collect();
            format!("phi({})", pairs.join(", "))
        }
        TacOp::Evm(op) => match infix_symbol(op) {
            Some(sym) if a.len() == 2 && is_shift(op) => format!("{} {sym} {}", a[1], a[0]),
            Some(sym) if a.len() == 2 => format!("{} {sym} {}", a[0], a[1]),
            _ if a.is_empty() && ins.dest.is_none() => ins.op.mnemonic(),
            _ => format!("{}({})", ins.op.mnemonic(), join(a)),
        },
    };
    match &ins.dest {
        Some(d) => format!("{d} = {rhs}"),
        None => rhs,
    }
}

/// Deterministic text form; this is the exact TAC section of a prompt.
pub fn render(f: &TacFunction) -> String {
    let mut out = String::new();
    for block in &f.blocks {
        let _ = writeln!(out, "{}:", block.label);
        for ins in &block.instrs {
            let _ = writeln!(out, "  {}", render_instruction(ins));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(U256),
    Sym(&'static str),
}

// Longest first so that `<<` wins over `<`.
const SYMBOLS: [&str; 18] = [
    "==", "<<", ">>", "=", "(", ")", ",", ":", "+", "-", "*", "/", "%", "&", "|", "^", "<", ">",
];

struct Lexer<'a> {
    line: usize,
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(line: usize, text: &'a str) -> Result<Self, SyntaxError> {
        let bytes = text.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        let err = |col: usize, message: String| SyntaxError { line, col, message };
        while i < bytes.len() {
            let c = bytes[i];
            if c == b' ' || c == b'\t' {
                i += 1;
                continue;
            }
            let col = i + 1;
            if c.is_ascii_alphabetic() || c == b'_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), col));
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                let word = &text[start..i];
                let value = match word.strip_prefix("0x") {
                    Some(hex) if !hex.is_empty() => U256::from_str_radix(hex, 16).ok(),
                    Some(_) => None,
                    None => U256::from_str_radix(word, 10).ok(),
                };
                let value = value.ok_or_else(|| err(col, format!("bad number {word:?}")))?;
                toks.push((Tok::Number(value), col));
            } else {
                let rest = &text[i..];
                let sym = SYMBOLS
                    .iter()
                    .find(|s| rest.starts_with(**s))
                    .ok_or_else(|| err(col, format!("unexpected character {:?}", c as char)))?;
                toks.push((Tok::Sym(sym), col));
                i += sym.len();
            }
        }
        Ok(Self {
            line,
            text,
            toks,
            pos: 0,
        })
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map_or(self.text.len() + 1, |(_, c)| *c)
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == sym => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected '{sym}'"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn operand(&mut self) -> Result<Operand, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Operand::Var(s))
            }
            Some(Tok::Number(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(Operand::Const(n))
            }
            _ => Err(self.error("expected operand")),
        }
    }

    fn done(&self) -> Result<(), SyntaxError> {
        if self.pos < self.toks.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(())
    }
}

/// Opcodes that can appear by name in TAC text.
fn named_op(name: &str) -> Option<Opcode> {
    let op = Opcode::from_mnemonic(name)?;
    if name.bytes().any(|b| b.is_ascii_uppercase()) {
        return None;
    }
    let stack_only = op.is_push()
        || op.dup_depth().is_some()
        || op.swap_depth().is_some()
        || matches!(op.0, disasm::POP | disasm::JUMP | disasm::JUMPI | disasm::JUMPDEST | disasm::PC);
    (!stack_only).then_some(op)
}

fn call_args(lx: &mut Lexer) -> Result<Vec<Operand>, SyntaxError> {
    lx.expect_sym("(")?;
    let mut args = Vec::new();
    if lx.peek() == Some(&Tok::Sym(")")) {
        lx.pos += 1;
        return Ok(args);
    }
    loop {
        args.push(lx.operand()?);
        match lx.next() {
            Some(Tok::Sym(",")) => continue,
            Some(Tok::Sym(")")) => return Ok(args),
            _ => {
                lx.pos -= 1;
                return Err(lx.error("expected ',' or ')'"));
            }
        }
    }
}

/// Parses the operand list of a named EVM op; the name token has already
/// been consumed.
fn evm_call(lx: &mut Lexer, name: &str, with_dest: bool) -> Result<TacInstruction, SyntaxError> {
    let Some(op) = named_op(name) else {
        lx.pos -= 1;
        return Err(lx.error(format!("unknown operation {name:?}")));
    };
    let args = if with_dest || lx.peek().is_some() || op.stack_inputs() > 0 {
        call_args(lx)?
    } else {
        Vec::new()
    };
    if args.len() != op.stack_inputs() {
        return Err(lx.error(format!("{name} takes {} operands, got {}", op.stack_inputs(), args.len())));
    }
    if with_dest != (op.stack_outputs() == 1) {
        return Err(lx.error(if with_dest {
            format!("{name} produces no value")
        } else {
            format!("result of {name} must be assigned")
        }));
    }
    Ok(TacInstruction::new(None, TacOp::Evm(op), args))
}

fn parse_rhs(lx: &mut Lexer) -> Result<TacInstruction, SyntaxError> {
    if let (Some(Tok::Ident(name)), Some(Tok::Sym("("))) = (lx.peek(), lx.peek_at(1)) {
        let name = name.clone();
        lx.pos += 1;
        if name == "phi" {
            lx.expect_sym("(")?;
            let mut args = Vec::new();
            if lx.peek() == Some(&Tok::Sym(")")) {
                lx.pos += 1;
                return Ok(TacInstruction::new(None, TacOp::Phi, args));
            }
            loop {
                args.push(Operand::Label(lx.ident("label")?));
                lx.expect_sym(":")?;
                args.push(lx.operand()?);
                match lx.next() {
                    Some(Tok::Sym(",")) => continue,
                    Some(Tok::Sym(")")) => break,
                    _ => {
                        lx.pos -= 1;
                        return Err(lx.error("expected ',' or ')'"));
                    }
                }
            }
            return Ok(TacInstruction::new(None, TacOp::Phi, args));
        }
        return evm_call(lx, &name, true);
    }
    let first = lx.operand()?;
    let Some(Tok::Sym(sym)) = lx.peek().cloned() else {
        return Ok(TacInstruction::new(None, TacOp::Copy, vec![first]));
    };
    let Some(&(byte, _)) = INFIX.iter().find(|(_, s)| *s == sym) else {
        return Err(lx.error(format!("unexpected '{sym}'")));
    };
    lx.pos += 1;
    let second = lx.operand()?;
    let op = Opcode(byte);
    let args = if is_shift(op) {
        vec![second, first]
    } else {
        vec![first, second]
    };
    Ok(TacInstruction::new(None, TacOp::Evm(op), args))
}

fn parse_instruction(lx: &mut Lexer) -> Result<TacInstruction, SyntaxError> {
    if let (Some(Tok::Ident(dest)), Some(Tok::Sym("="))) = (lx.peek(), lx.peek_at(1)) {
        let dest = dest.clone();
        lx.pos += 2;
        let mut ins = parse_rhs(lx)?;
        ins.dest = Some(dest);
        lx.done()?;
        return Ok(ins);
    }
    let word = lx.ident("instruction")?;
    let ins = match word.as_str() {
        "jump" => TacInstruction::new(None, TacOp::Jump, vec![Operand::Label(lx.ident("label")?)]),
        "cjump" => {
            let cond = lx.operand()?;
            lx.expect_sym(",")?;
            TacInstruction::new(None, TacOp::CJump, vec![cond, Operand::Label(lx.ident("label")?)])
        }
        "ijump" => TacInstruction::new(None, TacOp::IJump, vec![lx.operand()?]),
        "icjump" => {
            let cond = lx.operand()?;
            lx.expect_sym(",")?;
            TacInstruction::new(None, TacOp::ICJump, vec![cond, lx.operand()?])
        }
        "truncated" => TacInstruction::new(None, TacOp::Truncated, vec![]),
        name => evm_call(lx, name, false)?,
    };
    lx.done()?;
    Ok(ins)
}

fn is_label_line(text: &str) -> bool {
    !text.starts_with([' ', '\t'])
}

/// Parses the text produced by [`render`]. Selector, signature and
/// visibility are not part of the text and come back empty.
pub fn parse(text: &str) -> Result<TacFunction, SyntaxError> {
    let mut blocks: Vec<TacBlock> = Vec::new();
    let mut refs: Vec<(String, usize, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let mut lx = Lexer::new(line, raw)?;
        if is_label_line(raw) {
            let label = lx.ident("label")?;
            lx.expect_sym(":")?;
            lx.done()?;
            if blocks.iter().any(|b| b.label == label) {
                return Err(SyntaxError {
                    line,
                    col: 1,
                    message: format!("duplicate label {label}"),
                });
            }
            blocks.push(TacBlock::new(label, Vec::new()));
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            return Err(lx.error("instruction outside of a block"));
        };
        let ins = parse_instruction(&mut lx)?;
        for l in ins.args.iter().filter_map(Operand::as_label) {
            let col = lx
                .toks
                .iter()
                .find(|(t, _)| matches!(t, Tok::Ident(name) if name == l))
                .map_or(1, |(_, c)| *c);
            refs.push((l.to_string(), line, col));
        }
        block.instrs.push(ins);
    }
    let Some(first) = blocks.first() else {
        return Err(SyntaxError {
            line: 1,
            col: 1,
            message: "no blocks".into(),
        });
    };
    let entry_label = first.label.clone();
    let truncated = blocks
        .iter()
        .flat_map(|b| &b.instrs)
        .any(|i| i.op == TacOp::Truncated);
    if !truncated {
        let labels: BTreeSet<&str> = blocks.iter().map(|b| b.label.as_str()).collect();
        if let Some((l, line, col)) = refs.iter().find(|(l, _, _)| !labels.contains(l.as_str())) {
            return Err(SyntaxError {
                line: *line,
                col: *col,
                message: format!("undefined label {l}"),
            });
        }
    }
    for b in &mut blocks {
        b.refresh_successors();
    }
    Ok(TacFunction {
        selector: None,
        signature: None,
        visibility: None,
        blocks,
        entry_label,
    })
}
