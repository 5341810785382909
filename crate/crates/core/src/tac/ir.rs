use std::fmt;

use ruint::aliases::U256;
use serde::{Deserialize, Serialize};

use crate::disasm::{self, Opcode};
use crate::keccak::Selector;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Var(String),
    Const(U256),
    Label(String),
}

impl Operand {
    pub fn var(name: impl Into<String>) -> Self {
        Operand::Var(name.into())
    }

    pub fn constant(v: u64) -> Self {
        Operand::Const(U256::from(v))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Operand::Label(l) => Some(l),
            _ => None,
        }
    }
}

/// Constants below ten print in decimal, everything else as minimal hex.
pub fn format_const(v: &U256) -> String {
    if *v < U256::from(10) {
        v.to::<u64>().to_string()
    } else {
        format!("{v:#x}")
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) | Operand::Label(v) => f.write_str(v),
            Operand::Const(c) => f.write_str(&format_const(c)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TacOp {
    /// Any EVM operation that survives lifting (arithmetic, memory, storage,
    /// environment, calls, logs and halting instructions).
    Evm(Opcode),
    Copy,
    Phi,
    /// `jump L` to a resolved label.
    Jump,
    /// `cjump cond, L`.
    CJump,
    /// Jump to a computed target the analysis could not resolve.
    IJump,
    /// Conditional jump to an unresolved target.
    ICJump,
    /// Sentinel appended when trailing blocks were dropped.
    Truncated,
}

const VARIADIC: [u8; 12] = [
    0xa0, 0xa1, 0xa2, 0xa3, 0xa4, // LOG0..LOG4
    0xf0, 0xf1, 0xf2, 0xf4, 0xf5, 0xfa, // CREATE, CALL, CALLCODE, DELEGATECALL, CREATE2, STATICCALL
    0x3c, // EXTCODECOPY
];

const HAS_SIDE_EFFECTS: [u8; 6] = [0xf0, 0xf1, 0xf2, 0xf4, 0xf5, 0xfa];

impl TacOp {
    pub fn produces_value(self) -> bool {
        match self {
            TacOp::Evm(op) => op.stack_outputs() == 1,
            TacOp::Copy | TacOp::Phi => true,
            _ => false,
        }
    }

    /// Ops exempt from the three-operand bound: calls, creates, logs,
    /// EXTCODECOPY and phi merges.
    pub fn is_call_like(self) -> bool {
        match self {
            TacOp::Evm(op) => VARIADIC.contains(&op.0),
            TacOp::Phi => true,
            _ => false,
        }
    }

    /// Value-producing ops whose removal cannot change behaviour when the
    /// result is unused.
    pub fn is_pure_value(self) -> bool {
        match self {
            TacOp::Evm(op) => op.stack_outputs() == 1 && !HAS_SIDE_EFFECTS.contains(&op.0),
            TacOp::Copy | TacOp::Phi => true,
            _ => false,
        }
    }

    pub fn is_control(self) -> bool {
        match self {
            TacOp::Jump | TacOp::CJump | TacOp::IJump | TacOp::ICJump | TacOp::Truncated => true,
            TacOp::Evm(op) => op.halts() && op.0 != disasm::JUMP,
            _ => false,
        }
    }

    pub fn mnemonic(self) -> String {
        match self {
            TacOp::Evm(op) => op.mnemonic().to_ascii_lowercase(),
            TacOp::Copy => "copy".into(),
            TacOp::Phi => "phi".into(),
            TacOp::Jump => "jump".into(),
            TacOp::CJump => "cjump".into(),
            TacOp::IJump => "ijump".into(),
            TacOp::ICJump => "icjump".into(),
            TacOp::Truncated => "truncated".into(),
        }
    }
}

/// Equality ignores `source_offset`, which is provenance and does not
/// survive the text form.
#[derive(Debug, Clone)]
pub struct TacInstruction {
    pub dest: Option<String>,
    pub op: TacOp,
    /// EVM operands top-of-stack first. Phi operands alternate
    /// `Label, value` per incoming edge.
    pub args: Vec<Operand>,
    pub source_offset: Option<usize>,
}

impl PartialEq for TacInstruction {
    fn eq(&self, other: &Self) -> bool {
        self.dest == other.dest && self.op == other.op && self.args == other.args
    }
}

impl Eq for TacInstruction {}

impl TacInstruction {
    pub fn new(dest: Option<String>, op: TacOp, args: Vec<Operand>) -> Self {
        Self {
            dest,
            op,
            args,
            source_offset: None,
        }
    }

    pub fn at(mut self, offset: usize) -> Self {
        self.source_offset = Some(offset);
        self
    }

    /// Variables read by this instruction.
    pub fn uses(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Operand::as_var)
    }

    /// Incoming (label, value) pairs of a phi.
    pub fn phi_pairs(&self) -> impl Iterator<Item = (&str, &Operand)> {
        self.args
            .chunks_exact(2)
            .filter_map(|pair| pair[0].as_label().map(|l| (l, &pair[1])))
    }

    /// Labels this instruction can transfer control to.
    pub fn targets(&self) -> impl Iterator<Item = &str> {
        let labels: &[Operand] = match self.op {
            TacOp::Jump => &self.args[..],
            TacOp::CJump => self.args.get(1..).unwrap_or(&[]),
            _ => &[],
        };
        labels.iter().filter_map(Operand::as_label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TacBlock {
    pub label: String,
    pub instrs: Vec<TacInstruction>,
    pub successors: Vec<String>,
}

impl TacBlock {
    pub fn new(label: impl Into<String>, instrs: Vec<TacInstruction>) -> Self {
        let mut block = Self {
            label: label.into(),
            instrs,
            successors: Vec::new(),
        };
        block.refresh_successors();
        block
    }

    /// Recomputes `successors` from the jump instructions, in order of
    /// appearance.
    pub fn refresh_successors(&mut self) {
        let mut succ: Vec<String> = Vec::new();
        for ins in &self.instrs {
            for t in ins.targets() {
                if !succ.iter().any(|s| s == t) {
                    succ.push(t.to_string());
                }
            }
        }
        self.successors = succ;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::External => "external",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
        }
    }

    pub fn parse(word: &str) -> Option<Self> {
        Some(match word {
            "public" => Visibility::Public,
            "external" => Visibility::External,
            "internal" => Visibility::Internal,
            "private" => Visibility::Private,
            _ => return None,
        })
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TacFunction {
    pub selector: Option<Selector>,
    pub signature: Option<String>,
    pub visibility: Option<Visibility>,
    pub blocks: Vec<TacBlock>,
    pub entry_label: String,
}

impl TacFunction {
    pub fn block(&self, label: &str) -> Option<&TacBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn instructions(&self) -> impl Iterator<Item = &TacInstruction> {
        self.blocks.iter().flat_map(|b| b.instrs.iter())
    }

    /// Same function with selector, signature and visibility cleared; this
    /// is what survives a render/parse round trip.
    pub fn body_only(&self) -> TacFunction {
        TacFunction {
            selector: None,
            signature: None,
            visibility: None,
            ..self.clone()
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.instructions().any(|i| i.op == TacOp::Truncated)
    }
}
