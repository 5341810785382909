use std::fmt;
use std::sync::LazyLock;

/// Raw table source. Bytes missing from the file are undefined in this fork.
const TABLE_SOURCE: &str = include_str!("../../data/opcodes_shanghai.tsv");

pub const STOP: u8 = 0x00;
pub const ADD: u8 = 0x01;
pub const MUL: u8 = 0x02;
pub const SUB: u8 = 0x03;
pub const DIV: u8 = 0x04;
pub const EQ: u8 = 0x14;
pub const LT: u8 = 0x10;
pub const GT: u8 = 0x11;
pub const ISZERO: u8 = 0x15;
pub const AND: u8 = 0x16;
pub const SHR: u8 = 0x1c;
pub const CALLVALUE: u8 = 0x34;
pub const CALLDATALOAD: u8 = 0x35;
pub const CALLDATASIZE: u8 = 0x36;
pub const POP: u8 = 0x50;
pub const MSTORE: u8 = 0x52;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const PC: u8 = 0x58;
pub const JUMPDEST: u8 = 0x5b;
pub const PUSH0: u8 = 0x5f;
pub const PUSH1: u8 = 0x60;
pub const PUSH4: u8 = 0x63;
pub const PUSH32: u8 = 0x7f;
pub const DUP1: u8 = 0x80;
pub const DUP16: u8 = 0x8f;
pub const SWAP1: u8 = 0x90;
pub const SWAP16: u8 = 0x9f;
pub const RETURN: u8 = 0xf3;
pub const REVERT: u8 = 0xfd;
pub const INVALID: u8 = 0xfe;
pub const SELFDESTRUCT: u8 = 0xff;

/// One row of the instruction table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpInfo {
    pub mnemonic: &'static str,
    pub inputs: u8,
    pub outputs: u8,
    pub defined: bool,
}

const UNDEFINED: OpInfo = OpInfo {
    mnemonic: "INVALID",
    inputs: 0,
    outputs: 0,
    defined: false,
};

static TABLE: LazyLock<[OpInfo; 256]> = LazyLock::new(|| {
    let mut table = [UNDEFINED; 256];
    for (lineno, line) in TABLE_SOURCE.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&'static str> = line.split_whitespace().collect();
        let bad = || panic!("opcode table line {}: {line:?}", lineno + 1);
        if cols.len() != 4 {
            bad();
        }
        let byte = u8::from_str_radix(cols[0].trim_start_matches("0x"), 16).unwrap_or_else(|_| bad());
        table[byte as usize] = OpInfo {
            mnemonic: cols[1],
            inputs: cols[2].parse().unwrap_or_else(|_| bad()),
            outputs: cols[3].parse().unwrap_or_else(|_| bad()),
            defined: true,
        };
    }
    table
});

/// A single EVM opcode byte with table lookups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Opcode(pub u8);

impl Opcode {
    pub fn info(self) -> &'static OpInfo {
        &TABLE[self.0 as usize]
    }

    pub fn mnemonic(self) -> &'static str {
        self.info().mnemonic
    }

    pub fn is_defined(self) -> bool {
        self.info().defined
    }

    pub fn stack_inputs(self) -> usize {
        self.info().inputs as usize
    }

    pub fn stack_outputs(self) -> usize {
        self.info().outputs as usize
    }

    /// Immediate length for PUSH1..PUSH32, zero otherwise (PUSH0 has none).
    pub fn push_size(self) -> usize {
        if (PUSH1..=PUSH32).contains(&self.0) {
            (self.0 - PUSH0) as usize
        } else {
            0
        }
    }

    pub fn is_push(self) -> bool {
        (PUSH0..=PUSH32).contains(&self.0)
    }

    pub fn dup_depth(self) -> Option<usize> {
        (DUP1..=DUP16).contains(&self.0).then(|| (self.0 - DUP1 + 1) as usize)
    }

    pub fn swap_depth(self) -> Option<usize> {
        (SWAP1..=SWAP16).contains(&self.0).then(|| (self.0 - SWAP1 + 1) as usize)
    }

    /// Instructions after which control never falls through to the next byte.
    pub fn halts(self) -> bool {
        matches!(self.0, STOP | RETURN | REVERT | INVALID | SELFDESTRUCT | JUMP) || !self.is_defined()
    }

    pub fn from_mnemonic(name: &str) -> Option<Opcode> {
        let upper = name.to_ascii_uppercase();
        (0..=255u8)
            .map(Opcode)
            .find(|op| op.is_defined() && op.mnemonic() == upper)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}
