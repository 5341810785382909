//! Bytecode decoding: hex parsing, the opcode table, instruction streams and
//! solc metadata trailer detection.

mod opcode;

pub use opcode::*;

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DisasmError {
    #[error("OddLengthHex: hex text has an odd number of digits ({0})")]
    OddLengthHex(usize),
    #[error("NonHexCharacter: {ch:?} at position {position}")]
    NonHexCharacter { ch: char, position: usize },
    #[error("EmptyInput: no bytecode")]
    EmptyInput,
    #[error("NonContiguousOffsets: expected offset {expected}, found {found}")]
    NonContiguousOffsets { expected: usize, found: usize },
}

/// Non-empty raw bytecode together with its normalized hex spelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bytecode {
    bytes: Vec<u8>,
    source_hex: String,
}

impl Bytecode {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, DisasmError> {
        if bytes.is_empty() {
            return Err(DisasmError::EmptyInput);
        }
        let source_hex = format!("0x{}", hex::encode(&bytes));
        Ok(Self { bytes, source_hex })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn source_hex(&self) -> &str {
        &self.source_hex
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The executable prefix described by `layout`; falls back to the whole
    /// code if the layout would leave nothing.
    pub fn executable(&self, layout: &CodeLayout) -> Bytecode {
        let end = layout.code_end.min(self.bytes.len());
        if end == 0 || end == self.bytes.len() {
            return self.clone();
        }
        Bytecode::from_bytes(self.bytes[..end].to_vec()).expect("non-empty prefix")
    }
}

/// Decodes optionally `0x`-prefixed, case-insensitive hex. Surrounding
/// whitespace is ignored.
pub fn parse_hex(text: &str) -> Result<Bytecode, DisasmError> {
    let trimmed = text.trim();
    let digits = trimmed
        .strip_prefix("0x")
        .or_else(|| trimmed.strip_prefix("0X"))
        .unwrap_or(trimmed);
    if digits.is_empty() {
        return Err(DisasmError::EmptyInput);
    }
    let prefix_len = trimmed.len() - digits.len();
    let bytes = hex::decode(digits).map_err(|e| match e {
        hex::FromHexError::OddLength => DisasmError::OddLengthHex(digits.len()),
        hex::FromHexError::InvalidHexCharacter { c, index } => DisasmError::NonHexCharacter {
            ch: c,
            position: index + prefix_len,
        },
        hex::FromHexError::InvalidStringLength => DisasmError::OddLengthHex(digits.len()),
    })?;
    Bytecode::from_bytes(bytes)
}

/// One decoded instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: Opcode,
    /// PUSH1..PUSH32 payload; shorter than the nominal size only for a
    /// truncated PUSH at the very end of the code.
    pub immediate: Option<Vec<u8>>,
    pub is_valid: bool,
}

impl Instruction {
    pub fn size(&self) -> usize {
        1 + self.immediate.as_ref().map_or(0, Vec::len)
    }

    pub fn next_offset(&self) -> usize {
        self.offset + self.size()
    }

    pub fn is_truncated_push(&self) -> bool {
        self.immediate
            .as_ref()
            .is_some_and(|imm| imm.len() < self.opcode.push_size())
    }

    /// Pushed constant as a 256-bit value (PUSH0 yields zero).
    pub fn push_value(&self) -> Option<ruint::aliases::U256> {
        if !self.opcode.is_push() || !self.is_valid {
            return None;
        }
        let imm = self.immediate.as_deref().unwrap_or(&[]);
        Some(ruint::aliases::U256::from_be_slice(imm))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04x}: {}", self.offset, self.opcode.mnemonic())?;
        if let Some(imm) = &self.immediate {
            if !imm.is_empty() {
                write!(f, " 0x{}", hex::encode(imm))?;
            }
        }
        Ok(())
    }
}

/// Linear sweep over the whole byte sequence. Never fails: undefined bytes
/// become invalid instructions and a PUSH running past the end keeps the
/// bytes that exist.
pub fn disassemble(code: &Bytecode) -> Vec<Instruction> {
    disassemble_bytes(code.bytes())
}

pub(crate) fn disassemble_bytes(bytes: &[u8]) -> Vec<Instruction> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut pc = 0;
    while pc < bytes.len() {
        let opcode = Opcode(bytes[pc]);
        let size = opcode.push_size();
        let (immediate, is_valid) = if opcode.is_push() && size > 0 {
            let end = (pc + 1 + size).min(bytes.len());
            let imm = bytes[pc + 1..end].to_vec();
            let complete = imm.len() == size;
            (Some(imm), complete)
        } else {
            (None, opcode.is_defined())
        };
        let ins = Instruction {
            offset: pc,
            opcode,
            immediate,
            is_valid,
        };
        pc = ins.next_offset();
        out.push(ins);
    }
    out
}

/// Inverse of [`disassemble`]; requires offsets contiguous from zero.
pub fn reassemble(instrs: &[Instruction]) -> Result<Bytecode, DisasmError> {
    let mut bytes = Vec::new();
    for ins in instrs {
        if ins.offset != bytes.len() {
            return Err(DisasmError::NonContiguousOffsets {
                expected: bytes.len(),
                found: ins.offset,
            });
        }
        bytes.push(ins.opcode.0);
        if let Some(imm) = &ins.immediate {
            bytes.extend_from_slice(imm);
        }
    }
    Bytecode::from_bytes(bytes)
}

/// Split of a code blob into executable code and non-code regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeLayout {
    pub code_end: usize,
    pub metadata: Option<Vec<u8>>,
    pub data_regions: Vec<(usize, usize)>,
}

impl CodeLayout {
    pub fn whole(len: usize) -> Self {
        Self {
            code_end: len,
            metadata: None,
            data_regions: Vec::new(),
        }
    }
}

/// Detects the solc CBOR metadata trailer: the final two bytes hold the CBOR
/// payload length `L`, and the trailer is the last `L + 2` bytes. The payload
/// must open with a small definite-length CBOR map whose first key is a text
/// string. Anything else means "no metadata".
pub fn strip_metadata(code: &Bytecode) -> CodeLayout {
    let bytes = code.bytes();
    let total = bytes.len();
    let none = CodeLayout::whole(total);
    if total < 4 {
        return none;
    }
    let payload_len = u16::from_be_bytes([bytes[total - 2], bytes[total - 1]]) as usize;
    if payload_len < 2 || payload_len + 2 > total {
        return none;
    }
    let start = total - payload_len - 2;
    let header = bytes[start];
    let first_key = bytes[start + 1];
    let is_map = (0xa1..=0xb7).contains(&header);
    let key_is_text = (0x60..=0x77).contains(&first_key);
    if !is_map || !key_is_text {
        return none;
    }
    CodeLayout {
        code_end: start,
        metadata: Some(bytes[start..].to_vec()),
        data_regions: vec![(start, total)],
    }
}

/// Text listing: `<offset>: <MNEMONIC> [0x<immediate>]`, one per line.
pub fn listing(instrs: &[Instruction]) -> String {
    let mut out = String::new();
    for ins in instrs {
        out.push_str(&ins.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(bytes: &[u8]) -> Bytecode {
        Bytecode::from_bytes(bytes.to_vec()).unwrap()
    }

    #[test]
    fn parse_hex_examples() {
        assert_eq!(parse_hex("0x6001").unwrap().bytes(), &[0x60, 0x01]);
        assert_eq!(parse_hex("6001").unwrap().bytes(), &[0x60, 0x01]);
        assert_eq!(parse_hex("  0X60AB\n").unwrap().source_hex(), "0x60ab");
        assert!(matches!(parse_hex("0x600"), Err(DisasmError::OddLengthHex(_))));
        assert_eq!(
            parse_hex("0x60zz"),
            Err(DisasmError::NonHexCharacter { ch: 'z', position: 4 })
        );
        assert_eq!(parse_hex("0x"), Err(DisasmError::EmptyInput));
        assert_eq!(parse_hex("   "), Err(DisasmError::EmptyInput));
    }

    #[test]
    fn disassemble_add_program() {
        let ins = disassemble(&code(&[0x60, 0x01, 0x60, 0x02, 0x01]));
        let text: Vec<String> = ins.iter().map(|i| i.to_string()).collect();
        assert_eq!(text, ["0000: PUSH1 0x01", "0002: PUSH1 0x02", "0004: ADD"]);
        assert!(ins.iter().all(|i| i.is_valid));
    }

    #[test]
    fn designated_invalid_and_stop() {
        let ins = disassemble(&code(&[0xfe]));
        assert_eq!(ins[0].opcode.mnemonic(), "INVALID");
        assert_eq!(ins[0].offset, 0);
        let ins = disassemble(&code(&[0x00]));
        assert_eq!(ins[0].opcode.mnemonic(), "STOP");
    }

    #[test]
    fn undefined_byte_is_invalid_class() {
        let ins = disassemble(&code(&[0x0c, 0x00]));
        assert_eq!(ins[0].opcode.mnemonic(), "INVALID");
        assert!(!ins[0].is_valid);
        assert!(ins[1].is_valid);
    }

    #[test]
    fn truncated_push_is_flagged() {
        let ins = disassemble(&code(&[0x00, 0x62, 0xaa]));
        assert_eq!(ins.len(), 2);
        assert!(ins[1].is_truncated_push());
        assert!(!ins[1].is_valid);
        assert_eq!(ins[1].immediate.as_deref(), Some(&[0xaa][..]));
        let bare = disassemble(&code(&[0x7f]));
        assert_eq!(bare[0].immediate.as_deref(), Some(&[][..]));
    }

    #[test]
    fn reassemble_examples() {
        let push = Instruction {
            offset: 0,
            opcode: Opcode(PUSH1),
            immediate: Some(vec![0x60]),
            is_valid: true,
        };
        assert_eq!(reassemble(std::slice::from_ref(&push)).unwrap().bytes(), &[0x60, 0x60]);
        let gap = Instruction {
            offset: 3,
            opcode: Opcode(STOP),
            immediate: None,
            is_valid: true,
        };
        assert_eq!(
            reassemble(&[push, gap]),
            Err(DisasmError::NonContiguousOffsets { expected: 2, found: 3 })
        );
    }

    #[test]
    fn metadata_short_and_impossible() {
        assert_eq!(strip_metadata(&code(&[0x00])), CodeLayout::whole(1));
        assert_eq!(
            strip_metadata(&code(&[0x00, 0x00, 0xa1, 0x64, 0xff, 0xff])),
            CodeLayout::whole(6)
        );
    }

    #[test]
    fn metadata_trailer_detected() {
        // STOP, then a 4-byte CBOR payload {"a": 1} padded plus the length suffix.
        let bytes = [0x00, 0xa1, 0x61, b'a', 0x01, 0x00, 0x04];
        let layout = strip_metadata(&code(&bytes));
        assert_eq!(layout.code_end, 1);
        assert_eq!(layout.metadata.as_deref(), Some(&bytes[1..]));
        assert_eq!(layout.data_regions, vec![(1, 7)]);
    }

    #[test]
    fn metadata_rejects_non_map() {
        let bytes = [0x00, 0x11, 0x61, b'a', 0x01, 0x00, 0x04];
        assert_eq!(strip_metadata(&code(&bytes)).metadata, None);
    }
}
