//! Concrete execution state shared by the TAC evaluator and the reference
//! stack interpreter. Only the stack/dataflow half differs between the two.

use std::collections::BTreeMap;

use ruint::aliases::U256;

use crate::disasm::Opcode;
use crate::keccak::keccak256;
use crate::semantics;

/// Memory beyond this size is treated as out-of-gas.
pub const MEMORY_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Halt {
    Stop,
    Return(Vec<u8>),
    Revert(Vec<u8>),
    Invalid,
    SelfDestruct(U256),
    /// External calls and contract creation are not modelled.
    Unsupported(Opcode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Log {
    pub topics: Vec<U256>,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub memory: Vec<u8>,
    pub storage: BTreeMap<U256, U256>,
    pub calldata: Vec<u8>,
    pub code: Vec<u8>,
    /// Values returned by zero-input environment opcodes (CALLER, NUMBER...).
    /// Missing entries read as a value derived from the opcode byte.
    pub env: BTreeMap<u8, U256>,
    pub logs: Vec<Log>,
}

impl Default for Machine {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

fn word_from(bytes: &[u8], offset: U256) -> U256 {
    let mut word = [0u8; 32];
    if let Some(start) = small(offset) {
        for (i, b) in word.iter_mut().enumerate() {
            if let Some(v) = start.checked_add(i).and_then(|p| bytes.get(p)) {
                *b = *v;
            }
        }
    }
    U256::from_be_bytes(word)
}

fn small(v: U256) -> Option<usize> {
    (v <= U256::from(u32::MAX)).then(|| v.to::<usize>())
}

fn derived(tag: &[u8]) -> U256 {
    U256::from_be_bytes(keccak256(tag))
}

impl Machine {
    pub fn new(calldata: Vec<u8>) -> Self {
        Self {
            memory: Vec::new(),
            storage: BTreeMap::new(),
            calldata,
            code: Vec::new(),
            env: BTreeMap::new(),
            logs: Vec::new(),
        }
    }

    fn env_value(&self, op: Opcode) -> U256 {
        match op.0 {
            0x36 => U256::from(self.calldata.len()),
            0x38 => U256::from(self.code.len()),
            0x3d => U256::ZERO, // RETURNDATASIZE
            0x59 => U256::from(self.memory.len()),
            b => self.env.get(&b).copied().unwrap_or_else(|| {
                // Addresses are 160-bit; keep derived defaults in that range.
                derived(&[b]) >> 96
            }),
        }
    }

    /// Grows memory to cover `[offset, offset + len)`, word aligned.
    fn touch(&mut self, offset: U256, len: U256) -> Result<Option<(usize, usize)>, Halt> {
        if len.is_zero() {
            return Ok(None);
        }
        let (Some(start), Some(len)) = (small(offset), small(len)) else {
            return Err(Halt::Invalid);
        };
        let end = start.checked_add(len).ok_or(Halt::Invalid)?;
        if end > MEMORY_LIMIT {
            return Err(Halt::Invalid);
        }
        let words = end.div_ceil(32) * 32;
        if self.memory.len() < words {
            self.memory.resize(words, 0);
        }
        Ok(Some((start, len)))
    }

    fn read(&mut self, offset: U256, len: U256) -> Result<Vec<u8>, Halt> {
        Ok(match self.touch(offset, len)? {
            Some((s, l)) => self.memory[s..s + l].to_vec(),
            None => Vec::new(),
        })
    }

    fn copy_in(&mut self, dest: U256, src: U256, len: U256, from: Source) -> Result<(), Halt> {
        let Some((d, l)) = self.touch(dest, len)? else {
            return Ok(());
        };
        let source: &[u8] = match from {
            Source::Calldata => &self.calldata,
            Source::Code => &self.code,
            Source::Empty => &[],
        };
        let start = small(src);
        let chunk: Vec<u8> = (0..l)
            .map(|i| {
                start
                    .and_then(|s| s.checked_add(i))
                    .and_then(|p| source.get(p))
                    .copied()
                    .unwrap_or(0)
            })
            .collect();
        self.memory[d..d + l].copy_from_slice(&chunk);
        Ok(())
    }

    /// Executes one non-stack, non-control opcode. `args` are top-of-stack
    /// first. Returns the pushed value for value-producing opcodes.
    pub fn apply(&mut self, op: Opcode, args: &[U256]) -> Result<Option<U256>, Halt> {
        if args.len() != op.stack_inputs() {
            return Err(Halt::Invalid);
        }
        if let Some(v) = semantics::eval_pure(op, args) {
            return Ok(Some(v));
        }
        let arg = |i: usize| args[i];
        let value = match op.0 {
            0x00 => return Err(Halt::Stop),
            0x20 => {
                let data = self.read(arg(0), arg(1))?;
                U256::from_be_bytes(keccak256(&data))
            }
            0x31 | 0x3b | 0x3f | 0x40 => {
                let mut tag = vec![op.0];
                tag.extend_from_slice(&arg(0).to_be_bytes::<32>());
                let v = derived(&tag);
                if op.0 == 0x3b { v >> 240 } else { v }
            }
            0x35 => word_from(&self.calldata, arg(0)),
            0x37 => {
                self.copy_in(arg(0), arg(1), arg(2), Source::Calldata)?;
                return Ok(None);
            }
            0x39 => {
                self.copy_in(arg(0), arg(1), arg(2), Source::Code)?;
                return Ok(None);
            }
            0x3c => {
                self.copy_in(arg(1), arg(2), arg(3), Source::Empty)?;
                return Ok(None);
            }
            0x3e => {
                // Return data is always empty: any non-empty copy is out of
                // bounds.
                if !arg(2).is_zero() || !arg(1).is_zero() {
                    return Err(Halt::Invalid);
                }
                return Ok(None);
            }
            0x30 | 0x32..=0x34 | 0x36 | 0x38 | 0x3a | 0x3d | 0x41..=0x48 | 0x59 | 0x5a => self.env_value(op),
            0x50 => return Ok(None),
            0x51 => {
                let bytes = self.read(arg(0), U256::from(32))?;
                U256::from_be_slice(&bytes)
            }
            0x52 => {
                if let Some((s, _)) = self.touch(arg(0), U256::from(32))? {
                    self.memory[s..s + 32].copy_from_slice(&arg(1).to_be_bytes::<32>());
                }
                return Ok(None);
            }
            0x53 => {
                if let Some((s, _)) = self.touch(arg(0), U256::from(1))? {
                    self.memory[s] = arg(1).to_be_bytes::<32>()[31];
                }
                return Ok(None);
            }
            0x54 => self.storage.get(&arg(0)).copied().unwrap_or_default(),
            0x55 => {
                if arg(1).is_zero() {
                    self.storage.remove(&arg(0));
                } else {
                    self.storage.insert(arg(0), arg(1));
                }
                return Ok(None);
            }
            0xa0..=0xa4 => {
                let data = self.read(arg(0), arg(1))?;
                self.logs.push(Log {
                    topics: args[2..].to_vec(),
                    data,
                });
                return Ok(None);
            }
            0xf3 => return Err(Halt::Return(self.read(arg(0), arg(1))?)),
            0xfd => return Err(Halt::Revert(self.read(arg(0), arg(1))?)),
            0xff => return Err(Halt::SelfDestruct(arg(0))),
            0xf0..=0xf2 | 0xf4 | 0xf5 | 0xfa => return Err(Halt::Unsupported(op)),
            _ => return Err(Halt::Invalid),
        };
        Ok(Some(value))
    }
}

#[derive(Clone, Copy)]
enum Source {
    Calldata,
    Code,
    Empty,
}
