use serde::Serialize;

use crate::disasm::{self, CodeLayout, Instruction, Opcode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Terminator {
    Jump,
    JumpI,
    Stop,
    Return,
    Revert,
    Invalid,
    SelfDestruct,
    FallThrough,
}

impl Terminator {
    fn of(ins: &Instruction) -> Option<Terminator> {
        if !ins.is_valid {
            return Some(Terminator::Invalid);
        }
        Some(match ins.opcode.0 {
            disasm::JUMP => Terminator::Jump,
            disasm::JUMPI => Terminator::JumpI,
            disasm::STOP => Terminator::Stop,
            disasm::RETURN => Terminator::Return,
            disasm::REVERT => Terminator::Revert,
            disasm::INVALID => Terminator::Invalid,
            disasm::SELFDESTRUCT => Terminator::SelfDestruct,
            _ => return None,
        })
    }

    /// Halting terminators with no successors.
    pub fn is_exit(self) -> bool {
        matches!(
            self,
            Terminator::Stop
                | Terminator::Return
                | Terminator::Revert
                | Terminator::Invalid
                | Terminator::SelfDestruct
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub start_offset: usize,
    /// Exclusive: the byte after the last instruction.
    pub end_offset: usize,
    pub instrs: Vec<Instruction>,
    pub terminator: Terminator,
}

impl BasicBlock {
    pub fn starts_with_jumpdest(&self) -> bool {
        self.instrs
            .first()
            .is_some_and(|i| i.opcode == Opcode(disasm::JUMPDEST))
    }

    pub fn last(&self) -> &Instruction {
        self.instrs.last().expect("blocks are never empty")
    }
}

/// Splits the executable part of an instruction stream into basic blocks.
/// Leaders are offset 0, every JUMPDEST and every instruction following a
/// terminator. Instructions starting at or after `layout.code_end` are
/// ignored.
pub fn build_blocks(instrs: &[Instruction], layout: &CodeLayout) -> Vec<BasicBlock> {
    let mut blocks: Vec<BasicBlock> = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();

    let flush = |current: &mut Vec<Instruction>, blocks: &mut Vec<BasicBlock>, term: Terminator| {
        if current.is_empty() {
            return;
        }
        let instrs = std::mem::take(current);
        blocks.push(BasicBlock {
            id: blocks.len(),
            start_offset: instrs[0].offset,
            end_offset: instrs.last().map(Instruction::next_offset).unwrap_or_default(),
            instrs,
            terminator: term,
        });
    };

    for ins in instrs.iter().take_while(|i| i.offset < layout.code_end) {
        if ins.opcode == Opcode(disasm::JUMPDEST) && ins.is_valid {
            flush(&mut current, &mut blocks, Terminator::FallThrough);
        }
        current.push(ins.clone());
        if let Some(term) = Terminator::of(ins) {
            flush(&mut current, &mut blocks, term);
        }
    }
    flush(&mut current, &mut blocks, Terminator::FallThrough);
    blocks
}
