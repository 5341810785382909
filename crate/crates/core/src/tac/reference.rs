//! Plain EVM stack interpreter used as the oracle for the lifter.

use ruint::aliases::U256;

use super::eval::Outcome;
use super::machine::{Halt, Machine};
use crate::cfg::ControlFlowGraph;
use crate::disasm::{self, Instruction};

pub const STACK_LIMIT: usize = 1024;

/// Executes one instruction that is not a jump. The stack's top is its last
/// element.
pub fn step(ins: &Instruction, stack: &mut Vec<U256>, m: &mut Machine) -> Result<(), Outcome> {
    let op = ins.opcode;
    if !ins.is_valid || !op.is_defined() {
        return Err(Outcome::Halted(Halt::Invalid));
    }
    let underflow = || Outcome::Fault(format!("stack underflow at {:#x}", ins.offset));
    if op.is_push() {
        stack.push(ins.push_value().unwrap_or_default());
    } else if let Some(n) = op.dup_depth() {
        let v = *stack.len().checked_sub(n).and_then(|i| stack.get(i)).ok_or_else(underflow)?;
        stack.push(v);
    } else if let Some(n) = op.swap_depth() {
        let len = stack.len();
        if len < n + 1 {
            return Err(underflow());
        }
        stack.swap(len - 1, len - 1 - n);
    } else {
        match op.0 {
            disasm::JUMPDEST => {}
            disasm::PC => stack.push(U256::from(ins.offset)),
            disasm::JUMP | disasm::JUMPI => {
                return Err(Outcome::Fault("jump in straight-line code".into()));
            }
            _ => {
                if stack.len() < op.stack_inputs() {
                    return Err(underflow());
                }
                let args: Vec<U256> = (0..op.stack_inputs()).map(|_| stack.pop().expect("checked")).collect();
                if let Some(v) = m.apply(op, &args).map_err(Outcome::Halted)? {
                    stack.push(v);
                }
            }
        }
    }
    if stack.len() > STACK_LIMIT {
        return Err(Outcome::Fault("stack overflow".into()));
    }
    Ok(())
}

/// Runs instructions in order, ignoring control flow.
pub fn run_straight_line(instrs: &[Instruction], stack: &mut Vec<U256>, m: &mut Machine) -> Result<(), Outcome> {
    instrs.iter().try_for_each(|ins| step(ins, stack, m))
}

/// Runs from the start of `block` over the recovered CFG. Jumps leaving a
/// block whose target the analysis left unresolved stop the run with
/// [`Outcome::Exit`], mirroring `ijump` in lifted code.
pub fn run_from_block(
    cfg: &ControlFlowGraph,
    block: usize,
    mut stack: Vec<U256>,
    m: &mut Machine,
    step_limit: usize,
) -> Outcome {
    let mut current = block;
    let mut steps = 0usize;
    loop {
        let Some(b) = cfg.blocks.get(current) else {
            return Outcome::Fault(format!("no block {current}"));
        };
        let mut jumped = None;
        for ins in &b.instrs {
            steps += 1;
            if steps > step_limit {
                return Outcome::StepLimit;
            }
            let jump = match ins.opcode.0 {
                disasm::JUMP if ins.is_valid => {
                    let Some(t) = stack.pop() else {
                        return Outcome::Fault("stack underflow at jump".into());
                    };
                    Some(t)
                }
                disasm::JUMPI if ins.is_valid => {
                    if stack.len() < 2 {
                        return Outcome::Fault("stack underflow at jumpi".into());
                    }
                    let t = stack.pop().expect("checked");
                    let c = stack.pop().expect("checked");
                    (!c.is_zero()).then_some(t)
                }
                _ => {
                    if let Err(o) = step(ins, &mut stack, m) {
                        return o;
                    }
                    None
                }
            };
            if let Some(target) = jump {
                if cfg.unresolved.contains(&current) {
                    return Outcome::Exit(target);
                }
                let dest = (target <= U256::from(usize::MAX))
                    .then(|| target.to::<usize>())
                    .and_then(|t| cfg.block_at(t))
                    .filter(|&id| cfg.blocks[id].starts_with_jumpdest());
                match dest {
                    Some(id) => jumped = Some(id),
                    None => return Outcome::Halted(Halt::Invalid),
                }
            }
        }
        match jumped {
            Some(id) => current = id,
            None if b.terminator.is_exit() => {
                return Outcome::Fault(format!("block {current} ended without halting"));
            }
            None if current + 1 < cfg.blocks.len() => current += 1,
            None => return Outcome::Halted(Halt::Stop),
        }
    }
}
