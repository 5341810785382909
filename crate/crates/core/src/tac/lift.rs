use std::collections::{BTreeMap, BTreeSet};

use ruint::aliases::U256;

use super::ir::{Operand, TacBlock, TacFunction, TacInstruction, TacOp};
use super::LiftError;
use crate::cfg::{BasicBlock, ControlFlowGraph, EdgeKind, FunctionCandidate, Terminator, MAX_STACK};
use crate::disasm::{self, Instruction, Opcode};

pub fn block_label(id: usize) -> String {
    format!("L{id}")
}

pub fn param_name(block: usize, slot: usize) -> String {
    format!("p{block}_{slot}")
}

/// Where a slot of a block's exit stack comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Value(Operand),
    /// Untouched entry slot, counted from the top.
    Entry(usize),
}

/// Stack of operands whose bottom is filled lazily with the block's entry
/// parameters as deeper slots are accessed.
#[derive(Debug, Clone)]
struct VirtualStack {
    block: usize,
    items: Vec<Operand>,
    /// Number of entry slots pulled into `items` so far.
    base: usize,
}

impl VirtualStack {
    fn new(block: usize) -> Self {
        Self {
            block,
            items: Vec::new(),
            base: 0,
        }
    }

    fn ensure(&mut self, n: usize) -> Result<(), LiftError> {
        while self.items.len() < n {
            if self.base >= MAX_STACK {
                return Err(LiftError::StackTooDeep { block: self.block });
            }
            self.items.insert(0, Operand::Var(param_name(self.block, self.base)));
            self.base += 1;
        }
        Ok(())
    }

    fn pop(&mut self) -> Result<Operand, LiftError> {
        self.ensure(1)?;
        Ok(self.items.pop().expect("ensured"))
    }

    fn push(&mut self, v: Operand) {
        self.items.push(v);
    }

    fn dup(&mut self, n: usize) -> Result<(), LiftError> {
        self.ensure(n)?;
        let v = self.items[self.items.len() - n].clone();
        self.items.push(v);
        Ok(())
    }

    fn swap(&mut self, n: usize) -> Result<(), LiftError> {
        self.ensure(n + 1)?;
        let len = self.items.len();
        self.items.swap(len - 1, len - 1 - n);
        Ok(())
    }

    fn slot(&self, s: usize) -> Slot {
        let len = self.items.len();
        if s < len {
            Slot::Value(self.items[len - 1 - s].clone())
        } else {
            Slot::Entry(s - len + self.base)
        }
    }

    /// Net change in stack height across the block.
    fn delta(&self) -> isize {
        self.items.len() as isize - self.base as isize
    }
}

/// Fresh temporary names, shared across a function.
#[derive(Debug, Default)]
struct Temps(usize);

impl Temps {
    fn fresh(&mut self) -> String {
        let name = format!("t{}", self.0);
        self.0 += 1;
        name
    }
}

fn invalid_at(offset: usize) -> TacInstruction {
    TacInstruction::new(None, TacOp::Evm(Opcode(disasm::INVALID)), vec![]).at(offset)
}

/// Translates one instruction that is not a jump.
fn step(
    ins: &Instruction,
    stack: &mut VirtualStack,
    temps: &mut Temps,
    out: &mut Vec<TacInstruction>,
) -> Result<(), LiftError> {
    let op = ins.opcode;
    if !ins.is_valid || !op.is_defined() {
        out.push(invalid_at(ins.offset));
        return Ok(());
    }
    if op.is_push() {
        let v = ins.push_value().unwrap_or_default();
        stack.push(Operand::Const(v));
        return Ok(());
    }
    if let Some(n) = op.dup_depth() {
        return stack.dup(n);
    }
    if let Some(n) = op.swap_depth() {
        return stack.swap(n);
    }
    match op.0 {
        disasm::POP => {
            stack.pop()?;
            return Ok(());
        }
        disasm::JUMPDEST => return Ok(()),
        disasm::PC => {
            stack.push(Operand::Const(U256::from(ins.offset)));
            return Ok(());
        }
        _ => {}
    }
    let mut args = Vec::with_capacity(op.stack_inputs());
    for _ in 0..op.stack_inputs() {
        args.push(stack.pop()?);
    }
    let dest = (op.stack_outputs() == 1).then(|| temps.fresh());
    if let Some(d) = &dest {
        stack.push(Operand::Var(d.clone()));
    }
    out.push(TacInstruction::new(dest, TacOp::Evm(op), args).at(ins.offset));
    Ok(())
}

/// TAC for a run of instructions without control flow.
#[derive(Debug, Clone)]
pub struct StraightLine {
    pub body: Vec<TacInstruction>,
    /// Operands left on the stack, top first. Slots below these are the
    /// untouched entry slots `p0_<consumed>`, `p0_<consumed + 1>`, ...
    pub exit: Vec<Operand>,
    /// Number of entry slots read, named `p0_0 .. p0_<consumed - 1>`.
    pub consumed: usize,
}

/// Lifts a straight-line instruction sequence whose entry stack slots are
/// the parameters `p0_<slot>`. Jumps are treated as plain pops.
pub fn lift_straight_line(instrs: &[Instruction]) -> Result<StraightLine, LiftError> {
    let mut stack = VirtualStack::new(0);
    let mut temps = Temps::default();
    let mut body = Vec::new();
    for ins in instrs {
        match ins.opcode.0 {
            disasm::JUMP => {
                stack.pop()?;
            }
            disasm::JUMPI => {
                stack.pop()?;
                stack.pop()?;
            }
            _ => step(ins, &mut stack, &mut temps, &mut body)?,
        }
    }
    Ok(StraightLine {
        body,
        exit: stack.items.iter().rev().cloned().collect(),
        consumed: stack.base,
    })
}

/// First pass over one block.
struct BlockLift {
    body: Vec<TacInstruction>,
    stack: VirtualStack,
    target: Option<Operand>,
    cond: Option<Operand>,
}

fn lift_block(block: &BasicBlock, temps: &mut Temps) -> Result<BlockLift, LiftError> {
    let mut stack = VirtualStack::new(block.id);
    let mut body = Vec::new();
    let (mut target, mut cond) = (None, None);
    let jump_at_end = matches!(block.terminator, Terminator::Jump | Terminator::JumpI);
    let n = block.instrs.len();
    for (i, ins) in block.instrs.iter().enumerate() {
        if jump_at_end && i + 1 == n {
            target = Some(stack.pop()?);
            if block.terminator == Terminator::JumpI {
                cond = Some(stack.pop()?);
            }
        } else {
            step(ins, &mut stack, temps, &mut body)?;
        }
    }
    Ok(BlockLift {
        body,
        stack,
        target,
        cond,
    })
}

/// Reverse post-order over `blocks`, following edges in CFG order.
fn reverse_post_order(cfg: &ControlFlowGraph, entry: usize, blocks: &BTreeSet<usize>) -> Vec<usize> {
    let mut seen = BTreeSet::from([entry]);
    let mut post = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(entry, succ_ids(cfg, entry, blocks))];
    while let Some((node, pending)) = stack.last_mut() {
        if pending.is_empty() {
            post.push(*node);
            stack.pop();
            continue;
        }
        let next = pending.remove(0);
        if seen.insert(next) {
            let succs = succ_ids(cfg, next, blocks);
            stack.push((next, succs));
        }
    }
    post.reverse();
    post
}

fn succ_ids(cfg: &ControlFlowGraph, id: usize, blocks: &BTreeSet<usize>) -> Vec<usize> {
    let mut out = Vec::new();
    for e in cfg.successors(id) {
        if blocks.contains(&e.to) && !out.contains(&e.to) {
            out.push(e.to);
        }
    }
    out
}

/// Checks that every loop edge enters its header at the height the header
/// was first reached with.
fn check_heights(
    cfg: &ControlFlowGraph,
    order: &[usize],
    lifted: &BTreeMap<usize, BlockLift>,
    blocks: &BTreeSet<usize>,
) -> Result<(), LiftError> {
    let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut height: BTreeMap<usize, isize> = BTreeMap::new();
    height.insert(order[0], 0);
    for &b in order {
        let Some(&h) = height.get(&b) else { continue };
        let out = h + lifted[&b].stack.delta();
        for to in succ_ids(cfg, b, blocks) {
            match height.get(&to) {
                None => {
                    height.insert(to, out);
                }
                Some(&seen) if seen != out && rank[&to] <= rank[&b] => {
                    return Err(LiftError::InconsistentStackDepth {
                        block: to,
                        depths: (seen, out),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Lifts the blocks of one dispatched function into TAC.
pub fn lift(cfg: &ControlFlowGraph, candidate: &FunctionCandidate) -> Result<TacFunction, LiftError> {
    let entry = candidate.entry_block;
    if entry >= cfg.blocks.len() {
        return Err(LiftError::UnknownBlock(entry));
    }
    let mut members = candidate.reachable_blocks.clone();
    members.insert(entry);
    let order = reverse_post_order(cfg, entry, &members);
    let members: BTreeSet<usize> = order.iter().copied().collect();

    let mut temps = Temps::default();
    let mut lifted = BTreeMap::new();
    for &b in &order {
        lifted.insert(b, lift_block(&cfg.blocks[b], &mut temps)?);
    }
    check_heights(cfg, &order, &lifted, &members)?;

    let preds: BTreeMap<usize, Vec<usize>> = order
        .iter()
        .map(|&b| {
            let mut ps: Vec<usize> = cfg
                .predecessors(b)
                .filter(|e| members.contains(&e.from))
                .map(|e| e.from)
                .collect();
            ps.sort_unstable();
            ps.dedup();
            (b, ps)
        })
        .collect();
    if !preds[&entry].is_empty() {
        return Err(LiftError::EntryHasPredecessors { block: entry });
    }

    // Entry slots each block must have bound: the ones it reads plus the ones
    // it passes through untouched to a successor that needs them.
    let mut needed: BTreeMap<usize, BTreeSet<usize>> = order
        .iter()
        .map(|&b| (b, (0..lifted[&b].stack.base).collect()))
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order.iter().rev() {
            let mut add = Vec::new();
            for to in succ_ids(cfg, b, &members) {
                for &k in &needed[&to] {
                    if let Slot::Entry(j) = lifted[&b].stack.slot(k) {
                        add.push(j);
                    }
                }
            }
            let set = needed.get_mut(&b).expect("every block has a set");
            for j in add {
                if j >= MAX_STACK {
                    return Err(LiftError::StackTooDeep { block: b });
                }
                changed |= set.insert(j);
            }
        }
    }

    let exit_value = |from: usize, slot: usize| -> Operand {
        match lifted[&from].stack.slot(slot) {
            Slot::Value(v) => v,
            Slot::Entry(j) => Operand::Var(param_name(from, j)),
        }
    };

    let mut blocks = Vec::with_capacity(order.len());
    for &b in &order {
        let block = &cfg.blocks[b];
        let mut instrs = Vec::new();
        if b != entry {
            let ps = &preds[&b];
            for &j in &needed[&b] {
                let dest = Some(param_name(b, j));
                let ins = if ps.len() == 1 && ps[0] != b {
                    TacInstruction::new(dest, TacOp::Copy, vec![exit_value(ps[0], j)])
                } else {
                    let args = ps
                        .iter()
                        .flat_map(|&p| [Operand::Label(block_label(p)), exit_value(p, j)])
                        .collect();
                    TacInstruction::new(dest, TacOp::Phi, args)
                };
                instrs.push(ins.at(block.start_offset));
            }
        }
        let this = &lifted[&b];
        instrs.extend(this.body.iter().cloned());
        let (target, cond) = (this.target.clone(), this.cond.clone());

        let last = block.last().offset;
        let edge_to = |kind: EdgeKind| {
            cfg.successors(b)
                .find(|e| e.kind == kind && members.contains(&e.to))
                .map(|e| e.to)
        };
        let jump = |to: usize| TacInstruction::new(None, TacOp::Jump, vec![Operand::Label(block_label(to))]).at(last);
        let stop = || TacInstruction::new(None, TacOp::Evm(Opcode(disasm::STOP)), vec![]).at(last);
        match block.terminator {
            Terminator::Jump => {
                let target = target.expect("jump pops a target");
                instrs.push(match edge_to(EdgeKind::Unconditional) {
                    Some(to) => jump(to),
                    None => TacInstruction::new(None, TacOp::IJump, vec![target]).at(last),
                });
            }
            Terminator::JumpI => {
                let (target, cond) = (target.expect("target"), cond.expect("condition"));
                instrs.push(match edge_to(EdgeKind::Taken) {
                    Some(to) => TacInstruction::new(None, TacOp::CJump, vec![cond, Operand::Label(block_label(to))]).at(last),
                    None => TacInstruction::new(None, TacOp::ICJump, vec![cond, target]).at(last),
                });
                instrs.push(match edge_to(EdgeKind::NotTaken) {
                    Some(to) => jump(to),
                    None => stop(),
                });
            }
            Terminator::FallThrough => instrs.push(match edge_to(EdgeKind::FallThrough) {
                Some(to) => jump(to),
                None => stop(),
            }),
            _ => {}
        }
        blocks.push(TacBlock::new(block_label(b), instrs));
    }

    Ok(TacFunction {
        selector: candidate.selector,
        signature: None,
        visibility: None,
        blocks,
        entry_label: block_label(entry),
    })
}
