use std::collections::{BTreeMap, BTreeSet};

use ruint::aliases::U256;
use serde::Serialize;

use super::blocks::{BasicBlock, Terminator};
use crate::disasm::{self, Instruction};

/// EVM stack limit; abstract stacks never hold more known slots.
pub const MAX_STACK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbsKind {
    Const(U256),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AbstractValue {
    pub kind: AbsKind,
    pub provenance: Option<usize>,
}

impl AbstractValue {
    pub const UNKNOWN: AbstractValue = AbstractValue {
        kind: AbsKind::Unknown,
        provenance: None,
    };

    fn constant(value: U256, at: usize) -> Self {
        Self {
            kind: AbsKind::Const(value),
            provenance: Some(at),
        }
    }

    fn unknown(at: usize) -> Self {
        Self {
            kind: AbsKind::Unknown,
            provenance: Some(at),
        }
    }

    pub fn as_const(&self) -> Option<U256> {
        match self.kind {
            AbsKind::Const(v) => Some(v),
            AbsKind::Unknown => None,
        }
    }

    fn join(self, other: Self) -> Self {
        let kind = if self.kind == other.kind {
            self.kind
        } else {
            AbsKind::Unknown
        };
        let provenance = if self.provenance == other.provenance {
            self.provenance
        } else {
            None
        };
        Self { kind, provenance }
    }
}

/// Known top portion of the stack (top is the last element). Every slot
/// below the known portion is Unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbsStack(pub Vec<AbstractValue>);

impl AbsStack {
    fn pop(&mut self) -> AbstractValue {
        self.0.pop().unwrap_or(AbstractValue::UNKNOWN)
    }

    fn push(&mut self, v: AbstractValue) {
        self.0.push(v);
        if self.0.len() > MAX_STACK {
            self.0.remove(0);
        }
    }

    /// Value `depth` slots below the top (0 = top).
    pub fn peek(&self, depth: usize) -> AbstractValue {
        self.0
            .len()
            .checked_sub(depth + 1)
            .map_or(AbstractValue::UNKNOWN, |i| self.0[i])
    }

    fn ensure(&mut self, len: usize) {
        if self.0.len() < len {
            let pad = len - self.0.len();
            self.0.splice(0..0, std::iter::repeat(AbstractValue::UNKNOWN).take(pad));
        }
    }

    /// Element-wise join aligned at the top; the result keeps only the
    /// slots both sides know about.
    fn join(&self, other: &AbsStack) -> AbsStack {
        let n = self.0.len().min(other.0.len());
        let a = &self.0[self.0.len() - n..];
        let b = &other.0[other.0.len() - n..];
        AbsStack(a.iter().zip(b).map(|(x, y)| x.join(*y)).collect())
    }
}

pub(crate) fn step(stack: &mut AbsStack, ins: &Instruction) {
    let op = ins.opcode;
    if op.is_push() {
        match ins.push_value() {
            Some(v) => stack.push(AbstractValue::constant(v, ins.offset)),
            None => stack.push(AbstractValue::unknown(ins.offset)),
        }
        return;
    }
    if let Some(n) = op.dup_depth() {
        let v = stack.peek(n - 1);
        stack.push(v);
        return;
    }
    if let Some(n) = op.swap_depth() {
        stack.ensure(n + 1);
        let len = stack.0.len();
        stack.0.swap(len - 1, len - 1 - n);
        return;
    }
    match op.0 {
        disasm::POP => {
            stack.pop();
        }
        disasm::AND | disasm::ADD => {
            let a = stack.pop();
            let b = stack.pop();
            let v = match (a.as_const(), b.as_const()) {
                (Some(x), Some(y)) if op.0 == disasm::AND => AbstractValue::constant(x & y, ins.offset),
                (Some(x), Some(y)) => AbstractValue::constant(x.wrapping_add(y), ins.offset),
                _ => AbstractValue::unknown(ins.offset),
            };
            stack.push(v);
        }
        _ => {
            for _ in 0..op.stack_inputs() {
                stack.pop();
            }
            for _ in 0..op.stack_outputs() {
                stack.push(AbstractValue::unknown(ins.offset));
            }
        }
    }
}

/// Runs a block's instructions except the final JUMP/JUMPI, returning the
/// stack just before the control transfer.
pub(crate) fn run_block(block: &BasicBlock, entry: &AbsStack) -> AbsStack {
    let mut stack = entry.clone();
    let body = match block.terminator {
        Terminator::Jump | Terminator::JumpI => &block.instrs[..block.instrs.len() - 1],
        _ => &block.instrs[..],
    };
    for ins in body {
        step(&mut stack, ins);
    }
    stack
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    Taken,
    NotTaken,
    Unconditional,
    FallThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct ControlFlowGraph {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
    pub unresolved: Vec<usize>,
    /// Fixpoint entry stacks; `None` for blocks the analysis never reached.
    pub entry_stacks: Vec<Option<AbsStack>>,
    pub iterations: usize,
    /// Set if the iteration bound was hit before reaching a fixpoint.
    pub fixpoint_capped: bool,
}

impl ControlFlowGraph {
    pub fn successors(&self, block: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == block)
    }

    pub fn predecessors(&self, block: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == block)
    }

    pub fn block_at(&self, offset: usize) -> Option<usize> {
        self.blocks
            .binary_search_by_key(&offset, |b| b.start_offset)
            .ok()
    }
}

struct Resolver<'a> {
    blocks: &'a [BasicBlock],
    by_offset: BTreeMap<usize, usize>,
}

impl Resolver<'_> {
    fn jump_target(&self, target: AbstractValue) -> Option<usize> {
        let value = target.as_const()?;
        if value > U256::from(usize::MAX) {
            return None;
        }
        let id = *self.by_offset.get(&value.to::<usize>())?;
        self.blocks[id].starts_with_jumpdest().then_some(id)
    }

    fn next_block(&self, id: usize) -> Option<usize> {
        (id + 1 < self.blocks.len()).then_some(id + 1)
    }

    /// Outgoing edges and whether the block's jump stays unresolved.
    fn edges(&self, block: &BasicBlock, exit: &AbsStack) -> (Vec<(usize, EdgeKind)>, bool) {
        let mut out = Vec::new();
        let mut unresolved = false;
        match block.terminator {
            Terminator::Jump => match self.jump_target(exit.peek(0)) {
                Some(t) => out.push((t, EdgeKind::Unconditional)),
                None => unresolved = true,
            },
            Terminator::JumpI => {
                match self.jump_target(exit.peek(0)) {
                    Some(t) => out.push((t, EdgeKind::Taken)),
                    None => unresolved = true,
                }
                if let Some(n) = self.next_block(block.id) {
                    out.push((n, EdgeKind::NotTaken));
                }
            }
            Terminator::FallThrough => {
                if let Some(n) = self.next_block(block.id) {
                    out.push((n, EdgeKind::FallThrough));
                }
            }
            _ => {}
        }
        (out, unresolved)
    }

    /// Entry stack passed along an edge: the exit stack minus the jump
    /// operands.
    fn outgoing_stack(block: &BasicBlock, exit: &AbsStack) -> AbsStack {
        let mut s = exit.clone();
        let consumed = match block.terminator {
            Terminator::Jump => 1,
            Terminator::JumpI => 2,
            _ => 0,
        };
        for _ in 0..consumed {
            s.pop();
        }
        s
    }
}

/// Resolves JUMP/JUMPI targets by a flat constant-propagation over abstract
/// stacks, iterated to a fixpoint from block 0. JUMPDEST blocks that remain
/// unreached are then seeded with an all-unknown stack (they may be targets
/// of unresolved jumps) until every such block has been analysed.
pub fn resolve_jumps(blocks: Vec<BasicBlock>) -> ControlFlowGraph {
    let resolver = Resolver {
        blocks: &blocks,
        by_offset: blocks.iter().map(|b| (b.start_offset, b.id)).collect(),
    };
    let n = blocks.len();
    let cap = n.max(1) * MAX_STACK;
    let mut entry: Vec<Option<AbsStack>> = vec![None; n];
    let mut worklist = BTreeSet::new();
    let mut iterations = 0;
    let mut capped = false;
    if n > 0 {
        entry[0] = Some(AbsStack::default());
        worklist.insert(0);
    }

    loop {
        while let Some(id) = worklist.pop_first() {
            iterations += 1;
            if iterations > cap {
                capped = true;
                break;
            }
            let block = &blocks[id];
            let exit = run_block(block, entry[id].as_ref().expect("queued blocks have state"));
            let (succs, _) = resolver.edges(block, &exit);
            let passed = Resolver::outgoing_stack(block, &exit);
            for (to, _) in succs {
                let joined = match &entry[to] {
                    Some(old) => old.join(&passed),
                    None => passed.clone(),
                };
                if entry[to].as_ref() != Some(&joined) {
                    entry[to] = Some(joined);
                    worklist.insert(to);
                }
            }
        }
        if capped {
            break;
        }
        match (0..n).find(|&i| entry[i].is_none() && blocks[i].starts_with_jumpdest()) {
            Some(seed) => {
                entry[seed] = Some(AbsStack::default());
                worklist.insert(seed);
            }
            None => break,
        }
    }

    let mut edges = Vec::new();
    let mut unresolved = Vec::new();
    for block in &blocks {
        let Some(state) = &entry[block.id] else {
            continue;
        };
        let exit = run_block(block, state);
        let (succs, open) = resolver.edges(block, &exit);
        if open {
            unresolved.push(block.id);
        }
        edges.extend(succs.into_iter().map(|(to, kind)| Edge {
            from: block.id,
            to,
            kind,
        }));
    }

    ControlFlowGraph {
        blocks,
        edges,
        unresolved,
        entry_stacks: entry,
        iterations,
        fixpoint_capped: capped,
    }
}
