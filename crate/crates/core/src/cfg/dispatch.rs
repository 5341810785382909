use std::collections::{BTreeSet, VecDeque};

use ruint::aliases::U256;

use super::absint::{ControlFlowGraph, EdgeKind};
use super::blocks::{BasicBlock, Terminator};
use super::CfgError;
use crate::disasm::{self, Instruction, Opcode};
use crate::keccak::Selector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionCandidate {
    /// Absent for the fallback / receive path.
    pub selector: Option<Selector>,
    pub entry_block: usize,
    pub reachable_blocks: BTreeSet<usize>,
    pub is_payable_guess: bool,
}

/// Dispatcher analysis result, including the blocks that make up the
/// selector dispatch itself.
#[derive(Debug, Clone)]
pub struct Dispatch {
    pub candidates: Vec<FunctionCandidate>,
    pub region: BTreeSet<usize>,
}

/// Symbolic facts tracked while walking the dispatcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Const(U256),
    CalldataWord,
    CalldataSize,
    Selector,
    SelectorIs(u32),
    SelectorRange,
    ShortCalldata,
    CallValue,
    Other,
}

#[derive(Debug, Clone, Default)]
struct TagStack(Vec<Tag>);

impl TagStack {
    fn pop(&mut self) -> Tag {
        self.0.pop().unwrap_or(Tag::Other)
    }

    fn peek(&self, depth: usize) -> Tag {
        self.0
            .len()
            .checked_sub(depth + 1)
            .map_or(Tag::Other, |i| self.0[i])
    }

    fn push(&mut self, t: Tag) {
        self.0.push(t);
    }
}

fn selector_mask() -> U256 {
    U256::from(0xffff_ffffu64)
}

fn step(stack: &mut TagStack, ins: &Instruction, uses_selector: &mut bool) {
    let op = ins.opcode;
    if op.is_push() {
        stack.push(ins.push_value().map_or(Tag::Other, Tag::Const));
        return;
    }
    if let Some(n) = op.dup_depth() {
        let t = stack.peek(n - 1);
        stack.push(t);
        return;
    }
    if let Some(n) = op.swap_depth() {
        while stack.0.len() < n + 1 {
            stack.0.insert(0, Tag::Other);
        }
        let len = stack.0.len();
        stack.0.swap(len - 1, len - 1 - n);
        return;
    }
    let args: Vec<Tag> = (0..op.stack_inputs()).map(|_| stack.pop()).collect();
    let result = match (op.0, args.as_slice()) {
        (disasm::CALLDATALOAD, [Tag::Const(z)]) if z.is_zero() => Tag::CalldataWord,
        (disasm::CALLDATASIZE, []) => Tag::CalldataSize,
        (disasm::CALLVALUE, []) => Tag::CallValue,
        (disasm::SHR, [Tag::Const(s), Tag::CalldataWord]) if *s == U256::from(224) => Tag::Selector,
        (disasm::DIV, [Tag::CalldataWord, Tag::Const(d)]) if *d == U256::from(1) << 224 => Tag::Selector,
        (disasm::AND, [Tag::Selector, Tag::Const(m)]) | (disasm::AND, [Tag::Const(m), Tag::Selector])
            if *m == selector_mask() =>
        {
            Tag::Selector
        }
        (disasm::EQ, [Tag::Selector, Tag::Const(c)]) | (disasm::EQ, [Tag::Const(c), Tag::Selector])
            if *c <= selector_mask() =>
        {
            *uses_selector = true;
            Tag::SelectorIs(c.to::<u32>())
        }
        (disasm::LT | disasm::GT, [Tag::Selector, Tag::Const(_)])
        | (disasm::LT | disasm::GT, [Tag::Const(_), Tag::Selector]) => {
            *uses_selector = true;
            Tag::SelectorRange
        }
        (disasm::LT, [Tag::CalldataSize, Tag::Const(four)]) | (disasm::GT, [Tag::Const(four), Tag::CalldataSize])
            if *four == U256::from(4) =>
        {
            Tag::ShortCalldata
        }
        _ => Tag::Other,
    };
    for _ in 0..op.stack_outputs() {
        stack.push(result);
    }
}

struct Found {
    selector: Option<Selector>,
    entry: usize,
    /// Start offset of the block whose branch discovered the entry.
    discovered_at: usize,
}

fn has_callvalue_guard(block: &BasicBlock) -> bool {
    block.terminator == Terminator::JumpI
        && block.instrs.iter().any(|i| i.opcode == Opcode(disasm::CALLVALUE))
}

fn is_solc_prelude(cfg: &ControlFlowGraph) -> bool {
    let Some(first) = cfg.blocks.first() else {
        return false;
    };
    let ops: Vec<&Instruction> = first.instrs.iter().take(3).collect();
    matches!(
        ops.as_slice(),
        [a, b, c] if a.opcode.is_push() && a.push_value() == Some(U256::from(0x80))
            && b.opcode.is_push() && b.push_value() == Some(U256::from(0x40))
            && c.opcode == Opcode(disasm::MSTORE)
    )
}

fn reachable_from(cfg: &ControlFlowGraph, entry: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([entry]);
    let mut queue = VecDeque::from([entry]);
    while let Some(b) = queue.pop_front() {
        for e in cfg.successors(b) {
            if seen.insert(e.to) {
                queue.push_back(e.to);
            }
        }
    }
    seen
}

/// Recognizes the solc selector dispatcher and returns one candidate per
/// dispatched selector plus a selector-less candidate for the miss path.
pub fn detect_dispatcher(cfg: &ControlFlowGraph) -> Result<Vec<FunctionCandidate>, CfgError> {
    analyze_dispatch(cfg).map(|d| d.candidates)
}

pub fn analyze_dispatch(cfg: &ControlFlowGraph) -> Result<Dispatch, CfgError> {
    if cfg.blocks.is_empty() {
        return Err(CfgError::NoDispatcherFound);
    }
    let mut found: Vec<Found> = Vec::new();
    let mut short_calldata_target: Option<(usize, usize)> = None;
    let mut miss_block: Option<(usize, usize)> = None;
    let mut region = BTreeSet::new();
    let mut prelude_guard = false;
    let mut visited = BTreeSet::new();
    // (block, entry stack, selector already extracted on this path)
    let mut queue = VecDeque::from([(0usize, TagStack::default(), false)]);

    while let Some((id, entry, extracted)) = queue.pop_front() {
        if !visited.insert(id) {
            continue;
        }
        let block = &cfg.blocks[id];
        let mut stack = entry;
        let mut uses_selector = false;
        let body_len = match block.terminator {
            Terminator::Jump | Terminator::JumpI => block.instrs.len() - 1,
            _ => block.instrs.len(),
        };
        for ins in &block.instrs[..body_len] {
            step(&mut stack, ins, &mut uses_selector);
        }
        let extracted_here = extracted || stack.0.contains(&Tag::Selector);
        if extracted && !uses_selector {
            // First block after the comparisons that no longer looks at the
            // selector: the dispatch-miss path.
            if miss_block.is_none() {
                miss_block = Some((id, block.start_offset));
            }
            continue;
        }
        region.insert(id);
        if !extracted_here && has_callvalue_guard(block) {
            prelude_guard = true;
        }
        let cond = (block.terminator == Terminator::JumpI).then(|| stack.peek(1));
        let mut passed = stack.clone();
        if matches!(block.terminator, Terminator::Jump | Terminator::JumpI) {
            passed.pop();
        }
        if block.terminator == Terminator::JumpI {
            passed.pop();
        }
        for edge in cfg.successors(id) {
            match (cond, edge.kind) {
                (Some(Tag::SelectorIs(sel)), EdgeKind::Taken) => found.push(Found {
                    selector: Some(Selector(sel.to_be_bytes())),
                    entry: edge.to,
                    discovered_at: block.start_offset,
                }),
                (Some(Tag::ShortCalldata), EdgeKind::Taken) => {
                    short_calldata_target.get_or_insert((edge.to, block.start_offset));
                }
                _ => queue.push_back((edge.to, passed.clone(), extracted_here)),
            }
        }
    }

    if found.is_empty() {
        if is_solc_prelude(cfg) {
            let reachable = reachable_from(cfg, 0);
            return Ok(Dispatch {
                candidates: vec![FunctionCandidate {
                    selector: None,
                    entry_block: 0,
                    reachable_blocks: reachable,
                    is_payable_guess: !has_callvalue_guard(&cfg.blocks[0]),
                }],
                region: BTreeSet::new(),
            });
        }
        return Err(CfgError::NoDispatcherFound);
    }

    if let Some((entry, at)) = short_calldata_target.or(miss_block) {
        found.push(Found {
            selector: None,
            entry,
            discovered_at: at,
        });
    }

    // One candidate per entry block and per selector; the match closest to
    // offset 0 wins.
    found.sort_by_key(|f| f.discovered_at);
    let mut seen_entries = BTreeSet::new();
    let mut seen_selectors = BTreeSet::new();
    let mut kept = Vec::new();
    for f in found {
        if !seen_entries.insert(f.entry) {
            log::warn!(
                "dropping candidate {:?}: entry block {} already claimed",
                f.selector.map(|s| s.to_string()),
                f.entry
            );
            continue;
        }
        if !seen_selectors.insert(f.selector) {
            log::warn!("duplicate dispatch for selector {:?}", f.selector.map(|s| s.to_string()));
            continue;
        }
        kept.push(f);
    }

    let mut candidates: Vec<FunctionCandidate> = kept
        .into_iter()
        .map(|f| FunctionCandidate {
            selector: f.selector,
            entry_block: f.entry,
            reachable_blocks: reachable_from(cfg, f.entry),
            is_payable_guess: !(prelude_guard || has_callvalue_guard(&cfg.blocks[f.entry])),
        })
        .collect();
    candidates.sort_by_key(|c| (c.selector.is_none(), c.selector));
    Ok(Dispatch { candidates, region })
}
