//! Seeded generators for random programs, TAC functions and machine states.

use std::collections::BTreeMap;

use evmlift_core::tac::{Machine, Operand, TacBlock, TacFunction, TacInstruction, TacOp};
use evmlift_core::disasm::Opcode;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruint::aliases::U256;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A 256-bit word biased towards edge cases.
pub fn word(rng: &mut ChaCha8Rng) -> U256 {
    match rng.gen_range(0..8) {
        0 => U256::from(rng.gen_range(0u64..16)),
        1 => U256::MAX - U256::from(rng.gen_range(0u64..4)),
        2 => U256::from(1) << rng.gen_range(0usize..256),
        3 => U256::from(rng.gen_range(0u64..300)),
        4 => U256::from(1u64) << 255 | U256::from(rng.gen::<u64>()),
        _ => U256::from_be_bytes(rng.gen::<[u8; 32]>()),
    }
}

pub fn address(rng: &mut ChaCha8Rng) -> U256 {
    U256::from_be_bytes(rng.gen::<[u8; 32]>()) >> 96
}

const PURE_OPS: [u8; 25] = [
    0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x10, 0x11, 0x12, 0x13, 0x14, 0x15,
    0x16, 0x17, 0x18, 0x19, 0x1a, 0x1b, 0x1c, 0x1d,
];

/// Random straight-line bytecode of pushes, stack shuffles and pure
/// arithmetic. Reads at most `len * 3` slots below the entry stack.
pub fn straight_line_program(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut code = Vec::new();
    for _ in 0..len {
        match rng.gen_range(0..10) {
            0 | 1 => {
                let n = rng.gen_range(0..=32u8);
                code.push(0x5f + n);
                let bytes = word(rng).to_be_bytes::<32>();
                code.extend_from_slice(&bytes[32 - n as usize..]);
            }
            2 => code.push(0x80 + rng.gen_range(0..16)),
            3 => code.push(0x90 + rng.gen_range(0..16)),
            4 => code.push(0x50),
            _ => code.push(*PURE_OPS.choose(rng).expect("non-empty")),
        }
    }
    code
}

pub fn stack(rng: &mut ChaCha8Rng, depth: usize) -> Vec<U256> {
    (0..depth).map(|_| word(rng)).collect()
}

/// Machine with random storage and environment, and calldata that starts
/// with `selector` followed by words that are often valid ABI values.
pub fn machine(rng: &mut ChaCha8Rng, selector: Option<[u8; 4]>) -> Machine {
    let mut calldata = Vec::new();
    if let Some(sel) = selector {
        calldata.extend_from_slice(&sel);
    }
    for _ in 0..rng.gen_range(0..6) {
        let w = match rng.gen_range(0..4) {
            0 => address(rng),
            1 => U256::from(rng.gen_range(0u64..1000)),
            2 => U256::from(0x20 * rng.gen_range(1u64..4)),
            _ => word(rng),
        };
        calldata.extend_from_slice(&w.to_be_bytes::<32>());
    }
    if rng.gen_bool(0.1) {
        calldata.truncate(rng.gen_range(0..=calldata.len()));
    }
    let mut m = Machine::new(calldata);
    for _ in 0..rng.gen_range(0..6) {
        let key = if rng.gen_bool(0.5) { U256::from(rng.gen_range(0u64..8)) } else { word(rng) };
        m.storage.insert(key, word(rng));
    }
    m.env.insert(0x33, address(rng)); // CALLER
    m.env.insert(0x30, address(rng)); // ADDRESS
    m.env.insert(0x32, address(rng)); // ORIGIN
    m.env.insert(0x34, if rng.gen_bool(0.7) { U256::ZERO } else { U256::from(rng.gen::<u64>()) });
    m.env.insert(0x42, U256::from(rng.gen_range(1_600_000_000u64..1_800_000_000)));
    m.env.insert(0x43, U256::from(rng.gen_range(1u64..20_000_000)));
    m
}

/// Seeds TAC inputs `p<block>_<slot>` from a stack whose top is last.
pub fn inputs_from_stack(block: &str, stack: &[U256]) -> BTreeMap<String, U256> {
    let id = block.trim_start_matches('L');
    stack
        .iter()
        .rev()
        .enumerate()
        .map(|(slot, v)| (format!("p{id}_{slot}"), *v))
        .collect()
}

const VALUE_OPS: [&str; 21] = [
    "iszero", "not", "sload", "mload", "calldataload", "slt", "sgt", "byte", "sar", "signextend", "exp",
    "addmod", "mulmod", "keccak256", "caller", "callvalue", "calldatasize", "gas", "sdiv", "smod", "balance",
];
const INFIX_OPS: [&str; 13] = ["add", "sub", "mul", "div", "mod", "and", "or", "xor", "shl", "shr", "lt", "gt", "eq"];
const EFFECT_OPS: [&str; 5] = ["mstore", "sstore", "mstore8", "log1", "calldatacopy"];

fn op(name: &str) -> TacOp {
    TacOp::Evm(Opcode::from_mnemonic(name).expect("known mnemonic"))
}

/// A random, syntactically well-formed TAC function with dead code, copy
/// chains, phis, unreachable blocks and assorted constants.
pub fn synthetic_function(rng: &mut ChaCha8Rng) -> TacFunction {
    let n_blocks = rng.gen_range(1..=6);
    let mut ids: Vec<usize> = (0..40).collect();
    ids.shuffle(rng);
    let ids = &ids[..n_blocks];
    let labels: Vec<String> = ids.iter().map(|i| format!("L{i}")).collect();
    let mut vars: Vec<String> = (0..rng.gen_range(0..4)).map(|s| format!("p{}_{s}", ids[0])).collect();
    let mut counter = 0usize;
    let mut fresh = |rng: &mut ChaCha8Rng| {
        counter += 1;
        match rng.gen_range(0..3) {
            0 => format!("t{counter}"),
            1 => format!("v{}", 1000 - counter),
            _ => format!("x{counter}"),
        }
    };
    let operand = |rng: &mut ChaCha8Rng, vars: &[String]| {
        if !vars.is_empty() && rng.gen_bool(0.6) {
            Operand::Var(vars.choose(rng).expect("non-empty").clone())
        } else {
            Operand::Const(word(rng))
        }
    };

    let mut blocks = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let mut instrs = Vec::new();
        if i > 0 {
            for slot in 0..rng.gen_range(0..3) {
                let dest = format!("p{}_{slot}", ids[i]);
                let mut args = Vec::new();
                for _ in 0..rng.gen_range(1..=3) {
                    args.push(Operand::Label(labels.choose(rng).expect("labels").clone()));
                    args.push(operand(rng, &vars));
                }
                instrs.push(TacInstruction::new(Some(dest.clone()), TacOp::Phi, args));
                vars.push(dest);
            }
        }
        for _ in 0..rng.gen_range(0..8) {
            let ins = match rng.gen_range(0..5) {
                0 => {
                    let dest = fresh(rng);
                    let ins = TacInstruction::new(Some(dest.clone()), TacOp::Copy, vec![operand(rng, &vars)]);
                    vars.push(dest);
                    ins
                }
                1 | 2 => {
                    let name = if rng.gen_bool(0.5) {
                        INFIX_OPS.choose(rng)
                    } else {
                        VALUE_OPS.choose(rng)
                    }
                    .expect("ops");
                    let o = op(name);
                    let args = match o {
                        TacOp::Evm(code) => (0..code.stack_inputs()).map(|_| operand(rng, &vars)).collect(),
                        _ => unreachable!(),
                    };
                    let dest = fresh(rng);
                    vars.push(dest.clone());
                    TacInstruction::new(Some(dest), o, args)
                }
                3 => {
                    let o = op(EFFECT_OPS.choose(rng).expect("ops"));
                    let TacOp::Evm(code) = o else { unreachable!() };
                    TacInstruction::new(None, o, (0..code.stack_inputs()).map(|_| operand(rng, &vars)).collect())
                }
                _ => {
                    let dest = fresh(rng);
                    vars.push(dest.clone());
                    let args = (0..7).map(|_| operand(rng, &vars)).collect();
                    TacInstruction::new(Some(dest), op("call"), args)
                }
            };
            instrs.push(ins);
        }
        let target = |rng: &mut ChaCha8Rng| Operand::Label(labels.choose(rng).expect("labels").clone());
        match rng.gen_range(0..8) {
            0 | 1 => instrs.push(TacInstruction::new(None, TacOp::Jump, vec![target(rng)])),
            2 | 3 => {
                instrs.push(TacInstruction::new(None, TacOp::CJump, vec![operand(rng, &vars), target(rng)]));
                instrs.push(TacInstruction::new(None, TacOp::Jump, vec![target(rng)]));
            }
            4 => instrs.push(TacInstruction::new(None, TacOp::IJump, vec![operand(rng, &vars)])),
            5 => {
                let args = vec![operand(rng, &vars), operand(rng, &vars)];
                instrs.push(TacInstruction::new(None, op(if rng.gen_bool(0.5) { "return" } else { "revert" }), args));
            }
            6 => instrs.push(TacInstruction::new(None, op("stop"), vec![])),
            _ => {
                instrs.push(TacInstruction::new(None, TacOp::ICJump, vec![operand(rng, &vars), operand(rng, &vars)]));
                instrs.push(TacInstruction::new(None, op("invalid"), vec![]));
            }
        }
        blocks.push(TacBlock::new(label.clone(), instrs));
    }
    TacFunction {
        selector: None,
        signature: None,
        visibility: None,
        entry_label: labels[0].clone(),
        blocks,
    }
}
