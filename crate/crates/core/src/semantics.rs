//! 256-bit wrap-around semantics of the pure arithmetic, comparison and
//! bitwise opcodes. Operands are given top-of-stack first.

use ruint::aliases::U256;

use crate::disasm::Opcode;

fn is_negative(x: U256) -> bool {
    x.bit(255)
}

fn negate(x: U256) -> U256 {
    (!x).wrapping_add(U256::from(1))
}

fn abs(x: U256) -> U256 {
    if is_negative(x) {
        negate(x)
    } else {
        x
    }
}

fn flag(b: bool) -> U256 {
    if b {
        U256::from(1)
    } else {
        U256::ZERO
    }
}

fn signed_lt(a: U256, b: U256) -> bool {
    match (is_negative(a), is_negative(b)) {
        (true, false) => true,
        (false, true) => false,
        _ => a < b,
    }
}

fn shift_amount(s: U256) -> Option<usize> {
    (s < U256::from(256)).then(|| s.to::<usize>())
}

/// True for opcodes [`eval_pure`] understands.
pub fn is_pure(op: Opcode) -> bool {
    matches!(op.0, 0x01..=0x0b | 0x10..=0x1d)
}

/// Evaluates a pure opcode. Returns `None` for anything outside the subset or
/// when the operand count is wrong.
pub fn eval_pure(op: Opcode, args: &[U256]) -> Option<U256> {
    if !is_pure(op) || args.len() != op.stack_inputs() {
        return None;
    }
    let a = args[0];
    let b = args.get(1).copied().unwrap_or_default();
    let value = match op.0 {
        0x01 => a.wrapping_add(b),
        0x02 => a.wrapping_mul(b),
        0x03 => a.wrapping_sub(b),
        0x04 => a.checked_div(b).unwrap_or_default(),
        0x05 => {
            if b.is_zero() {
                U256::ZERO
            } else {
                let q = abs(a) / abs(b);
                if is_negative(a) != is_negative(b) {
                    negate(q)
                } else {
                    q
                }
            }
        }
        0x06 => a.checked_rem(b).unwrap_or_default(),
        0x07 => {
            if b.is_zero() {
                U256::ZERO
            } else {
                let r = abs(a) % abs(b);
                if is_negative(a) {
                    negate(r)
                } else {
                    r
                }
            }
        }
        0x08 => a.add_mod(b, args[2]),
        0x09 => a.mul_mod(b, args[2]),
        0x0a => a.wrapping_pow(b),
        0x0b => {
            if a >= U256::from(31) {
                b
            } else {
                let bit = a.to::<usize>() * 8 + 7;
                let mask = (U256::from(1) << (bit + 1)).wrapping_sub(U256::from(1));
                if b.bit(bit) {
                    b | !mask
                } else {
                    b & mask
                }
            }
        }
        0x10 => flag(a < b),
        0x11 => flag(a > b),
        0x12 => flag(signed_lt(a, b)),
        0x13 => flag(signed_lt(b, a)),
        0x14 => flag(a == b),
        0x15 => flag(a.is_zero()),
        0x16 => a & b,
        0x17 => a | b,
        0x18 => a ^ b,
        0x19 => !a,
        0x1a => {
            if a >= U256::from(32) {
                U256::ZERO
            } else {
                let i = a.to::<usize>();
                (b >> (8 * (31 - i))) & U256::from(0xff)
            }
        }
        0x1b => shift_amount(a).map_or(U256::ZERO, |s| b << s),
        0x1c => shift_amount(a).map_or(U256::ZERO, |s| b >> s),
        0x1d => match shift_amount(a) {
            Some(s) => b.arithmetic_shr(s),
            None if is_negative(b) => U256::MAX,
            None => U256::ZERO,
        },
        _ => return None,
    };
    Some(value)
}
