mod common;

use std::time::Instant;

use evmlift_core::disasm::{self, Bytecode, Opcode};
use rand::Rng;

use common::gen;

/// (byte, mnemonic, inputs, outputs) from the frozen reference listing.
fn reference() -> Vec<(u8, String, usize, usize)> {
    std::fs::read_to_string(common::fixtures_dir().join("opcodes/reference.tsv"))
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let byte = u8::from_str_radix(f[0].trim_start_matches("0x"), 16).unwrap();
            (byte, f[1].to_string(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn opcode_table_matches_reference_listing() {
    let want = reference();
    assert_eq!(want.len(), 144);
    for b in 0..=255u8 {
        let op = Opcode(b);
        match want.iter().find(|r| r.0 == b) {
            Some((_, name, ins, outs)) => {
                assert!(op.is_defined(), "{b:#04x}");
                assert_eq!(op.mnemonic(), name, "{b:#04x}");
                assert_eq!((op.stack_inputs(), op.stack_outputs()), (*ins, *outs), "{b:#04x}");
                assert_eq!(Opcode::from_mnemonic(name), Some(op));
            }
            None => {
                assert!(!op.is_defined(), "{b:#04x}");
                assert_eq!(op.mnemonic(), "INVALID", "{b:#04x}");
            }
        }
        let push = if (0x60..=0x7f).contains(&b) { usize::from(b - 0x5f) } else { 0 };
        assert_eq!(op.push_size(), push, "{b:#04x}");
    }
}

fn random_bytes(rng: &mut rand_chacha::ChaCha8Rng) -> Vec<u8> {
    let n = rng.gen_range(1..=600);
    (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => rng.gen_range(0x60..=0x7f),
            _ => rng.gen(),
        })
        .collect()
}

#[test]
fn random_bytes_round_trip() {
    let mut rng = gen::rng(1);
    let start = Instant::now();
    for _ in 0..1000 {
        let bytes = random_bytes(&mut rng);
        let code = Bytecode::from_bytes(bytes.clone()).unwrap();
        let instrs = disasm::disassemble(&code);
        assert_eq!(instrs[0].offset, 0);
        for w in instrs.windows(2) {
            assert_eq!(w[0].next_offset(), w[1].offset);
        }
        assert!(instrs.iter().rev().skip(1).all(|i| !i.is_truncated_push()));
        assert_eq!(disasm::reassemble(&instrs).unwrap().bytes(), &bytes[..]);
        let text = disasm::listing(&instrs);
        assert_eq!(text.lines().count(), instrs.len());
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "{:?}", start.elapsed());
}

#[test]
fn listing_format() {
    let code = disasm::parse_hex("0x6080604052fe5f61ab").unwrap();
    assert_eq!(
        disasm::listing(&disasm::disassemble(&code)),
        "0000: PUSH1 0x80\n0002: PUSH1 0x40\n0004: MSTORE\n0005: INVALID\n0006: PUSH0\n0007: PUSH2 0xab\n"
    );
}
