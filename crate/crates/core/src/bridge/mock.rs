//! Rule-based stand-in for a model: prints each TAC instruction as a
//! Solidity-like statement inside a skeleton built from the prompt header.

use std::fmt::Write;

use super::Prompt;
use crate::tac::{infix_symbol, is_shift, parse, Operand, TacInstruction, TacOp};

const INDENT: &str = "    ";

pub fn mock_backend(prompt: &Prompt) -> String {
    let ctx = &prompt.context;
    let header = match (&ctx.signature, ctx.selector) {
        (Some(sig), _) => {
            let (name, params) = split_signature(sig);
            let vis = ctx.visibility.map_or("public", |v| v.as_str());
            format!("function {name}({}) {vis}", params.join(", "))
        }
        (None, Some(sel)) => {
            let vis = ctx.visibility.map_or("public", |v| v.as_str());
            format!("function f_{sel}() {vis}")
        }
        (None, None) => "fallback() external".to_string(),
    };
    let mut body = Vec::new();
    match parse(prompt.tac_section()) {
        Ok(f) => {
            for b in &f.blocks {
                if f.blocks.len() > 1 {
                    body.push(format!("// {}:", b.label));
                }
                body.extend(b.instrs.iter().map(statement));
            }
        }
        Err(e) => body.push(format!("// unreadable TAC: {e}")),
    }
    if body.is_empty() {
        return format!("{header} {{ }}\n");
    }
    let mut out = format!("{header} {{\n");
    for line in body {
        let _ = writeln!(out, "{INDENT}{line}");
    }
    out.push_str("}\n");
    out
}

/// `name(t1,t2)` into the name and `t1 arg0`-style parameters.
fn split_signature(sig: &str) -> (&str, Vec<String>) {
    let Some((name, rest)) = sig.split_once('(') else {
        return (sig, Vec::new());
    };
    let inner = rest.strip_suffix(')').unwrap_or(rest);
    let mut types = Vec::new();
    let (mut depth, mut start) = (0usize, 0usize);
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                types.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !inner.is_empty() {
        types.push(&inner[start..]);
    }
    let params = types
        .iter()
        .enumerate()
        .map(|(i, ty)| {
            let by_ref = ty.ends_with(']') || ty.starts_with('(') || *ty == "bytes" || *ty == "string";
            format!("{ty}{} arg{i}", if by_ref { " memory" } else { "" })
        })
        .collect();
    (name, params)
}

fn join(args: &[Operand]) -> String {
    args.iter().map(Operand::to_string).collect::<Vec<_>>().join(", ")
}

fn expr(ins: &TacInstruction) -> String {
    let a = &ins.args;
    match ins.op {
        TacOp::Copy => join(a),
        TacOp::Phi => {
            let values: Vec<String> = ins.phi_pairs().map(|(_, v)| v.to_string()).collect();
            format!("phi({})", values.join(", "))
        }
        TacOp::Evm(op) => {
            if let (Some(sym), 2) = (infix_symbol(op), a.len()) {
                return if is_shift(op) {
                    format!("{} {sym} {}", a[1], a[0])
                } else {
                    format!("{} {sym} {}", a[0], a[1])
                };
            }
            let name = ins.op.mnemonic();
            match (name.as_str(), a.as_slice()) {
                ("iszero", [x]) => format!("{x} == 0"),
                ("not", [x]) => format!("~{x}"),
                ("sload", [k]) => format!("storage[{k}]"),
                ("mload", [p]) => format!("memory[{p}]"),
                ("caller", []) => "msg.sender".into(),
                ("callvalue", []) => "msg.value".into(),
                ("calldatasize", []) => "msg.data.length".into(),
                ("origin", []) => "tx.origin".into(),
                ("timestamp", []) => "block.timestamp".into(),
                ("number", []) => "block.number".into(),
                ("chainid", []) => "block.chainid".into(),
                ("address", []) => "address(this)".into(),
                ("selfbalance", []) => "address(this).balance".into(),
                ("gas", []) => "gasleft()".into(),
                _ => format!("{name}({})", join(a)),
            }
        }
        _ => String::new(),
    }
}

fn statement(ins: &TacInstruction) -> String {
    if let Some(d) = &ins.dest {
        return format!("uint256 {d} = {};", expr(ins));
    }
    let a = &ins.args;
    match ins.op {
        TacOp::Jump => format!("// goto {}", join(a)),
        TacOp::CJump => format!("if ({} != 0) {{ /* goto {} */ }}", a[0], join(&a[1..])),
        TacOp::IJump => format!("// goto {}", join(a)),
        TacOp::ICJump => format!("if ({} != 0) {{ /* goto {} */ }}", a[0], join(&a[1..])),
        TacOp::Truncated => "// truncated".into(),
        _ => match ins.op.mnemonic().as_str() {
            "stop" => "return;".into(),
            "invalid" => "assert(false);".into(),
            name => format!("{name}({});", join(a)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signature_params() {
        let (name, params) = split_signature("f(address,uint256[],(uint8,bytes),string)");
        assert_eq!(name, "f");
        assert_eq!(
            params,
            ["address arg0", "uint256[] memory arg1", "(uint8,bytes) memory arg2", "string memory arg3"]
        );
        assert_eq!(split_signature("g()").1.len(), 0);
    }
}
