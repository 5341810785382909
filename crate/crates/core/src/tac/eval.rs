//! Direct interpreter for TAC functions.

use std::collections::BTreeMap;

use ruint::aliases::U256;

use super::ir::{Operand, TacFunction, TacInstruction, TacOp};
use super::machine::{Halt, Machine};

/// How a run ended. Shared with the reference stack interpreter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Halted(Halt),
    /// Control left through a jump whose target the analysis could not
    /// resolve; carries the concrete target.
    Exit(U256),
    StepLimit,
    Fault(String),
}

pub type Env = BTreeMap<String, U256>;

fn value(env: &Env, op: &Operand) -> Result<U256, Outcome> {
    match op {
        Operand::Const(c) => Ok(*c),
        Operand::Var(v) => env
            .get(v)
            .copied()
            .ok_or_else(|| Outcome::Fault(format!("read of undefined variable {v}"))),
        Operand::Label(l) => Err(Outcome::Fault(format!("label {l} used as a value"))),
    }
}

/// Executes a value or effect instruction (no control flow, no phi).
pub fn exec(ins: &TacInstruction, env: &mut Env, m: &mut Machine) -> Result<(), Outcome> {
    let args = ins
        .args
        .iter()
        .map(|a| value(env, a))
        .collect::<Result<Vec<_>, _>>()?;
    let result = match ins.op {
        TacOp::Copy => args.first().copied(),
        TacOp::Evm(op) => m.apply(op, &args).map_err(Outcome::Halted)?,
        other => return Err(Outcome::Fault(format!("{} is not a straight-line op", other.mnemonic()))),
    };
    match (&ins.dest, result) {
        (Some(d), Some(v)) => {
            env.insert(d.clone(), v);
            Ok(())
        }
        (None, None) => Ok(()),
        _ => Err(Outcome::Fault("destination does not match operation".into())),
    }
}

/// Runs a straight-line instruction list.
pub fn eval_straight_line(instrs: &[TacInstruction], env: &mut Env, m: &mut Machine) -> Result<(), Outcome> {
    instrs.iter().try_for_each(|ins| exec(ins, env, m))
}

/// Runs `f` from its entry with the given bindings (normally the entry
/// block's `p<entry>_<slot>` parameters).
pub fn eval_function(f: &TacFunction, inputs: &Env, m: &mut Machine, step_limit: usize) -> Outcome {
    let mut env = inputs.clone();
    let mut current = f.entry_label.clone();
    let mut previous: Option<String> = None;
    let mut steps = 0usize;
    loop {
        let Some(block) = f.block(&current) else {
            return Outcome::Fault(format!("jump to missing block {current}"));
        };
        let mut next: Option<String> = None;
        let mut i = 0;
        while i < block.instrs.len() {
            // Consecutive phis read their operands before any is assigned.
            let phis = block.instrs[i..].iter().take_while(|x| x.op == TacOp::Phi).count();
            if phis > 0 {
                let Some(from) = previous.as_deref() else {
                    return Outcome::Fault(format!("phi in {current} reached without a predecessor"));
                };
                let mut assigned = Vec::with_capacity(phis);
                for ins in &block.instrs[i..i + phis] {
                    let Some((_, op)) = ins.phi_pairs().find(|(l, _)| *l == from) else {
                        return Outcome::Fault(format!("phi in {current} has no value for {from}"));
                    };
                    match value(&env, op) {
                        Ok(v) => assigned.push((ins.dest.clone().unwrap_or_default(), v)),
                        Err(o) => return o,
                    }
                }
                env.extend(assigned);
                i += phis;
                steps += phis;
                continue;
            }
            steps += 1;
            if steps > step_limit {
                return Outcome::StepLimit;
            }
            let ins = &block.instrs[i];
            i += 1;
            let label_arg = |n: usize| ins.args.get(n).and_then(Operand::as_label).map(str::to_string);
            match ins.op {
                TacOp::Jump => {
                    next = label_arg(0);
                    break;
                }
                TacOp::CJump => match value(&env, &ins.args[0]) {
                    Ok(c) if !c.is_zero() => {
                        next = label_arg(1);
                        break;
                    }
                    Ok(_) => {}
                    Err(o) => return o,
                },
                TacOp::IJump => {
                    return match value(&env, &ins.args[0]) {
                        Ok(t) => Outcome::Exit(t),
                        Err(o) => o,
                    }
                }
                TacOp::ICJump => {
                    let c = match value(&env, &ins.args[0]) {
                        Ok(c) => c,
                        Err(o) => return o,
                    };
                    if !c.is_zero() {
                        return match value(&env, &ins.args[1]) {
                            Ok(t) => Outcome::Exit(t),
                            Err(o) => o,
                        };
                    }
                }
                TacOp::Truncated => return Outcome::Fault("reached truncated code".into()),
                TacOp::Phi => unreachable!("phis handled above"),
                _ => {
                    if let Err(o) = exec(ins, &mut env, m) {
                        return o;
                    }
                }
            }
        }
        match next {
            Some(label) => {
                previous = Some(std::mem::replace(&mut current, label));
            }
            None => return Outcome::Fault(format!("fell off the end of {current}")),
        }
    }
}
