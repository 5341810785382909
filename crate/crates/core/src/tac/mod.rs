//! Three-address code: lifting from stack code, canonical normalization,
//! the text format and interpreters used to check the lifter.

pub mod eval;
mod ir;
mod lift;
pub mod machine;
mod normalize;
pub mod reference;
mod text;

pub use eval::{eval_function, eval_straight_line, Env, Outcome};
pub use ir::{format_const, Operand, TacBlock, TacFunction, TacInstruction, TacOp, Visibility};
pub use lift::{block_label, lift, lift_straight_line, param_name, StraightLine};
pub use machine::{Halt, Machine};
pub use normalize::{is_param_name, normalize};
pub use text::{parse, render, render_instruction, SyntaxError};
pub(crate) use text::{infix_symbol, is_shift};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LiftError {
    #[error("block {block} reached with stack depths {} and {}", depths.0, depths.1)]
    InconsistentStackDepth { block: usize, depths: (isize, isize) },
    #[error("block {block} reads below the 1024-slot stack limit")]
    StackTooDeep { block: usize },
    #[error("function entry block {block} is also a jump target inside the function")]
    EntryHasPredecessors { block: usize },
    #[error("no block {0}")]
    UnknownBlock(usize),
}

/// Lift followed by normalization.
pub fn lift_normalized(
    cfg: &crate::cfg::ControlFlowGraph,
    candidate: &crate::cfg::FunctionCandidate,
) -> Result<TacFunction, LiftError> {
    lift(cfg, candidate).map(|f| normalize(&f))
}
