//! Control-flow recovery: basic blocks, jump resolution by abstract stack
//! interpretation, selector dispatch detection and graph export.

mod absint;
mod blocks;
mod dispatch;
mod export;

pub use absint::{resolve_jumps, AbsKind, AbsStack, AbstractValue, ControlFlowGraph, Edge, EdgeKind, MAX_STACK};
pub use blocks::{build_blocks, BasicBlock, Terminator};
pub use dispatch::{analyze_dispatch, detect_dispatcher, Dispatch, FunctionCandidate};
pub use export::{to_dot, CfgSummary};

pub use crate::keccak::keccak256;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfgError {
    #[error("NoDispatcherFound: no selector dispatch pattern in bytecode")]
    NoDispatcherFound,
}
