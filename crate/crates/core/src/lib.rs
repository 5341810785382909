//! Lifts EVM bytecode to normalized three-address code, bridges it to a
//! neural code-generation backend and scores decompilation quality.

pub mod bridge;
pub mod cfg;
pub mod dataset;
pub mod disasm;
pub mod keccak;
pub mod metrics;
pub mod pipeline;
pub mod semantics;
pub mod solidity;
pub mod tac;
