//! Bytecode to normalized per-function TAC, the front half shared by the
//! dataset builder and the decompile command.

use crate::cfg::{self, CfgError, ControlFlowGraph, Dispatch, FunctionCandidate};
use crate::disasm::{self, Bytecode, CodeLayout, Instruction};
use crate::tac::{self, LiftError, TacFunction};

pub struct Analysis {
    pub code: Bytecode,
    pub layout: CodeLayout,
    pub instrs: Vec<Instruction>,
    pub cfg: ControlFlowGraph,
    pub dispatch: Result<Dispatch, CfgError>,
}

impl Analysis {
    pub fn of(code: &Bytecode) -> Self {
        let layout = disasm::strip_metadata(code);
        let instrs = disasm::disassemble(code);
        let cfg = cfg::resolve_jumps(cfg::build_blocks(&instrs, &layout));
        let dispatch = cfg::analyze_dispatch(&cfg);
        Analysis {
            code: code.clone(),
            layout,
            instrs,
            cfg,
            dispatch,
        }
    }

    /// Dispatched functions, or one whole-program candidate when no
    /// dispatcher was found.
    pub fn candidates(&self) -> Vec<FunctionCandidate> {
        match &self.dispatch {
            Ok(d) => d.candidates.clone(),
            Err(CfgError::NoDispatcherFound) => vec![whole_program(&self.cfg)],
        }
    }

    pub fn lift_all(&self) -> Vec<Lifted> {
        self.candidates()
            .into_iter()
            .map(|candidate| {
                let function = tac::lift_normalized(&self.cfg, &candidate);
                Lifted { candidate, function }
            })
            .collect()
    }
}

pub struct Lifted {
    pub candidate: FunctionCandidate,
    pub function: Result<TacFunction, LiftError>,
}

/// Every block, entered at offset 0.
pub fn whole_program(cfg: &ControlFlowGraph) -> FunctionCandidate {
    FunctionCandidate {
        selector: None,
        entry_block: 0,
        reachable_blocks: (0..cfg.blocks.len()).collect(),
        is_payable_guess: true,
    }
}

/// File stem for a candidate: the selector in hex, or `fallback`.
pub fn function_name(candidate: &FunctionCandidate) -> String {
    candidate.selector.map_or_else(|| "fallback".to_string(), |s| s.to_string())
}
