#![allow(dead_code)]

pub mod eval;
pub mod gen;
pub mod server;

use std::collections::BTreeMap;
use std::path::PathBuf;

use evmlift_core::cfg::{self, ControlFlowGraph, Dispatch};
use evmlift_core::disasm::{self, Bytecode, CodeLayout};
use serde::Deserialize;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[derive(Debug, Deserialize)]
pub struct Fixture {
    pub address: String,
    pub file: String,
    pub contract: String,
    pub optimizer: bool,
    /// signature -> selector hex, as reported by the compiler
    pub selectors: BTreeMap<String, String>,
}

impl Fixture {
    pub fn bundle_dir(&self) -> PathBuf {
        fixtures_dir().join("bundles").join(&self.address)
    }

    pub fn bytecode(&self) -> Bytecode {
        let text = std::fs::read_to_string(self.bundle_dir().join("runtime.hex")).unwrap();
        disasm::parse_hex(&text).unwrap()
    }

    pub fn source(&self) -> String {
        std::fs::read_to_string(self.bundle_dir().join("source.sol")).unwrap()
    }

    pub fn analyze(&self) -> Analysis {
        Analysis::of(&self.bytecode())
    }
}

pub struct Analysis {
    pub code: Bytecode,
    pub layout: CodeLayout,
    pub cfg: ControlFlowGraph,
    pub dispatch: Option<Dispatch>,
}

impl Analysis {
    pub fn of(code: &Bytecode) -> Self {
        let layout = disasm::strip_metadata(code);
        let instrs = disasm::disassemble(code);
        let cfg = cfg::resolve_jumps(cfg::build_blocks(&instrs, &layout));
        let dispatch = cfg::analyze_dispatch(&cfg).ok();
        Self {
            code: code.clone(),
            layout,
            cfg,
            dispatch,
        }
    }
}

pub fn fixtures() -> Vec<Fixture> {
    let text = std::fs::read_to_string(fixtures_dir().join("ground_truth.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn fixture(file: &str, optimizer: bool) -> Fixture {
    fixtures()
        .into_iter()
        .find(|f| f.file == file && f.optimizer == optimizer)
        .unwrap_or_else(|| panic!("no fixture {file} optimizer={optimizer}"))
}
