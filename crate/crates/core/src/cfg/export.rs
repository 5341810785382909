use std::fmt::Write;

use serde::Serialize;

use super::{ControlFlowGraph, Edge, FunctionCandidate, Terminator};

#[derive(Debug, Clone, Serialize)]
pub struct BlockSummary {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    pub terminator: Terminator,
}

/// JSON summary written next to the DOT file.
#[derive(Debug, Clone, Serialize)]
pub struct CfgSummary {
    pub blocks: Vec<BlockSummary>,
    pub edges: Vec<Edge>,
    pub unresolved: Vec<usize>,
    pub selectors: Vec<String>,
}

impl CfgSummary {
    pub fn new(cfg: &ControlFlowGraph, candidates: &[FunctionCandidate]) -> Self {
        Self {
            blocks: cfg
                .blocks
                .iter()
                .map(|b| BlockSummary {
                    id: b.id,
                    start: b.start_offset,
                    end: b.end_offset,
                    terminator: b.terminator,
                })
                .collect(),
            edges: cfg.edges.clone(),
            unresolved: cfg.unresolved.clone(),
            selectors: candidates
                .iter()
                .filter_map(|c| c.selector.map(|s| s.to_string()))
                .collect(),
        }
    }
}

pub fn to_dot(cfg: &ControlFlowGraph) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=box, fontname=monospace];\n");
    for b in &cfg.blocks {
        let style = if cfg.unresolved.contains(&b.id) {
            ", color=red"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  b{} [label=\"{:04x}-{:04x} {:?}\"{style}];",
            b.id, b.start_offset, b.end_offset, b.terminator
        );
    }
    for e in &cfg.edges {
        let _ = writeln!(out, "  b{} -> b{} [label=\"{:?}\"];", e.from, e.to, e.kind);
    }
    out.push_str("}\n");
    out
}
