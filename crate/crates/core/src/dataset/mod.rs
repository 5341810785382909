//! Paired TAC/Solidity records from verified contract bundles.
//!
//! A bundle is a directory named by the contract address holding
//! `source.sol`, `runtime.hex` and `meta.json`
//! (`{"compiler_version": ..., "optimizer": {"enabled": ..., "runs": ...}}`).

mod extract;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bridge::{count_tokens, MAX_PROMPT_TOKENS};
use crate::disasm::{self, Bytecode};
use crate::keccak::Selector;
use crate::pipeline::Analysis;
use crate::tac::{self, Visibility};

pub use extract::{extract_function_sources, FunctionKind, SourceFunction};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("EmptyInput: no valid bundles in {0}")]
    EmptyInput(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub enabled: bool,
    pub runs: u32,
}

#[derive(Debug, Clone)]
pub struct VerifiedContract {
    /// `0x`-prefixed lowercase.
    pub address: String,
    pub source: String,
    pub runtime_bytecode: Bytecode,
    pub compiler_version: String,
    pub optimizer: OptimizerSettings,
}

#[derive(Deserialize)]
struct Meta {
    compiler_version: String,
    optimizer: OptimizerSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub bundles: usize,
    pub loaded: usize,
    /// (bundle directory name, reason)
    pub skipped: Vec<(String, String)>,
}

fn is_address(name: &str) -> bool {
    name.len() == 42 && name.starts_with("0x") && name[2..].bytes().all(|b| b.is_ascii_hexdigit())
}

fn load_bundle(dir: &Path, name: &str) -> Result<VerifiedContract, String> {
    if !is_address(name) {
        return Err("directory name is not a 20-byte hex address".into());
    }
    let read = |file: &str| fs::read_to_string(dir.join(file)).map_err(|e| format!("{file}: {e}"));
    let source = read("source.sol")?;
    let runtime_bytecode = disasm::parse_hex(&read("runtime.hex")?).map_err(|e| format!("runtime.hex: {e}"))?;
    let meta: Meta = serde_json::from_str(&read("meta.json")?).map_err(|e| format!("meta.json: {e}"))?;
    if meta.compiler_version.trim().is_empty() {
        return Err("meta.json: empty compiler_version".into());
    }
    Ok(VerifiedContract {
        address: name.to_ascii_lowercase(),
        source,
        runtime_bytecode,
        compiler_version: meta.compiler_version,
        optimizer: meta.optimizer,
    })
}

/// Loads every bundle under `dir` in name order. Malformed bundles are
/// skipped and listed in the report.
pub fn ingest(dir: &Path) -> Result<(Vec<VerifiedContract>, IngestReport), DatasetError> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut report = IngestReport { bundles: names.len(), ..IngestReport::default() };
    let mut contracts = Vec::new();
    for name in names {
        match load_bundle(&dir.join(&name), &name) {
            Ok(c) => contracts.push(c),
            Err(reason) => {
                log::warn!("skipping bundle {name}: {reason}");
                report.skipped.push((name, reason));
            }
        }
    }
    report.loaded = contracts.len();
    if contracts.is_empty() {
        return Err(DatasetError::EmptyInput(dir.display().to_string()));
    }
    Ok((contracts, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub contract_address: String,
    pub selector: Option<Selector>,
    pub signature: Option<String>,
    pub visibility: Option<Visibility>,
    pub tac: String,
    pub solidity: String,
    pub tac_tokens: usize,
    pub sol_tokens: usize,
    pub compiler_version: String,
}

impl PairRecord {
    fn sort_key(&self) -> (&str, Option<Selector>, Option<&str>, &str) {
        (&self.contract_address, self.selector, self.signature.as_deref(), &self.solidity)
    }
}

fn externally_visible(f: &SourceFunction) -> bool {
    !matches!(f.visibility, Some(Visibility::Internal | Visibility::Private))
}

/// Pairs each dispatched function of one contract with its source.
///
/// Selectors are matched against keccak of the extracted signatures. The
/// selector-less candidate pairs with the contract's only `fallback`, or
/// failing that its only `receive`. With `keep_unmatched`, a candidate
/// with no match is paired with every externally visible source function
/// that matched nothing, signature left empty.
pub fn pair_contract(contract: &VerifiedContract, keep_unmatched: bool) -> Vec<PairRecord> {
    let sources = extract_function_sources(&contract.source);
    let analysis = Analysis::of(&contract.runtime_bytecode);
    if let Err(e) = &analysis.dispatch {
        log::warn!("{}: {e}", contract.address);
    }
    let by_selector: BTreeMap<Selector, &SourceFunction> = sources
        .iter()
        .filter(|f| f.kind == FunctionKind::Function && externally_visible(f))
        .map(|f| (Selector::of_signature(&f.signature), f))
        .collect();
    let special = |kind: FunctionKind| {
        let found: Vec<&SourceFunction> = sources.iter().filter(|f| f.kind == kind).collect();
        (found.len() == 1).then(|| found[0])
    };
    let fallback = special(FunctionKind::Fallback).or_else(|| special(FunctionKind::Receive));

    let record = |sel: Option<Selector>, sig: Option<String>, vis: Option<Visibility>, tac: &str, sol: &str| PairRecord {
        contract_address: contract.address.clone(),
        selector: sel,
        signature: sig,
        visibility: vis,
        tac: tac.to_string(),
        solidity: sol.to_string(),
        tac_tokens: count_tokens(tac),
        sol_tokens: count_tokens(sol),
        compiler_version: contract.compiler_version.clone(),
    };

    let mut matched = BTreeSet::new();
    let mut records = Vec::new();
    let mut unmatched = Vec::new();
    for lifted in analysis.lift_all() {
        let sel = lifted.candidate.selector;
        let f = match lifted.function {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{} {}: {e}", contract.address, crate::pipeline::function_name(&lifted.candidate));
                continue;
            }
        };
        let text = tac::render(&f);
        let source = match sel {
            Some(s) => by_selector.get(&s).copied(),
            None => fallback,
        };
        match (source, sel) {
            (Some(src), Some(_)) => {
                matched.insert(src.signature.clone());
                records.push(record(sel, Some(src.signature.clone()), src.visibility, &text, &src.text));
            }
            (Some(src), None) => records.push(record(None, None, src.visibility, &text, &src.text)),
            (None, Some(_)) => unmatched.push((sel, text)),
            (None, None) => {}
        }
    }
    if keep_unmatched {
        let spare: Vec<&SourceFunction> = sources
            .iter()
            .filter(|f| f.kind == FunctionKind::Function && externally_visible(f) && !matched.contains(&f.signature))
            .collect();
        for (sel, text) in &unmatched {
            for src in &spare {
                records.push(record(*sel, None, src.visibility, text, &src.text));
            }
        }
    }
    records
}

/// Records from every contract, sorted by (address, selector).
pub fn pair(contracts: &[VerifiedContract], keep_unmatched: bool) -> Vec<PairRecord> {
    let mut records: Vec<PairRecord> = contracts.iter().flat_map(|c| pair_contract(c, keep_unmatched)).collect();
    sort_records(&mut records);
    records
}

pub fn sort_records(records: &mut [PairRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub tac_parse_failure: usize,
    pub empty_solidity: usize,
    pub too_long: usize,
    pub duplicate: usize,
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// SHA-256 over whitespace-collapsed TAC and Solidity.
pub fn record_digest(r: &PairRecord) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(collapse(&r.tac));
    h.update([0]);
    h.update(collapse(&r.solidity));
    h.finalize().into()
}

/// Drops records whose TAC does not parse, that have no Solidity, that
/// exceed the token limit on either side, and exact duplicates (first
/// occurrence kept). Order is preserved.
pub fn filter_and_dedup(records: Vec<PairRecord>) -> (Vec<PairRecord>, FilterReport) {
    let mut report = FilterReport { input: records.len(), ..FilterReport::default() };
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    for r in records {
        if tac::parse(&r.tac).is_err() {
            report.tac_parse_failure += 1;
        } else if r.sol_tokens == 0 {
            report.empty_solidity += 1;
        } else if r.tac_tokens > MAX_PROMPT_TOKENS || r.sol_tokens > MAX_PROMPT_TOKENS {
            report.too_long += 1;
        } else if !seen.insert(record_digest(&r)) {
            report.duplicate += 1;
        } else {
            kept.push(r);
        }
    }
    report.kept = kept.len();
    (kept, report)
}

pub fn write_jsonl<W: Write>(records: &[PairRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<PairRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::BadRecord { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| DatasetError::BadRecord { line: i + 1, message: e.to_string() })?;
        out.push(r);
    }
    Ok(out)
}

/// Deterministic split: a seeded shuffle picks `round(n * fraction)`
/// records for the holdout; both halves keep their input order.
pub fn split_holdout(records: &[PairRecord], fraction: f64, seed: u64) -> (Vec<PairRecord>, Vec<PairRecord>) {
    let n = records.len();
    let take = ((n as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: BTreeSet<usize> = idx[..take].iter().copied().collect();
    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if held.contains(&i) {
            holdout.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    (train, holdout)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub min: usize,
    pub median: usize,
    pub max: usize,
    pub mean: f64,
}

impl Summary {
    fn of(mut values: Vec<usize>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_unstable();
        Some(Summary {
            min: values[0],
            median: values[(values.len() - 1) / 2],
            max: values[values.len() - 1],
            mean: values.iter().sum::<usize>() as f64 / values.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub records: usize,
    pub contracts: usize,
    pub with_signature: usize,
    pub without_signature: usize,
    pub by_visibility: BTreeMap<String, usize>,
    pub by_compiler: BTreeMap<String, usize>,
    pub tac_tokens: Option<Summary>,
    pub sol_tokens: Option<Summary>,
}

pub fn stats(records: &[PairRecord]) -> DatasetStats {
    let mut by_visibility = BTreeMap::new();
    let mut by_compiler = BTreeMap::new();
    for r in records {
        let vis = r.visibility.map_or("unknown", |v| v.as_str());
        *by_visibility.entry(vis.to_string()).or_insert(0) += 1;
        *by_compiler.entry(r.compiler_version.clone()).or_insert(0) += 1;
    }
    let with_signature = records.iter().filter(|r| r.signature.is_some()).count();
    DatasetStats {
        records: records.len(),
        contracts: records.iter().map(|r| &r.contract_address).collect::<BTreeSet<_>>().len(),
        with_signature,
        without_signature: records.len() - with_signature,
        by_visibility,
        by_compiler,
        tac_tokens: Summary::of(records.iter().map(|r| r.tac_tokens).collect()),
        sol_tokens: Summary::of(records.iter().map(|r| r.sol_tokens).collect()),
    }
}
