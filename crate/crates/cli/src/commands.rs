use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use evmlift_core::bridge::{Bridge, BridgeError, PromptContext};
use evmlift_core::dataset::{self, extract_function_sources, DatasetError, FunctionKind};
use evmlift_core::disasm::{self, Bytecode};
use evmlift_core::keccak::{selector, Selector};
use evmlift_core::metrics::{self, EvalPair, HttpEmbedder, MetricsError, Unit};
use evmlift_core::pipeline::{function_name, Analysis};
use evmlift_core::tac::{self, Visibility};
use evmlift_core::cfg::CfgSummary;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{create_dir, read_input, write_atomic};
use crate::Failure;

fn load_bytecode(input: &Path) -> Result<Bytecode, Failure> {
    let text = read_input(input)?;
    disasm::parse_hex(&text).map_err(|e| Failure::User(format!("{}: {e}", input.display())))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("plain data serializes");
    out.push(b'\n');
    out
}

pub fn disasm(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let code = load_bytecode(input)?;
    let text = disasm::listing(&disasm::disassemble(&code));
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cfg(input: &Path, out: &Path) -> Result<(), Failure> {
    let analysis = Analysis::of(&load_bytecode(input)?);
    if analysis.cfg.fixpoint_capped {
        log::warn!("jump resolution stopped at its iteration bound; some edges may be missing");
    }
    create_dir(out)?;
    let summary = CfgSummary::new(&analysis.cfg, &analysis.candidates());
    write_atomic(&out.join("cfg.dot"), evmlift_core::cfg::to_dot(&analysis.cfg).as_bytes())?;
    write_atomic(&out.join("cfg.json"), &to_json(&summary))
}

fn warn_whole_program(analysis: &Analysis) -> Option<String> {
    analysis.dispatch.as_ref().err().map(|e| {
        let msg = format!("{e}; treating the whole program as one function");
        log::warn!("{msg}");
        msg
    })
}

pub fn lift(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let analysis = Analysis::of(&load_bytecode(input)?);
    warn_whole_program(&analysis);
    let lifted = analysis.lift_all();
    let mut rendered = Vec::new();
    for l in &lifted {
        let name = function_name(&l.candidate);
        match &l.function {
            Ok(f) => rendered.push((name, tac::render(f))),
            Err(e) => log::error!("{name}: {e}"),
        }
    }
    if rendered.is_empty() && !lifted.is_empty() {
        return Err(Failure::Internal("no function could be lifted".into()));
    }
    match out {
        None => {
            for (name, text) in &rendered {
                print!("=== {name}\n{text}");
            }
        }
        Some(dir) => {
            create_dir(dir)?;
            rendered
                .par_iter()
                .try_for_each(|(name, text)| write_atomic(&dir.join(format!("{name}.tac")), text.as_bytes()))?;
        }
    }
    Ok(())
}

/// Signature and visibility by selector, plus the visibility of the
/// selector-less entry, from a Solidity source.
fn source_names(source: &str) -> (BTreeMap<Selector, (String, Option<Visibility>)>, Option<Visibility>) {
    let fns = extract_function_sources(source);
    let mut by_selector = BTreeMap::new();
    for f in &fns {
        if f.kind == FunctionKind::Function && matches!(f.visibility, Some(Visibility::Public | Visibility::External)) {
            by_selector.insert(selector(&f.signature), (f.signature.clone(), f.visibility));
        }
    }
    let special = [FunctionKind::Fallback, FunctionKind::Receive]
        .iter()
        .find_map(|k| fns.iter().find(|f| &f.kind == k))
        .and_then(|f| f.visibility);
    (by_selector, special)
}

#[derive(Debug, Serialize)]
struct FunctionEntry {
    name: String,
    selector: Option<String>,
    signature: Option<String>,
    file: Option<String>,
    syntax_ok: bool,
    truncated: bool,
    backend_id: Option<String>,
    prompt_hash: Option<String>,
    warnings: Vec<String>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct DecompileSummary {
    functions: usize,
    unresolved_jumps: usize,
    validator_warnings: usize,
    whole_program: bool,
    warnings: Vec<String>,
    entries: Vec<FunctionEntry>,
}

fn is_backend_failure(e: &BridgeError) -> bool {
    !matches!(e, BridgeError::EntryBlockExceedsBudget { .. } | BridgeError::InvalidConfig(_))
}

pub fn decompile(input: &Path, out: &Path, source: Option<&Path>, cfg: &RunConfig) -> Result<(), Failure> {
    let analysis = Analysis::of(&load_bytecode(input)?);
    let (names, special_vis) = match source {
        Some(p) => source_names(&read_input(p)?),
        None => (BTreeMap::new(), None),
    };
    let bridge = Bridge::new(cfg.backend.clone()).map_err(|e| Failure::User(e.to_string()))?;
    let mut warnings: Vec<String> = warn_whole_program(&analysis).into_iter().collect();
    create_dir(out)?;

    let lifted = analysis.lift_all();
    let results: Vec<(FunctionEntry, Option<BridgeError>)> = lifted
        .par_iter()
        .map(|l| {
            let name = function_name(&l.candidate);
            let mut entry = FunctionEntry {
                name: name.clone(),
                selector: l.candidate.selector.map(|s| format!("0x{s}")),
                signature: None,
                file: None,
                syntax_ok: false,
                truncated: false,
                backend_id: None,
                prompt_hash: None,
                warnings: Vec::new(),
                error: None,
            };
            let mut f = match &l.function {
                Ok(f) => f.clone(),
                Err(e) => {
                    entry.error = Some(e.to_string());
                    return Ok((entry, None));
                }
            };
            match l.candidate.selector {
                Some(sel) => {
                    if let Some((sig, vis)) = names.get(&sel) {
                        f.signature = Some(sig.clone());
                        f.visibility = *vis;
                    }
                }
                None => f.visibility = special_vis,
            }
            entry.signature = f.signature.clone();
            match bridge.decompile(&f, &PromptContext::of(&f)) {
                Ok(d) => {
                    let file = format!("{name}.sol");
                    write_atomic(&out.join(&file), d.solidity.as_bytes())?;
                    entry.file = Some(file);
                    entry.syntax_ok = d.syntax_ok;
                    entry.truncated = d.warnings.iter().any(|w| w.contains("truncated"));
                    entry.backend_id = Some(d.backend_id);
                    entry.prompt_hash = Some(d.prompt_hash);
                    entry.warnings = d.warnings;
                    for w in &entry.warnings {
                        log::warn!("{name}: {w}");
                    }
                    Ok((entry, None))
                }
                Err(e) => {
                    log::error!("{name}: {e}");
                    entry.error = Some(e.to_string());
                    Ok((entry, is_backend_failure(&e).then_some(e)))
                }
            }
        })
        .collect::<Result<_, Failure>>()?;

    let mut entries = Vec::new();
    let mut backend_failure = None;
    for (entry, err) in results {
        if let Some(e) = err {
            backend_failure.get_or_insert(e);
        }
        entries.push(entry);
    }
    if analysis.cfg.fixpoint_capped {
        warnings.push("jump resolution stopped at its iteration bound".into());
    }
    let summary = DecompileSummary {
        functions: entries.len(),
        unresolved_jumps: analysis.cfg.unresolved.len(),
        validator_warnings: entries.iter().map(|e| e.warnings.len()).sum(),
        whole_program: analysis.dispatch.is_err(),
        warnings,
        entries,
    };
    write_atomic(&out.join("summary.json"), &to_json(&summary))?;
    match backend_failure {
        Some(e) => Err(Failure::Internal(e.to_string())),
        None => Ok(()),
    }
}

fn dataset_err(e: DatasetError) -> Failure {
    Failure::User(e.to_string())
}

fn write_records(path: &Path, records: &[dataset::PairRecord]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut buf = Vec::new();
    dataset::write_jsonl(records, &mut buf).map_err(|e| Failure::Internal(e.to_string()))?;
    write_atomic(path, &buf)
}

pub fn dataset_build(
    input: &Path,
    out: &Path,
    keep_unmatched: bool,
    holdout: Option<(f64, PathBuf, u64)>,
) -> Result<(), Failure> {
    if let Some((f, _, _)) = &holdout {
        if !(0.0..=1.0).contains(f) {
            return Err(Failure::User(format!("holdout fraction must be in [0, 1], got {f}")));
        }
    }
    let (contracts, ingest) = dataset::ingest(input).map_err(dataset_err)?;
    for (name, why) in &ingest.skipped {
        log::warn!("skipped bundle {name}: {why}");
    }
    let mut records: Vec<_> = contracts
        .par_iter()
        .flat_map_iter(|c| dataset::pair_contract(c, keep_unmatched))
        .collect();
    dataset::sort_records(&mut records);
    let (kept, report) = dataset::filter_and_dedup(records);
    println!("bundles: {} loaded, {} skipped", ingest.loaded, ingest.skipped.len());
    println!(
        "records: {} kept of {} (tac_parse_failure {}, empty_solidity {}, too_long {}, duplicate {})",
        report.kept, report.input, report.tac_parse_failure, report.empty_solidity, report.too_long, report.duplicate
    );
    match holdout {
        None => write_records(out, &kept),
        Some((fraction, hold_path, seed)) => {
            let (train, hold) = dataset::split_holdout(&kept, fraction, seed);
            write_records(out, &train)?;
            write_records(&hold_path, &hold)?;
            println!("split: {} train, {} held out (seed {seed})", train.len(), hold.len());
            Ok(())
        }
    }
}

pub fn dataset_stats(input: &Path) -> Result<(), Failure> {
    let text = read_input(input)?;
    let records = dataset::read_jsonl(text.as_bytes()).map_err(|e| Failure::User(format!("{}: {e}", input.display())))?;
    print!("{}", String::from_utf8(to_json(&dataset::stats(&records))).expect("json is utf-8"));
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<EvalPair>, Failure> {
    read_input(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::User(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn eval(pairs: &Path, out: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let pairs = read_pairs(pairs)?;
    let embedder = cfg
        .embedder
        .as_deref()
        .map(|url| HttpEmbedder::new(url, Duration::from_secs_f64(cfg.backend.timeout)));
    let report = metrics::report(&pairs, embedder.as_ref().map(|e| e as &dyn metrics::Embedder)).map_err(|e| match e {
        MetricsError::EmptyInput => Failure::User(format!("{e}")),
        other => Failure::Internal(other.to_string()),
    })?;
    metrics::write_report(&report, out).map_err(|e| Failure::Internal(e.to_string()))?;
    let f = &report.fractions;
    println!(
        "pairs: {}  mean edit distance: {:.4}  mean similarity: {:.4}  edit<0.4: {:.4}  sim>0.8: {:.4}",
        report.pairs, report.mean_edit_distance, report.mean_semantic_similarity, f.edit_lt_04, f.sim_gt_08
    );
    Ok(())
}

fn expand(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::User(format!("cannot read {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Documents of one input file for the given unit.
fn documents(text: &str, unit: Unit) -> Vec<String> {
    match unit {
        Unit::SolidityToken => vec![text.to_string()],
        Unit::EvmOpcode => text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(),
        Unit::TacInstruction => {
            let mut docs = vec![String::new()];
            for line in text.lines() {
                if line.starts_with("=== ") {
                    docs.push(String::new());
                } else {
                    let last = docs.last_mut().expect("non-empty");
                    last.push_str(line);
                    last.push('\n');
                }
            }
            docs.retain(|d| !d.trim().is_empty());
            docs
        }
    }
}

pub fn entropy(unit: Unit, inputs: &[PathBuf]) -> Result<(), Failure> {
    let mut corpus = Vec::new();
    for path in expand(inputs)? {
        corpus.extend(documents(&read_input(&path)?, unit));
    }
    let h = metrics::entropy(&corpus, unit).map_err(|e| Failure::User(e.to_string()))?;
    println!("{h:?}");
    Ok(())
}
