//! Decompilation quality metrics: edit distance, similarity, length
//! statistics, distributions, token frequencies and entropy.

mod embed;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::disasm;
use crate::solidity::token_texts;
use crate::tac::{self, Operand};

pub use embed::{Embedder, HttpEmbedder};
pub use report::{report, score_pairs, write_report, EvalPair, MetricsReport, ReferencePoints, ScoredPair};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("EmptyInput: no pairs to score")]
    EmptyInput,
    #[error("EmptyCorpus: no units to measure")]
    EmptyCorpus,
    #[error("EmbedderFailure on pair {pair}: {message}")]
    EmbedderFailure { pair: String, message: String },
    #[error("cannot read {unit} input {index}: {message}")]
    BadUnitInput { unit: Unit, index: usize, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Levenshtein distance over Unicode scalar values divided by the longer
/// length; 0 for two empty strings.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / longest as f64
}

/// Unigram and bigram counts of lexed code tokens, keyed so the two kinds
/// never collide.
fn ngram_vector(text: &str) -> BTreeMap<(u8, String), f64> {
    let toks = token_texts(text);
    let mut v = BTreeMap::new();
    for t in &toks {
        *v.entry((1, t.to_string())).or_insert(0.0) += 1.0;
    }
    for w in toks.windows(2) {
        *v.entry((2, format!("{} {}", w[0], w[1]))).or_insert(0.0) += 1.0;
    }
    v
}

/// Cosine over combined unigram+bigram token counts, in [0, 1]. Two texts
/// with identical token streams score 1, including two empty ones.
pub fn ngram_similarity(a: &str, b: &str) -> f64 {
    let (va, vb) = (ngram_vector(a), ngram_vector(b));
    if va.is_empty() || vb.is_empty() {
        return if va.is_empty() && vb.is_empty() { 1.0 } else { 0.0 };
    }
    if va == vb {
        return 1.0;
    }
    let dot: f64 = va.iter().filter_map(|(k, x)| vb.get(k).map(|y| x * y)).sum();
    let norm = |v: &BTreeMap<(u8, String), f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (norm(&va) * norm(&vb))).clamp(0.0, 1.0)
}

/// Cosine of two embedding vectors clamped to [0, 1].
pub fn vector_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Similarity with an embedder when given, else [`ngram_similarity`].
pub fn semantic_similarity(a: &str, b: &str, embedder: Option<&dyn Embedder>) -> Result<f64, String> {
    match embedder {
        None => Ok(ngram_similarity(a, b)),
        Some(e) => {
            let v = e.embed(&[a, b])?;
            match v.as_slice() {
                [x, y] if x.len() == y.len() => Ok(vector_similarity(x, y)),
                _ => Err(format!("embedder returned {} vectors of mismatched size", v.len())),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub edit_distance: f64,
    pub semantic_similarity: f64,
    pub len_ref: usize,
    pub len_out: usize,
    /// `len_out - len_ref`
    pub len_diff: i64,
}

impl PairScore {
    pub fn new(reference: &str, candidate: &str, similarity: f64) -> Self {
        let len_ref = reference.chars().count();
        let len_out = candidate.chars().count();
        PairScore {
            edit_distance: normalized_edit_distance(reference, candidate),
            semantic_similarity: similarity,
            len_ref,
            len_out,
            len_diff: len_out as i64 - len_ref as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    /// Lower middle for an even count.
    pub median: i64,
    /// Population standard deviation.
    pub std: f64,
    pub frac_within_50: f64,
    pub min: i64,
    pub max: i64,
}

pub fn length_stats(diffs: &[i64]) -> Result<LengthStats, MetricsError> {
    if diffs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sorted = diffs.to_vec();
    sorted.sort_unstable();
    let n = diffs.len() as f64;
    let mean = diffs.iter().map(|&d| d as f64).sum::<f64>() / n;
    let var = diffs.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(LengthStats {
        median: sorted[(sorted.len() - 1) / 2],
        std: var.sqrt(),
        frac_within_50: diffs.iter().filter(|d| d.abs() <= 50).count() as f64 / n,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    /// Fraction of samples `<= value`.
    pub fraction: f64,
}

/// Empirical CDF at each distinct sample value, ascending.
pub fn cdf(values: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.value == v => last.fraction = fraction,
            _ => out.push(CdfPoint { value: v, fraction }),
        }
    }
    out
}

/// Pearson correlation; `None` when either side has zero variance or
/// there are fewer than two samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub edit_lt_04: f64,
    pub sim_gt_07: f64,
    pub sim_gt_08: f64,
    pub sim_gt_09: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    pub edit_cdf: Vec<CdfPoint>,
    pub sim_cdf: Vec<CdfPoint>,
    pub fractions: Fractions,
    pub correlation: Option<f64>,
}

pub fn distributions(scores: &[PairScore]) -> Result<Distributions, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let edit: Vec<f64> = scores.iter().map(|s| s.edit_distance).collect();
    let sim: Vec<f64> = scores.iter().map(|s| s.semantic_similarity).collect();
    let n = scores.len() as f64;
    let frac = |pred: &dyn Fn(&PairScore) -> bool| scores.iter().filter(|s| pred(s)).count() as f64 / n;
    Ok(Distributions {
        edit_cdf: cdf(&edit),
        sim_cdf: cdf(&sim),
        fractions: Fractions {
            edit_lt_04: frac(&|s| s.edit_distance < 0.4),
            sim_gt_07: frac(&|s| s.semantic_similarity > 0.7),
            sim_gt_08: frac(&|s| s.semantic_similarity > 0.8),
            sim_gt_09: frac(&|s| s.semantic_similarity > 0.9),
        },
        correlation: pearson(&edit, &sim),
    })
}

/// Tokens tracked by default in frequency reports.
pub const DEFAULT_VOCAB: [&str; 20] = [
    "require", "msg.sender", "msg.value", "revert", "assert", "emit", "return", "if", "else", "for", "while",
    "mapping", "memory", "storage", "public", "external", "view", "payable", "uint256", "address",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenHistogram {
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
}

impl TokenHistogram {
    /// Share of all tracked tokens; 0 when nothing was counted.
    pub fn relative(&self, token: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(token).copied().unwrap_or(0) as f64 / self.total as f64
    }
}

pub fn token_frequencies<S: AsRef<str>>(corpus: &[S], vocab: &[&str]) -> TokenHistogram {
    let mut counts: BTreeMap<String, usize> = vocab.iter().map(|t| (t.to_string(), 0)).collect();
    for text in corpus {
        for tok in token_texts(text.as_ref()) {
            if let Some(c) = counts.get_mut(tok) {
                *c += 1;
            }
        }
    }
    let total = counts.values().sum();
    TokenHistogram { counts, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    SolidityToken,
    TacInstruction,
    EvmOpcode,
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Unit::SolidityToken => "solidity_token",
            Unit::TacInstruction => "tac_instruction",
            Unit::EvmOpcode => "evm_opcode",
        })
    }
}

impl std::str::FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solidity_token" => Ok(Unit::SolidityToken),
            "tac_instruction" => Ok(Unit::TacInstruction),
            "evm_opcode" => Ok(Unit::EvmOpcode),
            _ => Err(format!("unknown unit {s:?}; expected solidity_token, tac_instruction or evm_opcode")),
        }
    }
}

/// Operation and operand kinds of one TAC instruction, with every
/// constant written `CONST`: `v = add(VAR, CONST)`.
pub fn tac_shape(ins: &tac::TacInstruction) -> String {
    let kinds: Vec<&str> = ins
        .args
        .iter()
        .map(|a| match a {
            Operand::Var(_) => "VAR",
            Operand::Const(_) => "CONST",
            Operand::Label(_) => "LABEL",
        })
        .collect();
    let op = ins.op.mnemonic();
    let dest = if ins.dest.is_some() { "v = " } else { "" };
    format!("{dest}{op}({})", kinds.join(", "))
}

/// Splits one corpus document into units. TAC documents are TAC text;
/// opcode documents are bytecode hex, of which only the executable part
/// is counted.
pub fn units(text: &str, unit: Unit) -> Result<Vec<String>, String> {
    match unit {
        Unit::SolidityToken => Ok(token_texts(text).into_iter().map(String::from).collect()),
        Unit::TacInstruction => {
            let f = tac::parse(text).map_err(|e| e.to_string())?;
            Ok(f.instructions().map(tac_shape).collect())
        }
        Unit::EvmOpcode => {
            let code = disasm::parse_hex(text).map_err(|e| e.to_string())?;
            let end = disasm::strip_metadata(&code).code_end;
            Ok(disasm::disassemble(&code)
                .into_iter()
                .take_while(|i| i.offset < end)
                .map(|i| i.opcode.mnemonic().to_string())
                .collect())
        }
    }
}

/// Shannon entropy in bits of an empirical distribution given by counts.
pub fn entropy_of_counts<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Bits per unit over the whole corpus.
pub fn entropy<S: AsRef<str>>(corpus: &[S], unit: Unit) -> Result<f64, MetricsError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (index, doc) in corpus.iter().enumerate() {
        let us = units(doc.as_ref(), unit).map_err(|message| MetricsError::BadUnitInput { unit, index, message })?;
        for u in us {
            *counts.entry(u).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(entropy_of_counts(counts.into_values()))
}
