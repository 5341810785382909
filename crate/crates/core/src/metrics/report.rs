use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    distributions, length_stats, semantic_similarity, token_frequencies, CdfPoint, Embedder, Fractions, LengthStats,
    MetricsError, PairScore, TokenHistogram, DEFAULT_VOCAB,
};

/// One input row: a reference function and a decompiled candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub reference: String,
    pub candidate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    #[serde(flatten)]
    pub score: PairScore,
}

/// Published figures for a fine-tuned model on a large private corpus.
/// Carried in the report for comparison only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoints {
    pub edit_lt_04: f64,
    pub sim_gt_08: f64,
    pub correlation: f64,
    pub median_len_diff: i64,
    pub note: String,
}

impl Default for ReferencePoints {
    fn default() -> Self {
        ReferencePoints {
            edit_lt_04: 0.825,
            sim_gt_08: 0.783,
            correlation: -0.72,
            median_len_diff: 5,
            note: "published results for a different model and corpus; not expected to match".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pairs: usize,
    pub per_pair: Vec<ScoredPair>,
    pub mean_edit_distance: f64,
    pub mean_semantic_similarity: f64,
    pub edit_cdf: Vec<CdfPoint>,
    pub sim_cdf: Vec<CdfPoint>,
    /// Pearson r between edit distance and similarity; null when either
    /// has zero variance.
    pub correlation: Option<f64>,
    /// `std` is the population standard deviation.
    pub length_stats: LengthStats,
    pub fractions: Fractions,
    pub token_freq_ref: TokenHistogram,
    pub token_freq_out: TokenHistogram,
    pub similarity_scorer: String,
    pub reference_points: ReferencePoints,
}

/// Scores every pair, in input order.
pub fn score_pairs(pairs: &[EvalPair], embedder: Option<&dyn Embedder>) -> Result<Vec<ScoredPair>, MetricsError> {
    pairs
        .par_iter()
        .map(|p| {
            let sim = semantic_similarity(&p.reference, &p.candidate, embedder)
                .map_err(|message| MetricsError::EmbedderFailure { pair: p.id.clone(), message })?;
            Ok(ScoredPair { id: p.id.clone(), score: PairScore::new(&p.reference, &p.candidate, sim) })
        })
        .collect()
}

/// Computes the full report without touching the filesystem.
pub fn report(pairs: &[EvalPair], embedder: Option<&dyn Embedder>) -> Result<MetricsReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let per_pair = score_pairs(pairs, embedder)?;
    let scores: Vec<PairScore> = per_pair.iter().map(|s| s.score.clone()).collect();
    let dist = distributions(&scores)?;
    let diffs: Vec<i64> = scores.iter().map(|s| s.len_diff).collect();
    let n = scores.len() as f64;
    let refs: Vec<&str> = pairs.iter().map(|p| p.reference.as_str()).collect();
    let outs: Vec<&str> = pairs.iter().map(|p| p.candidate.as_str()).collect();
    Ok(MetricsReport {
        pairs: pairs.len(),
        mean_edit_distance: scores.iter().map(|s| s.edit_distance).sum::<f64>() / n,
        mean_semantic_similarity: scores.iter().map(|s| s.semantic_similarity).sum::<f64>() / n,
        edit_cdf: dist.edit_cdf,
        sim_cdf: dist.sim_cdf,
        correlation: dist.correlation,
        length_stats: length_stats(&diffs)?,
        fractions: dist.fractions,
        token_freq_ref: token_frequencies(&refs, &DEFAULT_VOCAB),
        token_freq_out: token_frequencies(&outs, &DEFAULT_VOCAB),
        similarity_scorer: if embedder.is_some() { "embedding_cosine" } else { "token_ngram_cosine" }.into(),
        reference_points: ReferencePoints::default(),
        per_pair,
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> MetricsError {
    MetricsError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), MetricsError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn cdf_csv(points: &[CdfPoint]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "fraction"])?;
    for p in points {
        w.write_record([p.value.to_string(), p.fraction.to_string()])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn token_csv(r: &MetricsReport) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["token", "count_ref", "count_out", "rel_ref", "rel_out"])?;
    for (tok, &c_ref) in &r.token_freq_ref.counts {
        let c_out = r.token_freq_out.counts.get(tok).copied().unwrap_or(0);
        w.write_record([
            tok.clone(),
            c_ref.to_string(),
            c_out.to_string(),
            r.token_freq_ref.relative(tok).to_string(),
            r.token_freq_out.relative(tok).to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// `report.json`, `edit_cdf.csv`, `sim_cdf.csv` and `token_freq.csv` under
/// `out`, which is created if missing.
pub fn write_report(r: &MetricsReport, out: &Path) -> Result<(), MetricsError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut json = serde_json::to_vec_pretty(r).map_err(|e| io_err(out, e))?;
    json.push(b'\n');
    let files = [
        ("report.json", json),
        ("edit_cdf.csv", cdf_csv(&r.edit_cdf).map_err(|e| io_err(out, e))?),
        ("sim_cdf.csv", cdf_csv(&r.sim_cdf).map_err(|e| io_err(out, e))?),
        ("token_freq.csv", token_csv(r).map_err(|e| io_err(out, e))?),
    ];
    for (name, bytes) in files {
        write_atomic(&out.join(name), &bytes)?;
    }
    Ok(())
}
