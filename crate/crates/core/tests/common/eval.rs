//! The 200-pair evaluation fixture, its frozen brute-force results and a
//! quadratic edit-distance oracle.

use std::collections::BTreeMap;

use evmlift_core::metrics::EvalPair;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::fixtures_dir;

pub fn pairs() -> Vec<EvalPair> {
    std::fs::read_to_string(fixtures_dir().join("eval/pairs.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub pairs: usize,
    pub edit_distance: Vec<f64>,
    pub semantic_similarity: Vec<f64>,
    pub len_diff: Vec<i64>,
    pub median: i64,
    pub std_bits: u64,
    pub frac_within_50: f64,
    pub min: i64,
    pub max: i64,
    pub edit_lt_04: f64,
    pub sim_gt_07: f64,
    pub sim_gt_08: f64,
    pub sim_gt_09: f64,
    pub correlation: Option<f64>,
    pub edit_cdf: Vec<(f64, f64)>,
    pub sim_cdf: Vec<(f64, f64)>,
    pub token_freq_ref: BTreeMap<String, usize>,
    pub token_freq_out: BTreeMap<String, usize>,
}

pub fn expected() -> Expected {
    serde_json::from_str(&std::fs::read_to_string(fixtures_dir().join("eval/expected.json")).unwrap()).unwrap()
}

/// Full-matrix Levenshtein over chars.
pub fn levenshtein_dp(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

const ALPHABET: [char; 8] = ['a', 'b', 'c', ' ', '(', ';', 'é', '中'];

/// Up to 64 chars over a small alphabet so pairs share structure; one in
/// eight pairs is an exact copy.
pub fn string_pair(rng: &mut ChaCha8Rng) -> (String, String) {
    let mut s = || -> String {
        let n = rng.gen_range(0..=64);
        (0..n).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
    };
    let a = s();
    let b = s();
    if rng.gen_ratio(1, 8) {
        (a.clone(), a)
    } else {
        (a, b)
    }
}
