//! Prompt construction, sequence-length management and the client side of
//! the decompilation backend protocol.
//!
//! Prompt layout:
//!
//! ```text
//! signature: transfer(address,uint256)
//! visibility: external
//! selector: 0xa9059cbb
//! <|tac|>
//! L0:
//!   ...
//! <|solidity|>
//! ```
//!
//! Header lines whose value is unknown are left out.

mod http;
mod mock;
mod validate;

use std::fmt::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::keccak::Selector;
use crate::tac::{render, render_instruction, TacFunction, TacInstruction, TacOp, Visibility};

pub use http::{WireRequest, WireResponse};
pub use mock::mock_backend;
pub use validate::validate;

pub const TAC_DELIMITER: &str = "<|tac|>";
pub const SOLIDITY_DELIMITER: &str = "<|solidity|>";
pub const END_TOKEN: &str = "<|end|>";
pub const DELIMITERS: [&str; 3] = [TAC_DELIMITER, SOLIDITY_DELIMITER, END_TOKEN];

/// Prompt budget in bridge tokens.
pub const MAX_PROMPT_TOKENS: usize = 20_000;

/// Fine-tuning hyperparameters reported for the reference model. Kept for
/// documentation; nothing here trains a model.
pub mod reference_model {
    pub const BASE_MODEL: &str = "Llama-3.2-3B";
    pub const LORA_RANK: usize = 16;
    pub const MAX_SEQUENCE_TOKENS: usize = super::MAX_PROMPT_TOKENS;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BridgeError {
    #[error("EntryBlockExceedsBudget: entry block {label} needs {tokens} tokens, budget is {budget}")]
    EntryBlockExceedsBudget { label: String, tokens: usize, budget: usize },
    #[error("BackendUnreachable: {endpoint} after {attempts} attempt(s): {reason}")]
    BackendUnreachable { endpoint: String, attempts: u32, reason: String },
    #[error("BackendMalformedResponse: {0}")]
    BackendMalformedResponse(String),
    #[error("backend rejected the request with status {status}: {message}")]
    BackendRejected { status: u16, message: String },
    #[error("Timeout: {endpoint} did not answer within {seconds}s")]
    Timeout { endpoint: String, seconds: f64 },
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
}

/// Whitespace-separated words with every punctuation character split off
/// as its own token. `_` counts as a word character.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut start = None;
        for (i, c) in word.char_indices() {
            if c.is_alphanumeric() || c == '_' {
                start.get_or_insert(i);
            } else {
                if let Some(s) = start.take() {
                    out.push(&word[s..i]);
                }
                out.push(&word[i..i + c.len_utf8()]);
            }
        }
        if let Some(s) = start {
            out.push(&word[s..]);
        }
    }
    out
}

pub fn count_tokens(text: &str) -> usize {
    tokenize(text).len()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub signature: Option<String>,
    pub visibility: Option<Visibility>,
    pub selector: Option<Selector>,
}

impl PromptContext {
    pub fn of(f: &TacFunction) -> Self {
        PromptContext {
            signature: f.signature.clone(),
            visibility: f.visibility,
            selector: f.selector,
        }
    }

    fn header(&self) -> String {
        let mut out = String::new();
        if let Some(sig) = &self.signature {
            let _ = writeln!(out, "signature: {sig}");
        }
        if let Some(v) = self.visibility {
            let _ = writeln!(out, "visibility: {v}");
        }
        if let Some(s) = self.selector {
            let _ = writeln!(out, "selector: 0x{s}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub tac_token_count: usize,
    pub truncated: bool,
    pub context: PromptContext,
}

impl Prompt {
    /// Hex SHA-256 of the prompt text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// The TAC section between the two delimiters.
    pub fn tac_section(&self) -> &str {
        section(&self.text)
    }
}

fn section(text: &str) -> &str {
    let open = format!("{TAC_DELIMITER}\n");
    let start = text.find(&open).map_or(0, |i| i + open.len());
    let end = text[start..].find(SOLIDITY_DELIMITER).map_or(text.len(), |i| start + i);
    &text[start..end]
}

/// Builds a prompt that fits in [`MAX_PROMPT_TOKENS`], truncating the TAC
/// when needed.
pub fn build_prompt(f: &TacFunction, ctx: &PromptContext) -> Result<Prompt, BridgeError> {
    build_prompt_within(f, ctx, MAX_PROMPT_TOKENS)
}

/// As [`build_prompt`] with an explicit budget for the whole prompt text.
pub fn build_prompt_within(f: &TacFunction, ctx: &PromptContext, budget: usize) -> Result<Prompt, BridgeError> {
    let header = ctx.header();
    let fixed = count_tokens(&header) + count_tokens(TAC_DELIMITER) + count_tokens(SOLIDITY_DELIMITER);
    let tac_budget = budget.saturating_sub(fixed);
    let body = truncate(f, tac_budget)?;
    let tac = render(&body);
    let truncated = body.is_truncated() && !f.is_truncated();
    Ok(Prompt {
        text: format!("{header}{TAC_DELIMITER}\n{tac}{SOLIDITY_DELIMITER}\n"),
        tac_token_count: count_tokens(&tac),
        truncated,
        context: ctx.clone(),
    })
}

/// Keeps `f` within `budget` tokens of rendered text by dropping whole
/// blocks from the end and appending a `truncated` line to the last kept
/// block. The entry block is never dropped.
pub fn truncate(f: &TacFunction, budget: usize) -> Result<TacFunction, BridgeError> {
    let costs: Vec<usize> = f
        .blocks
        .iter()
        .map(|b| {
            count_tokens(&b.label) + 1 + b.instrs.iter().map(|i| count_tokens(&render_instruction(i))).sum::<usize>()
        })
        .collect();
    if costs.iter().sum::<usize>() <= budget {
        return Ok(f.clone());
    }
    let sentinel = TacInstruction::new(None, TacOp::Truncated, Vec::new());
    let sentinel_cost = count_tokens(&render_instruction(&sentinel));
    let mut used = sentinel_cost;
    let mut keep = 0;
    for cost in &costs {
        if used + cost > budget {
            break;
        }
        used += cost;
        keep += 1;
    }
    if keep == 0 {
        let label = f.blocks.first().map(|b| b.label.clone()).unwrap_or_default();
        return Err(BridgeError::EntryBlockExceedsBudget {
            label,
            tokens: costs.first().copied().unwrap_or(0) + sentinel_cost,
            budget,
        });
    }
    let mut out = f.clone();
    out.blocks.truncate(keep);
    let last = out.blocks.last_mut().expect("entry kept");
    last.instrs.push(sentinel);
    last.refresh_successors();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Base URL of a backend, or `mock`.
    pub endpoint: String,
    /// Per-request timeout in seconds.
    pub timeout: f64,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "mock".into(),
            timeout: 120.0,
            max_new_tokens: 2048,
            temperature: 0.0,
            retries: 2,
            backoff_ms: 250,
        }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == "mock"
    }

    pub fn check(&self) -> Result<(), BridgeError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(BridgeError::InvalidConfig(format!("timeout must be positive, got {}", self.timeout)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BridgeError::InvalidConfig(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !self.is_mock() && !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(BridgeError::InvalidConfig(format!("endpoint must be an http(s) URL or `mock`, got {:?}", self.endpoint)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompiledFunction {
    pub solidity: String,
    pub syntax_ok: bool,
    pub backend_id: String,
    pub prompt_hash: String,
    pub warnings: Vec<String>,
}

/// Decompiles functions against one backend. Safe to share across threads.
pub struct Bridge {
    config: BackendConfig,
    agent: Option<ureq::Agent>,
}

impl Bridge {
    pub fn new(config: BackendConfig) -> Result<Self, BridgeError> {
        config.check()?;
        let agent = (!config.is_mock()).then(|| {
            ureq::AgentBuilder::new()
                .timeout(Duration::from_secs_f64(config.timeout))
                .build()
        });
        Ok(Bridge { config, agent })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn decompile(&self, f: &TacFunction, ctx: &PromptContext) -> Result<DecompiledFunction, BridgeError> {
        let prompt = build_prompt(f, ctx)?;
        self.complete(&prompt)
    }

    /// Sends a prepared prompt and validates the answer.
    pub fn complete(&self, prompt: &Prompt) -> Result<DecompiledFunction, BridgeError> {
        let mut warnings = Vec::new();
        if prompt.truncated {
            warnings.push(format!("prompt truncated to {} TAC tokens", prompt.tac_token_count));
        }
        let (raw, backend_id) = match &self.agent {
            None => (mock_backend(prompt), "mock".to_string()),
            Some(agent) => {
                let resp = http::send(agent, &self.config, prompt)?;
                if resp.prompt_tokens > MAX_PROMPT_TOKENS as u64 {
                    warnings.push(format!("backend counted {} prompt tokens", resp.prompt_tokens));
                }
                if resp.truncated == Some(true) {
                    warnings.push("backend truncated the prompt".into());
                }
                (resp.solidity, resp.model_id)
            }
        };
        let solidity = postprocess(&raw);
        let problems = validate(&solidity);
        let syntax_ok = problems.is_empty();
        warnings.extend(problems);
        Ok(DecompiledFunction {
            solidity,
            syntax_ok,
            backend_id,
            prompt_hash: prompt.hash(),
            warnings,
        })
    }

    /// One request per candidate signature, best first: validator passes
    /// before failures, then output length closest to the TAC length.
    pub fn decompile_ranked(
        &self,
        f: &TacFunction,
        ctx: &PromptContext,
        signatures: &[String],
    ) -> Result<Vec<(String, DecompiledFunction)>, BridgeError> {
        let tac_len = render(f).len();
        let mut out = Vec::new();
        for sig in signatures {
            let ctx = PromptContext { signature: Some(sig.clone()), ..ctx.clone() };
            out.push((sig.clone(), self.decompile(f, &ctx)?));
        }
        let implausibility = |d: &DecompiledFunction| ((d.solidity.len() as f64 + 1.0) / (tac_len as f64 + 1.0)).ln().abs();
        out.sort_by(|(_, a), (_, b)| {
            b.syntax_ok
                .cmp(&a.syntax_ok)
                .then(implausibility(a).total_cmp(&implausibility(b)))
        });
        Ok(out)
    }
}

/// One-shot convenience over [`Bridge`].
pub fn decompile(f: &TacFunction, ctx: &PromptContext, cfg: &BackendConfig) -> Result<DecompiledFunction, BridgeError> {
    Bridge::new(cfg.clone())?.decompile(f, ctx)
}

/// Cuts the completion at the end token and trims surrounding whitespace.
fn postprocess(raw: &str) -> String {
    let text = raw.split(END_TOKEN).next().unwrap_or_default().trim();
    if text.is_empty() {
        String::new()
    } else {
        format!("{text}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("  v0 = phi(L2: p1_0, 0x1f)\n"), ["v0", "=", "phi", "(", "L2", ":", "p1_0", ",", "0x1f", ")"]);
        assert_eq!(count_tokens("<|tac|>"), 5);
        assert_eq!(count_tokens(""), 0);
    }

    #[test]
    fn postprocess_cuts_at_end_token() {
        assert_eq!(postprocess("\n function f() {}\n<|end|> junk"), "function f() {}\n");
        assert_eq!(postprocess("  "), "");
    }

    #[test]
    fn config_checks() {
        assert!(BackendConfig::default().check().is_ok());
        let bad = BackendConfig { timeout: 0.0, ..BackendConfig::default() };
        assert!(matches!(bad.check(), Err(BridgeError::InvalidConfig(_))));
        let bad = BackendConfig { endpoint: "localhost:80".into(), ..BackendConfig::default() };
        assert!(bad.check().is_err());
    }
}
