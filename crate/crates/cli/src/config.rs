//! Run configuration: flags, then `EVMLIFT_*` environment variables
//! (both handled by clap), then `evmlift.toml`, then defaults.

use std::path::{Path, PathBuf};

use evmlift_core::bridge::BackendConfig;
use serde::Deserialize;

use crate::Failure;

pub const FILE_NAME: &str = "evmlift.toml";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    jobs: Option<usize>,
    log_level: Option<String>,
    embedder: Option<String>,
    #[serde(default)]
    backend: FileBackend,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBackend {
    endpoint: Option<String>,
    timeout: Option<f64>,
    max_new_tokens: Option<u32>,
    temperature: Option<f64>,
    retries: Option<u32>,
    backoff_ms: Option<u64>,
}

/// Backend settings given on the command line or in the environment.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct BackendArgs {
    /// Backend base URL, or `mock` for the built-in deterministic backend
    #[arg(long, env = "EVMLIFT_BACKEND", value_name = "URL|mock")]
    pub backend: Option<String>,
    /// Per-request timeout in seconds
    #[arg(long, env = "EVMLIFT_TIMEOUT", value_name = "SECONDS")]
    pub timeout: Option<f64>,
    /// Completion length limit sent to the backend
    #[arg(long, env = "EVMLIFT_MAX_NEW_TOKENS", value_name = "N")]
    pub max_new_tokens: Option<u32>,
    /// Sampling temperature sent to the backend
    #[arg(long, env = "EVMLIFT_TEMPERATURE", value_name = "T")]
    pub temperature: Option<f64>,
    /// Extra attempts after a failed or overloaded request
    #[arg(long, env = "EVMLIFT_RETRIES", value_name = "N")]
    pub retries: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub jobs: usize,
    pub log_level: log::LevelFilter,
    pub backend: BackendConfig,
    pub embedder: Option<String>,
}

pub struct Overrides<'a> {
    pub config: Option<&'a Path>,
    pub jobs: Option<usize>,
    pub log_level: Option<&'a str>,
    pub backend: &'a BackendArgs,
    pub embedder: Option<&'a str>,
}

fn load_file(explicit: Option<&Path>) -> Result<FileConfig, Failure> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let p = PathBuf::from(FILE_NAME);
            if !p.is_file() {
                return Ok(FileConfig::default());
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::User(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::User(format!("bad config {}: {e}", path.display())))
}

fn parse_level(s: &str) -> Result<log::LevelFilter, Failure> {
    s.parse()
        .map_err(|_| Failure::User(format!("unknown log level {s:?}; expected off, error, warn, info, debug or trace")))
}

impl RunConfig {
    pub fn resolve(o: Overrides<'_>) -> Result<Self, Failure> {
        let file = load_file(o.config)?;
        let d = BackendConfig::default();
        let fb = file.backend;
        let b = o.backend;
        let backend = BackendConfig {
            endpoint: b.backend.clone().or(fb.endpoint).unwrap_or(d.endpoint),
            timeout: b.timeout.or(fb.timeout).unwrap_or(d.timeout),
            max_new_tokens: b.max_new_tokens.or(fb.max_new_tokens).unwrap_or(d.max_new_tokens),
            temperature: b.temperature.or(fb.temperature).unwrap_or(d.temperature),
            retries: b.retries.or(fb.retries).unwrap_or(d.retries),
            backoff_ms: fb.backoff_ms.unwrap_or(d.backoff_ms),
        };
        backend.check().map_err(|e| Failure::User(e.to_string()))?;
        let jobs = o
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(Failure::User("jobs must be at least 1".into()));
        }
        let log_level = match o.log_level.map(str::to_string).or(file.log_level) {
            Some(s) => parse_level(&s)?,
            None => log::LevelFilter::Warn,
        };
        Ok(RunConfig {
            jobs,
            log_level,
            backend,
            embedder: o.embedder.map(str::to_string).or(file.embedder),
        })
    }
}
