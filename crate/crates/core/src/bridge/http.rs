//! `POST /v1/decompile` client.

use std::io;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendConfig, BridgeError, Prompt, END_TOKEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub solidity: String,
    pub model_id: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Set by servers that cut the prompt to fit their context.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
}

#[derive(Deserialize)]
struct WireError {
    error: String,
}

enum Attempt {
    Retry(BridgeError),
    Fail(BridgeError),
}

pub(super) fn send(agent: &ureq::Agent, cfg: &BackendConfig, prompt: &Prompt) -> Result<WireResponse, BridgeError> {
    let url = format!("{}/v1/decompile", cfg.endpoint.trim_end_matches('/'));
    let body = WireRequest {
        prompt: prompt.text.clone(),
        max_new_tokens: cfg.max_new_tokens,
        temperature: cfg.temperature,
        stop: vec![END_TOKEN.to_string()],
    };
    let mut delay = Duration::from_millis(cfg.backoff_ms);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let err = match once(agent, cfg, &url, &body) {
            Ok(resp) => return Ok(resp),
            Err(Attempt::Fail(e)) => return Err(e),
            Err(Attempt::Retry(e)) => e,
        };
        if attempt > cfg.retries {
            return Err(match err {
                BridgeError::BackendUnreachable { endpoint, reason, .. } => BridgeError::BackendUnreachable {
                    endpoint,
                    attempts: attempt,
                    reason,
                },
                other => other,
            });
        }
        log::warn!("{url}: {err}; retrying in {delay:?}");
        thread::sleep(delay);
        delay *= 2;
    }
}

fn once(agent: &ureq::Agent, cfg: &BackendConfig, url: &str, body: &WireRequest) -> Result<WireResponse, Attempt> {
    let unreachable = |reason: String| {
        Attempt::Retry(BridgeError::BackendUnreachable {
            endpoint: cfg.endpoint.clone(),
            attempts: 1,
            reason,
        })
    };
    let timeout = || {
        Attempt::Retry(BridgeError::Timeout {
            endpoint: cfg.endpoint.clone(),
            seconds: cfg.timeout,
        })
    };
    match agent.post(url).send_json(body) {
        Ok(resp) => {
            let text = resp.into_string().map_err(|e| if is_timeout(&e) { timeout() } else { unreachable(e.to_string()) })?;
            serde_json::from_str(&text)
                .map_err(|e| Attempt::Fail(BridgeError::BackendMalformedResponse(format!("{e}: {}", snippet(&text)))))
        }
        Err(ureq::Error::Status(503, _)) => Err(unreachable("model loading (503)".into())),
        Err(ureq::Error::Status(status, resp)) => {
            let text = resp.into_string().unwrap_or_default();
            let message = serde_json::from_str::<WireError>(&text).map_or_else(|_| snippet(&text), |e| e.error);
            Err(Attempt::Fail(BridgeError::BackendRejected { status, message }))
        }
        Err(ureq::Error::Transport(t)) => {
            let io_timeout = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<io::Error>())
                .is_some_and(is_timeout);
            if io_timeout {
                Err(timeout())
            } else {
                Err(unreachable(t.to_string()))
            }
        }
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock)
}

fn snippet(text: &str) -> String {
    text.chars().take(120).collect()
}
