//! Remote JSON chat-completion client.
//!
//! Speaks the common `POST <endpoint>` chat-completion shape: model name,
//! temperature, and a single-user-message list. Credentials come only from
//! the environment variable named in the config, never from the config file.
//! Transient failures (transport errors, 429, 5xx) are retried with
//! exponential backoff, three attempts total. A configurable counter caps
//! in-flight requests across threads.

use serde::Deserialize;
use serde_json::json;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{CompletionRequest, CompletionResponse, Gateway, HealthReport};
use crate::config::LlmConfig;
use crate::error::{Error, Result};

const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE: Duration = Duration::from_millis(250);

pub struct RemoteGateway {
    cfg: LlmConfig,
    client: reqwest::blocking::Client,
    inflight: Mutex<u32>,
    inflight_cv: Condvar,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    #[serde(default)]
    model: Option<String>,
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    content: String,
}

impl RemoteGateway {
    pub fn new(cfg: LlmConfig) -> RemoteGateway {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client construction");
        RemoteGateway {
            cfg,
            client,
            inflight: Mutex::new(0),
            inflight_cv: Condvar::new(),
        }
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.cfg.api_key_env).map_err(|_| Error::Auth(self.cfg.api_key_env.clone()))
    }

    fn acquire_slot(&self) -> SlotGuard<'_> {
        let cap = self.cfg.max_inflight.max(1);
        let mut count = self.inflight.lock().expect("inflight lock");
        while *count >= cap {
            count = self.inflight_cv.wait(count).expect("inflight wait");
        }
        *count += 1;
        SlotGuard { gateway: self }
    }

    fn post_once(&self, key: &str, req: &CompletionRequest) -> Result<(ChatResponse, u16)> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [{"role": "user", "content": req.prompt}],
        });
        let resp = self
            .client
            .post(&self.cfg.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Ok((
                ChatResponse {
                    model: None,
                    choices: Vec::new(),
                },
                status,
            ));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| Error::Backend(format!("malformed completion response: {e}")))?;
        Ok((parsed, status))
    }

    fn complete_with_retries(&self, req: &CompletionRequest) -> Result<CompletionResponse> {
        let key = self.api_key()?;
        let _slot = self.acquire_slot();
        let started = Instant::now();
        let mut last_err = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(BACKOFF_BASE * 2u32.pow(attempt - 1));
            }
            match self.post_once(&key, req) {
                Ok((parsed, status)) if (200..300).contains(&status) => {
                    let choice = parsed
                        .choices
                        .into_iter()
                        .next()
                        .ok_or_else(|| Error::Backend("response carried no choices".to_string()))?;
                    let truncated = choice.finish_reason.as_deref() == Some("length");
                    if truncated {
                        log::warn!("completion truncated by the backend (finish_reason=length)");
                    }
                    return Ok(CompletionResponse {
                        text: choice.message.content,
                        backend_id: format!("remote:{}", self.cfg.model),
                        latency: started.elapsed(),
                        truncated,
                    });
                }
                Ok((_, status)) if status == 429 || status >= 500 => {
                    last_err = format!("http status {status}");
                }
                Ok((_, status)) => {
                    return Err(Error::Backend(format!("http status {status}")));
                }
                Err(Error::Transport(msg)) => last_err = msg,
                Err(other) => return Err(other),
            }
        }
        Err(Error::Transport(format!(
            "gave up after {MAX_ATTEMPTS} attempts: {last_err}"
        )))
    }
}

struct SlotGuard<'a> {
    gateway: &'a RemoteGateway,
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut count = self.gateway.inflight.lock().expect("inflight lock");
        *count -= 1;
        self.gateway.inflight_cv.notify_one();
    }
}

impl Gateway for RemoteGateway {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse> {
        self.complete_with_retries(req)
    }

    fn probe(&self) -> HealthReport {
        let backend_id = format!("remote:{}", self.cfg.model);
        let key = match self.api_key() {
            Ok(k) => k,
            Err(e) => {
                return HealthReport {
                    healthy: false,
                    backend_id,
                    detail: e.to_string(),
                    model: None,
                }
            }
        };
        let ping = CompletionRequest {
            prompt: "ping".to_string(),
            temperature: 0.0,
            max_tokens: 1,
            seed: None,
        };
        match self.post_once(&key, &ping) {
            Ok((parsed, status)) if (200..300).contains(&status) => HealthReport {
                healthy: true,
                backend_id,
                detail: format!("endpoint {} reachable", self.cfg.endpoint),
                model: parsed.model.or_else(|| Some(self.cfg.model.clone())),
            },
            Ok((_, status)) => HealthReport {
                healthy: false,
                backend_id,
                detail: format!("http status {status}"),
                model: None,
            },
            Err(e) => HealthReport {
                healthy: false,
                backend_id,
                detail: e.to_string(),
                model: None,
            },
        }
    }

    fn backend_id(&self) -> &str {
        "remote"
    }
}
