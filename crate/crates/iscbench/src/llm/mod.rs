//! Pluggable completion backend.
//!
//! Two implementations ship: a deterministic offline mock driven by a
//! scriptbook (the default, used by every test), and a remote JSON
//! chat-completion client. Everything downstream works against the
//! [`Gateway`] trait, so the whole pipeline runs byte-reproducibly offline.

pub mod mock;
pub mod remote;

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::sync::Arc;
use std::time::Duration;

use crate::config::LlmConfig;
use crate::error::{Error, Result};

pub use mock::{MockGateway, MockScriptbook};
pub use remote::RemoteGateway;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Draw selector for the mock backend. Remote backends ignore it.
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, temperature: f64, max_tokens: u32) -> Result<Self> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(Error::Config(format!(
                "temperature {temperature} outside [0, 2]"
            )));
        }
        if max_tokens == 0 {
            return Err(Error::Config("max_tokens must be >= 1".to_string()));
        }
        Ok(CompletionRequest {
            prompt: prompt.into(),
            temperature,
            max_tokens,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
    pub backend_id: String,
    pub latency: Duration,
    /// Set when the backend reported the response was cut off.
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HealthReport {
    pub healthy: bool,
    pub backend_id: String,
    pub detail: String,
    pub model: Option<String>,
}

pub trait Gateway: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse>;

    /// Reachability check. Failures are encoded in the report, never errors.
    fn probe(&self) -> HealthReport;

    fn backend_id(&self) -> &str;
}

pub type SharedGateway = Arc<dyn Gateway>;

/// Build the configured backend.
pub fn gateway_from_config(cfg: &LlmConfig) -> Result<SharedGateway> {
    match cfg.backend.as_str() {
        "mock" => {
            let book = match &cfg.scriptbook {
                Some(path) => MockScriptbook::load(path)?,
                None => MockScriptbook::builtin_default(),
            };
            Ok(Arc::new(MockGateway::new(book)))
        }
        "remote" => Ok(Arc::new(RemoteGateway::new(cfg.clone()))),
        other => Err(Error::Config(format!(
            "llm.backend must be mock or remote, got {other:?}"
        ))),
    }
}

/// Stable fingerprint of a prompt, used for scriptbook matching.
pub fn prompt_fingerprint(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation_enforces_ranges() {
        assert!(CompletionRequest::new("p", -0.1, 10).is_err());
        assert!(CompletionRequest::new("p", 2.1, 10).is_err());
        assert!(CompletionRequest::new("p", 0.0, 0).is_err());
        assert!(CompletionRequest::new("p", 0.8, 1).is_ok());
    }

    #[test]
    fn fingerprints_are_stable_and_distinct() {
        let a = prompt_fingerprint("hello");
        assert_eq!(a, prompt_fingerprint("hello"));
        assert_ne!(a, prompt_fingerprint("hello!"));
        assert_eq!(a.len(), 16);
    }
}
