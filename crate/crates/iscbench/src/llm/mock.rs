//! Deterministic offline backend driven by a scriptbook.
//!
//! A scriptbook maps (prompt, temperature bucket, draw index) to canned
//! response text. Prompts match an entry either by exact fingerprint (see
//! [`super::prompt_fingerprint`]) or by substring; the first matching entry
//! in file order wins. Within an entry the draw index (the request `seed`)
//! cycles through the response list, so lookups are total: an unmatched
//! prompt falls back to the book's default response, never a failure.
//!
//! Temperature buckets are `greedy` (exactly 0) and `diverse` (anything
//! above 0); `any` matches both.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

use super::{prompt_fingerprint, CompletionRequest, CompletionResponse, Gateway, HealthReport};
use crate::error::{Error, Result};

pub const MOCK_BACKEND_ID: &str = "mock";

/// Scriptbook shipped with the workbench; covers the demo bundles.
const BUILTIN_SCRIPTBOOK: &str = include_str!("../../fixtures/scriptbooks/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemperatureBucket {
    Greedy,
    Diverse,
    Any,
}

impl TemperatureBucket {
    fn matches(&self, temperature: f64) -> bool {
        match self {
            TemperatureBucket::Greedy => temperature == 0.0,
            TemperatureBucket::Diverse => temperature > 0.0,
            TemperatureBucket::Any => true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptbookEntry {
    /// Optional label, for humans reading the book.
    #[serde(default)]
    pub name: Option<String>,
    /// Substring the prompt must contain for this entry to match.
    #[serde(default)]
    pub prompt_contains: Option<String>,
    /// Exact fingerprint the prompt must have for this entry to match.
    #[serde(default)]
    pub prompt_fingerprint: Option<String>,
    pub bucket: TemperatureBucket,
    pub responses: Vec<String>,
}

impl ScriptbookEntry {
    fn matches(&self, prompt: &str, fingerprint: &str, temperature: f64) -> bool {
        if !self.bucket.matches(temperature) {
            return false;
        }
        if let Some(fp) = &self.prompt_fingerprint {
            if fp == fingerprint {
                return true;
            }
        }
        if let Some(sub) = &self.prompt_contains {
            if prompt.contains(sub.as_str()) {
                return true;
            }
        }
        false
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScriptbook {
    pub default_response: String,
    pub entries: Vec<ScriptbookEntry>,
}

impl MockScriptbook {
    pub fn load(path: &Path) -> Result<MockScriptbook> {
        let text = std::fs::read_to_string(path)?;
        let book: MockScriptbook = serde_json::from_str(&text)?;
        book.validate()?;
        Ok(book)
    }

    pub fn builtin_default() -> MockScriptbook {
        let book: MockScriptbook =
            serde_json::from_str(BUILTIN_SCRIPTBOOK).expect("builtin scriptbook parses");
        book.validate().expect("builtin scriptbook is valid");
        book
    }

    fn validate(&self) -> Result<()> {
        for (i, entry) in self.entries.iter().enumerate() {
            if entry.prompt_contains.is_none() && entry.prompt_fingerprint.is_none() {
                return Err(Error::Config(format!(
                    "scriptbook entry {i} has no prompt matcher"
                )));
            }
            if entry.responses.is_empty() {
                return Err(Error::Config(format!(
                    "scriptbook entry {i} has no responses"
                )));
            }
        }
        Ok(())
    }

    /// Total lookup: (prompt, temperature, draw index) to response text.
    pub fn lookup(&self, prompt: &str, temperature: f64, draw: u64) -> &str {
        let fingerprint = prompt_fingerprint(prompt);
        for entry in &self.entries {
            if entry.matches(prompt, &fingerprint, temperature) {
                let idx = (draw as usize) % entry.responses.len();
                return &entry.responses[idx];
            }
        }
        &self.default_response
    }
}

pub struct MockGateway {
    book: MockScriptbook,
}

impl MockGateway {
    pub fn new(book: MockScriptbook) -> MockGateway {
        MockGateway { book }
    }
}

impl Gateway for MockGateway {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse> {
        let draw = req.seed.unwrap_or(0);
        let text = self.book.lookup(&req.prompt, req.temperature, draw);
        Ok(CompletionResponse {
            text: text.to_string(),
            backend_id: MOCK_BACKEND_ID.to_string(),
            latency: Duration::ZERO,
            truncated: false,
        })
    }

    fn probe(&self) -> HealthReport {
        HealthReport {
            healthy: true,
            backend_id: MOCK_BACKEND_ID.to_string(),
            detail: format!("scriptbook with {} entries", self.book.entries.len()),
            model: Some("scriptbook".to_string()),
        }
    }

    fn backend_id(&self) -> &str {
        MOCK_BACKEND_ID
    }
}
