//! Prompt refinement: turn a bundle into K distinct candidate prompts.
//!
//! Candidate 0 is always a greedy draw at temperature 0; the rest are drawn
//! at the configured diversity temperature until K distinct candidates exist
//! or the retry budget runs out. Distinctness is judged on a normalized
//! fingerprint (lowercased, whitespace collapsed), since near-identical
//! summaries add no corpus diversity downstream.

use serde::{Deserialize, Serialize};

use crate::bundle::UserInputBundle;
use crate::error::{Error, Result};
use crate::llm::{CompletionRequest, Gateway};

/// Instruction appended to the concatenated bundle documents.
pub const REFINEMENT_INSTRUCTION: &str = "Please summarize the above information concisely to \
     describe the functionality of the test project, the usage of the fuzz driver, and the \
     details of the vulnerability.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePrompt {
    pub text: String,
    pub draw_index: u32,
    pub temperature: f64,
    pub source_bundle_id: String,
    pub dedup_key: String,
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub diversity_temperature: f64,
    /// Diverse-draw budget is `retry_factor * k`.
    pub retry_factor: u32,
    pub max_tokens: u32,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            diversity_temperature: 0.8,
            retry_factor: 3,
            max_tokens: 1024,
        }
    }
}

/// Concatenate the four documents under labeled headings, in fixed order,
/// ending with the summarization instruction. Empty documents are elided.
pub fn build_refinement_prompt(bundle: &UserInputBundle) -> String {
    let mut out = String::new();
    let mut section = |heading: &str, body: &str| {
        if !body.is_empty() {
            out.push_str("## ");
            out.push_str(heading);
            out.push('\n');
            out.push_str(body);
            if !body.ends_with('\n') {
                out.push('\n');
            }
            out.push('\n');
        }
    };
    section("Project introduction", &bundle.project_intro);
    section("Driver source code", &bundle.driver_source);
    if !bundle.cve.description.is_empty() {
        let cve_body = format!(
            "CVE: {}\nVulnerability class: {}\n{}",
            bundle.cve.id, bundle.cve.vuln_class, bundle.cve.description
        );
        section("CVE details", &cve_body);
    }
    section("CVE corresponding patch", &bundle.patch);
    out.push_str(REFINEMENT_INSTRUCTION);
    out
}

/// Normalized fingerprint used for candidate deduplication.
pub fn dedup_key(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Draw K candidate prompts from the gateway.
pub fn refine(
    bundle: &UserInputBundle,
    k: usize,
    gateway: &dyn Gateway,
    opts: &RefineOptions,
) -> Result<Vec<CandidatePrompt>> {
    assert!(k >= 1, "refine requires k >= 1");
    let prompt = build_refinement_prompt(bundle);
    let mut candidates: Vec<CandidatePrompt> = Vec::with_capacity(k);
    let mut seen: Vec<String> = Vec::new();

    let greedy = gateway.complete(
        &CompletionRequest::new(prompt.clone(), 0.0, opts.max_tokens)?.with_seed(0),
    )?;
    let key = dedup_key(&greedy.text);
    seen.push(key.clone());
    candidates.push(CandidatePrompt {
        text: greedy.text,
        draw_index: 0,
        temperature: 0.0,
        source_bundle_id: bundle.bundle_id.clone(),
        dedup_key: key,
    });

    let budget = (opts.retry_factor as usize).saturating_mul(k);
    let mut draw: u32 = 1;
    while candidates.len() < k && (draw as usize) <= budget {
        let resp = gateway.complete(
            &CompletionRequest::new(prompt.clone(), opts.diversity_temperature, opts.max_tokens)?
                .with_seed(draw as u64),
        )?;
        let key = dedup_key(&resp.text);
        if !seen.contains(&key) {
            seen.push(key.clone());
            candidates.push(CandidatePrompt {
                text: resp.text,
                draw_index: draw,
                temperature: opts.diversity_temperature,
                source_bundle_id: bundle.bundle_id.clone(),
                dedup_key: key,
            });
        }
        draw += 1;
    }

    if candidates.len() < k {
        return Err(Error::DistinctnessExhausted {
            requested: k,
            obtained: candidates,
        });
    }
    Ok(candidates)
}
