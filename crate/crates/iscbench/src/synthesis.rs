//! Seed synthesis: generation prompts, script extraction, and sandboxed
//! execution of generator scripts.
//!
//! For each candidate prompt the generation backend is asked for scripts
//! whose run produces one seed file. Each script executes as a child process
//! in its own empty scratch directory under a wall-clock timeout and an
//! output-size cap; the seed is the single new file it creates, or captured
//! stdout when no file appears. Scripts are runtime data: the interpreter
//! command is configurable, and nothing here inspects or repairs them.

use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::formats::FormatTag;
use crate::llm::{CompletionRequest, Gateway};
use crate::refinery::CandidatePrompt;
use crate::selector::SeedVerdict;

/// Instruction handed to the generation backend, after the candidate summary.
/// The three slots name the wanted file format, the CVE, and the program
/// under test.
pub fn build_generation_prompt(
    candidate_text: &str,
    format: FormatTag,
    cve_id: &str,
    put_name: &str,
) -> String {
    let instruction = format!(
        "Generate Python code so that the running result of the code is {format} file as a \
         test case that may trigger {cve_id} in {put_name}."
    );
    if candidate_text.is_empty() {
        instruction
    } else {
        format!("{candidate_text}\n\n{instruction}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorScript {
    pub source_text: String,
    /// Index of the candidate prompt this script came from.
    pub candidate_index: u32,
    /// Draw index within that candidate.
    pub draw_index: u32,
    pub script_path: Option<PathBuf>,
}

/// Per-draw failures recorded during synthesis; never fatal.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisSkip {
    pub candidate_index: u32,
    pub draw_index: u32,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct SynthesisOutput {
    pub scripts: Vec<GeneratorScript>,
    pub skipped: Vec<SynthesisSkip>,
}

/// Ask the backend for `m_per_prompt` scripts per candidate.
pub fn synthesize(
    candidates: &[CandidatePrompt],
    m_per_prompt: u32,
    format: FormatTag,
    cve_id: &str,
    put_name: &str,
    gateway: &dyn Gateway,
    temperature: f64,
    max_tokens: u32,
) -> Result<SynthesisOutput> {
    assert!(m_per_prompt >= 1, "synthesize requires m_per_prompt >= 1");
    let mut out = SynthesisOutput::default();
    for (cand_idx, cand) in candidates.iter().enumerate() {
        let prompt = build_generation_prompt(&cand.text, format, cve_id, put_name);
        for draw in 0..m_per_prompt {
            let selector = cand_idx as u64 * m_per_prompt as u64 + draw as u64;
            let req = CompletionRequest::new(prompt.clone(), temperature, max_tokens)?
                .with_seed(selector);
            match gateway.complete(&req) {
                Ok(resp) => match extract_code(&resp.text) {
                    Some(source_text) => out.scripts.push(GeneratorScript {
                        source_text,
                        candidate_index: cand_idx as u32,
                        draw_index: draw,
                        script_path: None,
                    }),
                    None => {
                        log::warn!(
                            "candidate {cand_idx} draw {draw}: completion had no code content"
                        );
                        out.skipped.push(SynthesisSkip {
                            candidate_index: cand_idx as u32,
                            draw_index: draw,
                            reason: "no code content".to_string(),
                        });
                    }
                },
                Err(e) => {
                    log::warn!("candidate {cand_idx} draw {draw}: gateway error: {e}");
                    out.skipped.push(SynthesisSkip {
                        candidate_index: cand_idx as u32,
                        draw_index: draw,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Pull the body out of the first fenced code block, else the whole response.
pub fn extract_code(text: &str) -> Option<String> {
    if let Some(open) = text.find("```") {
        let after_fence = &text[open + 3..];
        let body_start = after_fence.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after_fence[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        let code = body[..end].trim();
        if code.is_empty() {
            return None;
        }
        return Some(code.to_string());
    }
    let trimmed = text.trim();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SandboxStatus {
    Produced,
    ExecFailed,
    Timeout,
    NoOutput,
    Oversize,
}

#[derive(Debug, Clone)]
pub struct SandboxOutcome {
    pub status: SandboxStatus,
    pub stdout_bytes_captured: usize,
    pub output_file: Option<PathBuf>,
    pub wall_time: Duration,
    /// Seed payload when one was produced; truncated at the cap for Oversize.
    pub seed_bytes: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct SandboxLimits {
    /// Interpreter command line; extra tokens become leading arguments.
    pub interpreter: String,
    pub timeout: Duration,
    pub output_cap_bytes: usize,
    /// Parent directory for scratch dirs; the system temp dir when unset.
    pub scratch_root: Option<PathBuf>,
}

impl SandboxLimits {
    pub fn new(interpreter: &str, timeout: Duration, output_cap_bytes: usize) -> SandboxLimits {
        SandboxLimits {
            interpreter: interpreter.to_string(),
            timeout,
            output_cap_bytes,
            scratch_root: None,
        }
    }
}

/// A generated seed together with its provenance and screening state.
#[derive(Debug, Clone)]
pub struct SeedArtifact {
    pub bytes: Vec<u8>,
    pub candidate_index: u32,
    pub draw_index: u32,
    pub status: SandboxStatus,
    pub verdict: Option<SeedVerdict>,
}

impl SeedArtifact {
    pub fn size(&self) -> usize {
        self.bytes.len()
    }
}

/// Run one script in a fresh scratch directory.
///
/// Only configuration problems (a missing interpreter) are errors; script
/// misbehavior is encoded in the outcome.
pub fn execute_sandboxed(script: &GeneratorScript, limits: &SandboxLimits) -> Result<SandboxOutcome> {
    let scratch = match &limits.scratch_root {
        Some(root) => {
            std::fs::create_dir_all(root)?;
            tempfile::TempDir::new_in(root)?
        }
        None => tempfile::TempDir::new()?,
    };

    // The script itself lives outside the scratch dir so it never counts as
    // the produced output.
    let script_file = tempfile::NamedTempFile::new()?;
    std::fs::write(script_file.path(), &script.source_text)?;

    let mut tokens = limits.interpreter.split_whitespace();
    let program = tokens
        .next()
        .ok_or_else(|| Error::Config("synth.interpreter is empty".to_string()))?;
    let args: Vec<&str> = tokens.collect();

    let started = Instant::now();
    let mut child = Command::new(program)
        .args(&args)
        .arg(script_file.path())
        .current_dir(scratch.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Config(format!("interpreter {program:?} not found"))
            } else {
                Error::Io(e)
            }
        })?;

    // Drain stdout on a helper thread, keeping at most cap+1 bytes so an
    // over-cap write is detectable without unbounded buffering.
    let cap = limits.output_cap_bytes;
    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let reader = std::thread::spawn(move || {
        let mut kept: Vec<u8> = Vec::new();
        let mut chunk = [0u8; 8192];
        let mut total = 0usize;
        loop {
            match stdout_pipe.read(&mut chunk) {
                Ok(0) => break,
                Ok(n) => {
                    total += n;
                    let room = (cap + 1).saturating_sub(kept.len());
                    kept.extend_from_slice(&chunk[..n.min(room)]);
                }
                Err(_) => break,
            }
        }
        (kept, total)
    });

    let mut timed_out = false;
    let exit_status = loop {
        match child.try_wait()? {
            Some(status) => break Some(status),
            None => {
                if started.elapsed() >= limits.timeout {
                    timed_out = true;
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };
    let wall_time = started.elapsed();
    let (stdout_bytes, stdout_total) = reader.join().expect("stdout reader");

    let mut outcome = SandboxOutcome {
        status: SandboxStatus::NoOutput,
        stdout_bytes_captured: stdout_total.min(cap + 1),
        output_file: None,
        wall_time,
        seed_bytes: None,
    };

    if timed_out {
        outcome.status = SandboxStatus::Timeout;
        return Ok(outcome);
    }
    if !exit_status.map(|s| s.success()).unwrap_or(false) {
        outcome.status = SandboxStatus::ExecFailed;
        return Ok(outcome);
    }

    // File creation takes precedence over stdout. With several new files the
    // lexicographically first name wins, for determinism.
    let mut created: Vec<PathBuf> = std::fs::read_dir(scratch.path())?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.path())
        .collect();
    created.sort();

    if let Some(path) = created.into_iter().next() {
        let meta = std::fs::metadata(&path)?;
        let size = meta.len() as usize;
        if size == 0 {
            outcome.status = SandboxStatus::NoOutput;
            outcome.output_file = Some(path);
        } else if size > cap {
            let mut file = std::fs::File::open(&path)?;
            let mut bytes = vec![0u8; cap];
            file.read_exact(&mut bytes)?;
            outcome.status = SandboxStatus::Oversize;
            outcome.output_file = Some(path);
            outcome.seed_bytes = Some(bytes);
        } else {
            outcome.status = SandboxStatus::Produced;
            outcome.seed_bytes = Some(std::fs::read(&path)?);
            outcome.output_file = Some(path);
        }
        return Ok(outcome);
    }

    if stdout_total > cap {
        outcome.status = SandboxStatus::Oversize;
        outcome.seed_bytes = Some(stdout_bytes[..cap].to_vec());
    } else if !stdout_bytes.is_empty() {
        outcome.status = SandboxStatus::Produced;
        outcome.seed_bytes = Some(stdout_bytes);
    }
    Ok(outcome)
}

/// Execute every script, up to `max_parallel` at a time, and collect seed
/// artifacts ordered by provenance.
pub fn execute_all(
    scripts: &[GeneratorScript],
    limits: &SandboxLimits,
    max_parallel: usize,
) -> Result<Vec<SeedArtifact>> {
    let workers = max_parallel.max(1).min(scripts.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<(SandboxOutcome, u32, u32)>>>> =
        Mutex::new((0..scripts.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= scripts.len() {
                    break;
                }
                let script = &scripts[i];
                let result = execute_sandboxed(script, limits)
                    .map(|o| (o, script.candidate_index, script.draw_index));
                slots.lock().expect("slot lock")[i] = Some(result);
            });
        }
    });

    let mut artifacts = Vec::new();
    for slot in slots.into_inner().expect("slot lock") {
        let (outcome, candidate_index, draw_index) = slot.expect("worker filled the slot")?;
        artifacts.push(SeedArtifact {
            bytes: outcome.seed_bytes.unwrap_or_default(),
            candidate_index,
            draw_index,
            status: outcome.status,
            verdict: None,
        });
    }
    artifacts.sort_by_key(|a| (a.candidate_index, a.draw_index));
    Ok(artifacts)
}
