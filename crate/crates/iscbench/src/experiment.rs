//! Campaign orchestration: build per-strategy corpora, run multi-trial fuzz
//! campaigns, and aggregate the comparison metrics into report tables.
//!
//! Four corpus strategies ship:
//!
//! * `isc4dgf` — the full pipeline: refine the bundle into candidate
//!   prompts, generate seed scripts, execute them, screen and rank.
//! * `random_llm` — the naive baseline: ask the backend for random test
//!   cases of the target format, no refinement and no format screening.
//! * `provided` — a fixture corpus standing in for benchmark-provided seeds.
//! * `empty_like` — a single minimal valid file.
//!
//! Strategies with backend randomness redraw their corpus every trial;
//! deterministic strategies build once and reuse. Every trial gets an RNG
//! seed derived from the master seed, so a campaign is reproducible
//! byte-for-byte with the mock backend.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::bundle::UserInputBundle;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::formats::{self, FormatTag};
use crate::fuzzer::{self, FuzzTrialStats};
use crate::llm::{CompletionRequest, Gateway};
use crate::refinery::{self, CandidatePrompt, RefineOptions};
use crate::selector;
use crate::stats::{mann_whitney_exact, MannWhitneyOutcome};
use crate::synthesis::{self, GeneratorScript, SandboxLimits, SeedArtifact, SynthesisSkip};
use crate::targets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Isc4dgf,
    RandomLlm,
    Provided,
    EmptyLike,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Isc4dgf => "isc4dgf",
            StrategyKind::RandomLlm => "random_llm",
            StrategyKind::Provided => "provided",
            StrategyKind::EmptyLike => "empty_like",
        }
    }

    /// Whether the corpus depends on backend draws and is rebuilt per trial.
    pub fn redraws_per_trial(&self) -> bool {
        matches!(self, StrategyKind::Isc4dgf | StrategyKind::RandomLlm)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isc4dgf" => Ok(StrategyKind::Isc4dgf),
            "random_llm" => Ok(StrategyKind::RandomLlm),
            "provided" => Ok(StrategyKind::Provided),
            "empty_like" => Ok(StrategyKind::EmptyLike),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Everything the full pipeline produced on the way to a corpus, so callers
/// can persist prompts, scripts, and raw seeds next to the result.
#[derive(Debug)]
pub struct PipelineArtifacts {
    pub candidates: Vec<CandidatePrompt>,
    pub scripts: Vec<GeneratorScript>,
    pub skipped: Vec<SynthesisSkip>,
    pub raw_artifacts: Vec<SeedArtifact>,
    pub corpus: Vec<SeedArtifact>,
}

fn sandbox_limits(cfg: &Config) -> SandboxLimits {
    SandboxLimits::new(
        &cfg.synth.interpreter,
        std::time::Duration::from_secs(cfg.synth.timeout_secs),
        cfg.synth.output_cap_bytes,
    )
}

/// Run refine -> synthesize -> execute -> select for one bundle.
pub fn run_isc_pipeline(
    bundle: &UserInputBundle,
    cfg: &Config,
    gateway: &dyn Gateway,
) -> Result<PipelineArtifacts> {
    let candidates = refinery::refine(
        bundle,
        cfg.refine.candidates as usize,
        gateway,
        &RefineOptions {
            diversity_temperature: cfg.refine.temperature,
            retry_factor: cfg.refine.retry_factor,
            max_tokens: cfg.llm.max_tokens,
        },
    )?;
    let synthesis = synthesis::synthesize(
        &candidates,
        cfg.synth.scripts_per_prompt,
        bundle.target_format,
        &bundle.cve.id,
        &bundle.target_id,
        gateway,
        cfg.refine.temperature,
        cfg.llm.max_tokens,
    )?;
    let raw_artifacts = synthesis::execute_all(
        &synthesis.scripts,
        &sandbox_limits(cfg),
        Config::worker_count(cfg.synth.max_parallel),
    )?;
    let corpus = selector::select(
        raw_artifacts.clone(),
        cfg.select.corpus_size as usize,
        cfg.select.max_seed_bytes,
        bundle.target_format,
    )?;
    Ok(PipelineArtifacts {
        candidates,
        scripts: synthesis.scripts,
        skipped: synthesis.skipped,
        raw_artifacts,
        corpus,
    })
}

/// The motivation-baseline prompt, one draw per wanted seed.
pub fn random_generation_prompt(format: FormatTag) -> String {
    format!("Please generate a random {format} test case")
}

/// Build the `random_llm` corpus: direct draws, script execution, and only
/// the screening the fuzzer itself demands (nonempty, within input cap).
pub fn build_random_llm_corpus(
    format: FormatTag,
    cfg: &Config,
    gateway: &dyn Gateway,
) -> Result<Vec<Vec<u8>>> {
    let prompt = random_generation_prompt(format);
    let limits = sandbox_limits(cfg);
    let mut scripts = Vec::new();
    for draw in 0..cfg.select.corpus_size {
        let req = CompletionRequest::new(prompt.clone(), cfg.refine.temperature, cfg.llm.max_tokens)?
            .with_seed(draw as u64);
        match gateway.complete(&req) {
            Ok(resp) => {
                if let Some(source_text) = synthesis::extract_code(&resp.text) {
                    scripts.push(GeneratorScript {
                        source_text,
                        candidate_index: 0,
                        draw_index: draw,
                        script_path: None,
                    });
                }
            }
            Err(e) => log::warn!("random_llm draw {draw} failed: {e}"),
        }
    }
    let artifacts = synthesis::execute_all(
        &scripts,
        &limits,
        Config::worker_count(cfg.synth.max_parallel),
    )?;
    let corpus: Vec<Vec<u8>> = artifacts
        .into_iter()
        .filter(|a| {
            a.status == synthesis::SandboxStatus::Produced
                && !a.bytes.is_empty()
                && a.bytes.len() <= cfg.fuzz.max_input_bytes
        })
        .map(|a| a.bytes)
        .collect();
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

/// Fixture corpus standing in for benchmark-provided seeds: diverse valid
/// files exercising the common parser paths, built with no knowledge of any
/// planted bug.
pub fn provided_corpus(format: FormatTag) -> Vec<Vec<u8>> {
    match format {
        FormatTag::MiniDoc => vec![
            formats::mini_doc_file(&[(b'T', b"the quick brown fox")]),
            formats::mini_doc_file(&[(b'N', &[5]), (b'N', &[200])]),
            formats::mini_doc_file(&[(b'T', &[]), (b'N', &[])]),
            formats::mini_doc_file(&[(b'Q', &[1, 2, 3])]),
            formats::mini_doc_file(&[(b'T', b"hello"), (b'N', &[3]), (b'Q', &[9]), (b'T', b"data")]),
            formats::mini_doc_file(&[(b'N', &[129]), (b'T', b"archive")]),
        ],
        FormatTag::MiniImg => vec![
            formats::mini_img_file(&[(*b"HDR0", &[0, 8, 0, 8]), (*b"DATA", &[1, 2, 3])]),
            formats::mini_img_file(&[(*b"DATA", &[10, 20, 30, 40, 50]), (*b"END0", &[])]),
            formats::mini_img_file(&[(*b"META", &[1, 1]), (*b"HDR0", &[0, 4, 0, 4])]),
            formats::mini_img_file(&[(*b"HDR0", &[0, 2, 0, 2, 9, 9])]),
        ],
        FormatTag::MiniXml => vec![
            b"<a>text</a>".to_vec(),
            b"<r><i>one</i><i>two</i></r>".to_vec(),
            b"<doc><sec><p>x</p></sec></doc>".to_vec(),
        ],
    }
}

/// Build one strategy's corpus for one trial.
pub fn build_strategy_corpus(
    strategy: StrategyKind,
    bundle: &UserInputBundle,
    cfg: &Config,
    gateway: &dyn Gateway,
) -> Result<Vec<Vec<u8>>> {
    match strategy {
        StrategyKind::Isc4dgf => Ok(run_isc_pipeline(bundle, cfg, gateway)?
            .corpus
            .into_iter()
            .map(|a| a.bytes)
            .collect()),
        StrategyKind::RandomLlm => build_random_llm_corpus(bundle.target_format, cfg, gateway),
        StrategyKind::Provided => Ok(provided_corpus(bundle.target_format)),
        StrategyKind::EmptyLike => Ok(vec![formats::minimal_instance(bundle.target_format)]),
    }
}

/// Per-trial RNG seed, derived so every (target, strategy, trial) cell gets
/// an independent, reproducible stream.
pub fn derive_trial_seed(master: u64, target_id: &str, strategy: StrategyKind, trial: u32) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(target_id.as_bytes());
    hasher.update(strategy.as_str().as_bytes());
    hasher.update(trial.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub target_id: String,
    pub strategy: StrategyKind,
    pub trial: u32,
    pub rng_seed: u64,
    pub corpus_len: usize,
    pub corpus_error: Option<String>,
    pub stats: Option<FuzzTrialStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub trials: u32,
    pub failed_builds: u32,
    pub triggering: u32,
    pub trigger_rate: f64,
    /// Mean over triggering trials only; None when nothing triggered.
    pub mean_time_to_trigger_secs: Option<f64>,
    /// Mean of reaches-to-trigger, with the budget-end reach count standing
    /// in for trials that timed out.
    pub mean_reaches: f64,
    pub sum_reaches: u64,
    pub mean_total_reaches: f64,
    pub mean_coverage_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub target_id: String,
    pub baseline: StrategyKind,
    pub subject: StrategyKind,
    /// baseline mean trigger time / subject mean trigger time.
    pub speedup: Option<f64>,
    /// baseline mean reaches / subject mean reaches.
    pub reach_ratio: Option<f64>,
    pub u: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub p_exact: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub master_seed: u64,
    pub trials_per_strategy: u32,
    pub strategies: Vec<StrategyKind>,
    pub targets: Vec<String>,
    pub budget_virtual_secs: f64,
    pub reference_strategy: StrategyKind,
    pub aggregates: BTreeMap<String, BTreeMap<String, StrategyAggregate>>,
    pub comparisons: Vec<PairwiseComparison>,
    pub trial_records: Vec<TrialRecord>,
    pub footnotes: Vec<String>,
}

/// One trial's loose artifacts, for callers that persist run directories.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub target_id: String,
    pub strategy: StrategyKind,
    pub trial: u32,
    pub corpus_len: usize,
    pub corpus_error: Option<String>,
    pub stats: Option<FuzzTrialStats>,
    pub trigger_input: Option<Vec<u8>>,
}

#[derive(Debug)]
pub struct CampaignRun {
    pub report: CampaignReport,
    pub trial_outputs: Vec<TrialOutput>,
}

/// Run `trials` fuzzing trials per (bundle target, strategy) cell.
pub fn run_campaign(
    bundles: &[UserInputBundle],
    strategies: &[StrategyKind],
    trials: u32,
    cfg: &Config,
    gateway: &dyn Gateway,
) -> Result<CampaignRun> {
    assert!(trials >= 1, "run_campaign requires trials >= 1");
    if bundles.is_empty() {
        return Err(Error::Config("campaign needs at least one bundle".to_string()));
    }
    if strategies.is_empty() {
        return Err(Error::Config("campaign needs at least one strategy".to_string()));
    }

    // Deterministic strategies build once per format and are reused.
    let mut fixed_corpora: BTreeMap<(StrategyKind, FormatTag), Vec<Vec<u8>>> = BTreeMap::new();
    for bundle in bundles {
        for strategy in strategies {
            if !strategy.redraws_per_trial() {
                fixed_corpora
                    .entry((*strategy, bundle.target_format))
                    .or_insert_with(|| {
                        build_strategy_corpus(*strategy, bundle, cfg, gateway)
                            .expect("deterministic strategies cannot fail to build")
                    });
            }
        }
    }

    struct Job<'a> {
        bundle: &'a UserInputBundle,
        strategy: StrategyKind,
        trial: u32,
    }
    let mut jobs = Vec::new();
    for bundle in bundles {
        for strategy in strategies {
            for trial in 0..trials {
                jobs.push(Job {
                    bundle,
                    strategy: *strategy,
                    trial,
                });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<TrialOutput>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = Config::worker_count(cfg.campaign.max_parallel).min(jobs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let output = run_one_trial(job.bundle, job.strategy, job.trial, cfg, gateway, &fixed_corpora);
                slots.lock().expect("slot lock")[i] = Some(output);
            });
        }
    });

    let mut trial_outputs = Vec::new();
    let mut trial_records = Vec::new();
    for slot in slots.into_inner().expect("slot lock") {
        let output = slot.expect("worker filled the slot");
        trial_records.push(TrialRecord {
            target_id: output.target_id.clone(),
            strategy: output.strategy,
            trial: output.trial,
            rng_seed: derive_trial_seed(
                cfg.master_seed,
                &output.target_id,
                output.strategy,
                output.trial,
            ),
            corpus_len: output.corpus_len,
            corpus_error: output.corpus_error.clone(),
            stats: output.stats.clone(),
        });
        trial_outputs.push(output);
    }

    let report = assemble_report(bundles, strategies, trials, cfg, trial_records);
    Ok(CampaignRun {
        report,
        trial_outputs,
    })
}

fn run_one_trial(
    bundle: &UserInputBundle,
    strategy: StrategyKind,
    trial: u32,
    cfg: &Config,
    gateway: &dyn Gateway,
    fixed_corpora: &BTreeMap<(StrategyKind, FormatTag), Vec<Vec<u8>>>,
) -> TrialOutput {
    let target = targets::find_target(&bundle.target_id).expect("bundle target validated on load");
    let bug_id = target.bugs[0].bug_id;
    let rng_seed = derive_trial_seed(cfg.master_seed, target.target_id, strategy, trial);

    let corpus = if strategy.redraws_per_trial() {
        build_strategy_corpus(strategy, bundle, cfg, gateway)
    } else {
        Ok(fixed_corpora[&(strategy, bundle.target_format)].clone())
    };

    match corpus {
        Ok(corpus) => {
            // Audit logs are per-execution records; they stay off in
            // campaigns, whose budgets run to millions of executions.
            let mut fuzz_cfg = cfg.fuzz.to_fuzz_config(bug_id, rng_seed);
            fuzz_cfg.audit = false;
            match fuzzer::fuzz(target, &corpus, &fuzz_cfg) {
                Ok(outcome) => TrialOutput {
                    target_id: target.target_id.to_string(),
                    strategy,
                    trial,
                    corpus_len: corpus.len(),
                    corpus_error: None,
                    stats: Some(outcome.stats),
                    trigger_input: outcome.trigger_input,
                },
                Err(e) => TrialOutput {
                    target_id: target.target_id.to_string(),
                    strategy,
                    trial,
                    corpus_len: corpus.len(),
                    corpus_error: Some(e.to_string()),
                    stats: None,
                    trigger_input: None,
                },
            }
        }
        Err(e) => TrialOutput {
            target_id: target.target_id.to_string(),
            strategy,
            trial,
            corpus_len: 0,
            corpus_error: Some(e.to_string()),
            stats: None,
            trigger_input: None,
        },
    }
}

fn assemble_report(
    bundles: &[UserInputBundle],
    strategies: &[StrategyKind],
    trials: u32,
    cfg: &Config,
    trial_records: Vec<TrialRecord>,
) -> CampaignReport {
    let reference = if strategies.contains(&StrategyKind::Isc4dgf) {
        StrategyKind::Isc4dgf
    } else {
        strategies[0]
    };
    let budget_virtual_secs = cfg.fuzz.to_fuzz_config("_", 0).budget_virtual_secs();
    let censored = budget_virtual_secs + 1.0;

    let mut aggregates: BTreeMap<String, BTreeMap<String, StrategyAggregate>> = BTreeMap::new();
    let mut comparisons = Vec::new();

    for bundle in bundles {
        let target_id = bundle.target_id.clone();
        let mut per_strategy = BTreeMap::new();
        for strategy in strategies {
            let records: Vec<&TrialRecord> = trial_records
                .iter()
                .filter(|r| r.target_id == target_id && r.strategy == *strategy)
                .collect();
            per_strategy.insert(strategy.to_string(), aggregate(&records, trials));
        }
        aggregates.insert(target_id.clone(), per_strategy);

        for strategy in strategies {
            if *strategy == reference {
                continue;
            }
            comparisons.push(compare(
                &trial_records,
                &target_id,
                *strategy,
                reference,
                censored,
            ));
        }
    }

    CampaignReport {
        master_seed: cfg.master_seed,
        trials_per_strategy: trials,
        strategies: strategies.to_vec(),
        targets: bundles.iter().map(|b| b.target_id.clone()).collect(),
        budget_virtual_secs,
        reference_strategy: reference,
        aggregates,
        comparisons,
        trial_records,
        footnotes: vec![
            "Times are virtual: executions times a fixed per-execution cost, so reports \
             reproduce bit-for-bit across machines."
                .to_string(),
            format!(
                "Mann-Whitney tests are two-sided with midrank ties; trials that never \
                 triggered enter as censored values at budget+1 = {censored} virtual seconds."
            ),
            "Reach columns use the reaches-to-trigger count, or the budget-end reach count \
             for trials that never triggered."
                .to_string(),
        ],
    }
}

fn aggregate(records: &[&TrialRecord], trials: u32) -> StrategyAggregate {
    let with_stats: Vec<&FuzzTrialStats> =
        records.iter().filter_map(|r| r.stats.as_ref()).collect();
    let failed_builds = records.len() as u32 - with_stats.len() as u32;
    let triggering: Vec<&&FuzzTrialStats> =
        with_stats.iter().filter(|s| s.triggered).collect();

    let mean_time_to_trigger_secs = if triggering.is_empty() {
        None
    } else {
        Some(
            triggering
                .iter()
                .map(|s| s.time_to_trigger_secs.expect("triggered implies time"))
                .sum::<f64>()
                / triggering.len() as f64,
        )
    };
    let sum_reaches: u64 = with_stats
        .iter()
        .map(|s| {
            if s.triggered {
                s.reaches_before_trigger
            } else {
                s.total_reaches
            }
        })
        .sum();
    let n = with_stats.len().max(1) as f64;
    StrategyAggregate {
        trials,
        failed_builds,
        triggering: triggering.len() as u32,
        trigger_rate: triggering.len() as f64 / with_stats.len().max(1) as f64,
        mean_time_to_trigger_secs,
        mean_reaches: sum_reaches as f64 / n,
        sum_reaches,
        mean_total_reaches: with_stats.iter().map(|s| s.total_reaches as f64).sum::<f64>() / n,
        mean_coverage_fraction: with_stats.iter().map(|s| s.coverage_fraction).sum::<f64>() / n,
    }
}

fn compare(
    trial_records: &[TrialRecord],
    target_id: &str,
    baseline: StrategyKind,
    subject: StrategyKind,
    censored: f64,
) -> PairwiseComparison {
    let sample = |strategy: StrategyKind| -> Vec<f64> {
        trial_records
            .iter()
            .filter(|r| r.target_id == target_id && r.strategy == strategy)
            .filter_map(|r| r.stats.as_ref())
            .map(|s| s.time_to_trigger_secs.unwrap_or(censored))
            .collect()
    };
    let base_times = sample(baseline);
    let subj_times = sample(subject);

    let mw: Option<MannWhitneyOutcome> = mann_whitney_exact(&base_times, &subj_times).ok();

    let mean_over_triggering = |strategy: StrategyKind| -> Option<f64> {
        let times: Vec<f64> = trial_records
            .iter()
            .filter(|r| r.target_id == target_id && r.strategy == strategy)
            .filter_map(|r| r.stats.as_ref())
            .filter(|s| s.triggered)
            .filter_map(|s| s.time_to_trigger_secs)
            .collect();
        if times.is_empty() {
            None
        } else {
            Some(times.iter().sum::<f64>() / times.len() as f64)
        }
    };
    let mean_reaches = |strategy: StrategyKind| -> Option<f64> {
        let reaches: Vec<f64> = trial_records
            .iter()
            .filter(|r| r.target_id == target_id && r.strategy == strategy)
            .filter_map(|r| r.stats.as_ref())
            .map(|s| {
                if s.triggered {
                    s.reaches_before_trigger as f64
                } else {
                    s.total_reaches as f64
                }
            })
            .collect();
        if reaches.is_empty() {
            None
        } else {
            Some(reaches.iter().sum::<f64>() / reaches.len() as f64)
        }
    };

    // Ratios only when both sides have at least one triggering trial.
    let both_triggered = mean_over_triggering(baseline).is_some()
        && mean_over_triggering(subject).is_some();
    let speedup = if both_triggered {
        match (mean_over_triggering(baseline), mean_over_triggering(subject)) {
            (Some(b), Some(s)) if s > 0.0 => Some(b / s),
            _ => None,
        }
    } else {
        None
    };
    let reach_ratio = if both_triggered {
        match (mean_reaches(baseline), mean_reaches(subject)) {
            (Some(b), Some(s)) if s > 0.0 => Some(b / s),
            _ => None,
        }
    } else {
        None
    };

    PairwiseComparison {
        target_id: target_id.to_string(),
        baseline,
        subject,
        speedup,
        reach_ratio,
        u: mw.as_ref().map(|m| m.u),
        p_two_sided: mw.as_ref().map(|m| m.p_two_sided),
        p_exact: mw.as_ref().map(|m| m.exact),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReachRow {
    pub target_id: String,
    pub coverage_subject: f64,
    pub coverage_baseline: f64,
    /// Relative coverage reduction of the subject, in percent.
    pub coverage_delta_pct: f64,
    pub reaches_subject: f64,
    pub reaches_baseline: f64,
    /// subject reaches / baseline reaches; None when the baseline never
    /// reached at all.
    pub reach_multiplier: Option<f64>,
}

/// Per-target coverage-versus-reach comparison of the reference strategy
/// against a coverage baseline.
pub fn coverage_vs_reach_table(
    report: &CampaignReport,
    baseline: StrategyKind,
) -> Result<Vec<CoverageReachRow>> {
    let subject = StrategyKind::Isc4dgf;
    let mut rows = Vec::new();
    for target_id in &report.targets {
        let per_strategy = &report.aggregates[target_id];
        let subj = per_strategy
            .get(subject.as_str())
            .ok_or_else(|| Error::MissingStrategy(subject.to_string()))?;
        let base = per_strategy
            .get(baseline.as_str())
            .ok_or_else(|| Error::MissingStrategy(baseline.to_string()))?;
        let coverage_delta_pct = if base.mean_coverage_fraction > 0.0 {
            (base.mean_coverage_fraction - subj.mean_coverage_fraction)
                / base.mean_coverage_fraction
                * 100.0
        } else {
            0.0
        };
        rows.push(CoverageReachRow {
            target_id: target_id.clone(),
            coverage_subject: subj.mean_coverage_fraction,
            coverage_baseline: base.mean_coverage_fraction,
            coverage_delta_pct,
            reaches_subject: subj.mean_total_reaches,
            reaches_baseline: base.mean_total_reaches,
            reach_multiplier: if base.mean_total_reaches > 0.0 {
                Some(subj.mean_total_reaches / base.mean_total_reaches)
            } else {
                None
            },
        });
    }
    Ok(rows)
}

fn fmt_opt(value: Option<f64>, precision: usize) -> String {
    match value {
        Some(v) => format!("{v:.precision$}"),
        None => "N.A".to_string(),
    }
}

/// Table-3/4-shaped CSV: per (target, strategy) aggregate row with ratios and
/// p-values against the reference strategy.
pub fn report_csv(report: &CampaignReport) -> String {
    let mut out = String::from(
        "target,strategy,trials,failed_builds,trigger_rate,mean_time_s,mean_reaches,\
         speedup_vs_reference,reach_ratio_vs_reference,p_two_sided,p_exact\n",
    );
    for target_id in &report.targets {
        for strategy in &report.strategies {
            let agg = &report.aggregates[target_id][strategy.as_str()];
            let mean_time = match agg.mean_time_to_trigger_secs {
                Some(t) => format!("{t:.6}"),
                None => "T.O.".to_string(),
            };
            let (speedup, reach_ratio, p, p_exact) = if *strategy == report.reference_strategy {
                ("1.00".to_string(), "1.00".to_string(), "-".to_string(), "-".to_string())
            } else {
                let cmp = report
                    .comparisons
                    .iter()
                    .find(|c| c.target_id == *target_id && c.baseline == *strategy);
                match cmp {
                    Some(c) => (
                        fmt_opt(c.speedup, 2),
                        fmt_opt(c.reach_ratio, 2),
                        fmt_opt(c.p_two_sided, 6),
                        c.p_exact.map(|e| e.to_string()).unwrap_or("-".to_string()),
                    ),
                    None => ("N.A".to_string(), "N.A".to_string(), "N.A".to_string(), "-".to_string()),
                }
            };
            out.push_str(&format!(
                "{target_id},{strategy},{},{},{:.2},{mean_time},{:.1},{speedup},{reach_ratio},{p},{p_exact}\n",
                agg.trials, agg.failed_builds, agg.trigger_rate, agg.mean_reaches,
            ));
        }
    }
    out
}

/// Coverage-versus-reach CSV against the `provided` baseline.
pub fn coverage_reach_csv(report: &CampaignReport) -> Result<String> {
    let rows = coverage_vs_reach_table(report, StrategyKind::Provided)?;
    let mut out = String::from(
        "target,coverage_isc4dgf,coverage_provided,coverage_delta_pct,\
         reaches_isc4dgf,reaches_provided,reach_multiplier\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.2},{:.1},{:.1},{}\n",
            row.target_id,
            row.coverage_subject,
            row.coverage_baseline,
            row.coverage_delta_pct,
            row.reaches_subject,
            row.reaches_baseline,
            fmt_opt(row.reach_multiplier, 2),
        ));
    }
    Ok(out)
}
