//! Command-line entry point: one subcommand per pipeline stage plus full
//! campaigns.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 empty corpus,
//! 4 campaign finished with partial failures.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use crate::bundle::{self, UserInputBundle};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiment::{self, StrategyKind};
use crate::fuzzer;
use crate::llm::{gateway_from_config, SharedGateway};
use crate::selector;
use crate::targets;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EMPTY_CORPUS: i32 = 3;
pub const EXIT_PARTIAL_FAILURE: i32 = 4;

#[derive(Parser)]
#[command(
    name = "iscbench",
    version,
    about = "Workbench for LLM-generated initial seed corpora in directed grey-box fuzzing"
)]
struct Cli {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override master_seed from the config.
    #[arg(long, global = true)]
    master_seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine a bundle into K candidate prompts (config: refine.candidates,
    /// refine.temperature, refine.retry_factor).
    Refine {
        /// Bundle directory containing a manifest.
        #[arg(long)]
        bundle: PathBuf,
        /// Override refine.candidates.
        #[arg(long)]
        candidates: Option<u32>,
        /// Output directory; prompts land in <out>/prompts/.
        #[arg(long, default_value = "campaign")]
        out: PathBuf,
    },
    /// Run refine -> generate -> execute -> select and emit the corpus
    /// (config: synth.*, select.*).
    BuildCorpus {
        #[arg(long)]
        bundle: PathBuf,
        /// Override refine.candidates.
        #[arg(long)]
        candidates: Option<u32>,
        /// Override synth.scripts_per_prompt.
        #[arg(long)]
        scripts_per_prompt: Option<u32>,
        /// Override select.corpus_size.
        #[arg(long)]
        corpus_size: Option<u32>,
        #[arg(long, default_value = "campaign")]
        out: PathBuf,
    },
    /// Fuzz a corpus directory against a registered target (config: fuzz.*).
    Fuzz {
        /// Target id, e.g. mini-doc-parser.
        #[arg(long)]
        target: String,
        /// Directory of seed files (rank order when a manifest is present).
        #[arg(long)]
        corpus: PathBuf,
        /// Bug id to direct at; the target's first bug when omitted.
        #[arg(long)]
        bug: Option<String>,
        /// Override fuzz.exec_budget (0 disables).
        #[arg(long)]
        exec_budget: Option<u64>,
        /// Override fuzz.time_budget_secs (0 disables).
        #[arg(long)]
        time_budget_secs: Option<u64>,
        /// Override the derived trial seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a per-execution audit log (small budgets only).
        #[arg(long)]
        audit: bool,
        #[arg(long, default_value = "runs/trial-0")]
        out: PathBuf,
    },
    /// Run a multi-strategy, multi-trial campaign over one or more bundles
    /// (config: campaign.*, fuzz.*).
    Campaign {
        /// Bundle directories, one target each.
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        /// Comma-separated strategies; overrides campaign.strategies.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Override campaign.trials.
        #[arg(long)]
        trials: Option<u32>,
        /// Override fuzz.exec_budget.
        #[arg(long)]
        exec_budget: Option<u64>,
        /// Emit report.json only, no CSV tables.
        #[arg(long)]
        json_only: bool,
        #[arg(long, default_value = "campaign")]
        out: PathBuf,
    },
    /// Regenerate the CSV tables from an existing report.json.
    Report {
        /// Path to report.json.
        #[arg(long)]
        report: PathBuf,
        /// Output directory; the report's directory when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print backend health (config: llm.*).
    ProbeLlm,
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::EmptyCorpus => EXIT_EMPTY_CORPUS,
        _ => EXIT_USAGE,
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.master_seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: Command, cfg: &Config) -> Result<i32> {
    match command {
        Command::Refine {
            bundle,
            candidates,
            out,
        } => {
            let mut cfg = cfg.clone();
            if let Some(k) = candidates {
                cfg.refine.candidates = k;
            }
            cfg.validate()?;
            cmd_refine(&bundle, &cfg, &out)
        }
        Command::BuildCorpus {
            bundle,
            candidates,
            scripts_per_prompt,
            corpus_size,
            out,
        } => {
            let mut cfg = cfg.clone();
            if let Some(k) = candidates {
                cfg.refine.candidates = k;
            }
            if let Some(m) = scripts_per_prompt {
                cfg.synth.scripts_per_prompt = m;
            }
            if let Some(n) = corpus_size {
                cfg.select.corpus_size = n;
            }
            cfg.validate()?;
            cmd_build_corpus(&bundle, &cfg, &out)
        }
        Command::Fuzz {
            target,
            corpus,
            bug,
            exec_budget,
            time_budget_secs,
            seed,
            audit,
            out,
        } => {
            let mut cfg = cfg.clone();
            if let Some(b) = exec_budget {
                cfg.fuzz.exec_budget = b;
            }
            if let Some(t) = time_budget_secs {
                cfg.fuzz.time_budget_secs = t;
            }
            cfg.fuzz.audit_log |= audit;
            cfg.validate()?;
            cmd_fuzz(&target, &corpus, bug.as_deref(), seed, &cfg, &out)
        }
        Command::Campaign {
            bundles,
            strategies,
            trials,
            exec_budget,
            json_only,
            out,
        } => {
            let mut cfg = cfg.clone();
            if let Some(t) = trials {
                cfg.campaign.trials = t;
            }
            if let Some(b) = exec_budget {
                cfg.fuzz.exec_budget = b;
            }
            if let Some(names) = strategies {
                cfg.campaign.strategies = names;
            }
            cfg.validate()?;
            cmd_campaign(&bundles, &cfg, json_only, &out)
        }
        Command::Report { report, out } => cmd_report(&report, out.as_deref()),
        Command::ProbeLlm => cmd_probe(cfg),
    }
}

fn load_bundle_dir(dir: &Path) -> Result<UserInputBundle> {
    bundle::load_bundle(dir)
}

fn cmd_refine(bundle_dir: &Path, cfg: &Config, out: &Path) -> Result<i32> {
    let bundle = load_bundle_dir(bundle_dir)?;
    let gateway = gateway_from_config(&cfg.llm)?;
    let candidates = crate::refinery::refine(
        &bundle,
        cfg.refine.candidates as usize,
        gateway.as_ref(),
        &crate::refinery::RefineOptions {
            diversity_temperature: cfg.refine.temperature,
            retry_factor: cfg.refine.retry_factor,
            max_tokens: cfg.llm.max_tokens,
        },
    )?;
    let prompts_dir = out.join("prompts");
    std::fs::create_dir_all(&prompts_dir)?;
    for (i, cand) in candidates.iter().enumerate() {
        std::fs::write(prompts_dir.join(format!("cand-{i}.txt")), &cand.text)?;
    }
    println!(
        "wrote {} candidate prompts to {}",
        candidates.len(),
        prompts_dir.display()
    );
    Ok(EXIT_OK)
}

fn cmd_build_corpus(bundle_dir: &Path, cfg: &Config, out: &Path) -> Result<i32> {
    let bundle = load_bundle_dir(bundle_dir)?;
    let gateway = gateway_from_config(&cfg.llm)?;
    let pipeline = experiment::run_isc_pipeline(&bundle, cfg, gateway.as_ref())?;

    let prompts_dir = out.join("prompts");
    std::fs::create_dir_all(&prompts_dir)?;
    for (i, cand) in pipeline.candidates.iter().enumerate() {
        std::fs::write(prompts_dir.join(format!("cand-{i}.txt")), &cand.text)?;
    }
    let scripts_dir = out.join("scripts");
    std::fs::create_dir_all(&scripts_dir)?;
    for script in &pipeline.scripts {
        std::fs::write(
            scripts_dir.join(format!("{}-{}.gen", script.candidate_index, script.draw_index)),
            &script.source_text,
        )?;
    }
    let raw_dir = out.join("seeds/raw");
    std::fs::create_dir_all(&raw_dir)?;
    for artifact in &pipeline.raw_artifacts {
        if !artifact.bytes.is_empty() {
            std::fs::write(
                raw_dir.join(format!("{}-{}.bin", artifact.candidate_index, artifact.draw_index)),
                &artifact.bytes,
            )?;
        }
    }
    let corpus_dir = out.join("corpus");
    selector::write_corpus(&pipeline.corpus, bundle.target_format, &corpus_dir)?;

    let produced = pipeline
        .raw_artifacts
        .iter()
        .filter(|a| a.status == crate::synthesis::SandboxStatus::Produced)
        .count();
    println!(
        "scripts: {} ({} draws skipped), produced seeds: {}, corpus: {} seeds in {}",
        pipeline.scripts.len(),
        pipeline.skipped.len(),
        produced,
        pipeline.corpus.len(),
        corpus_dir.display()
    );
    Ok(EXIT_OK)
}

fn cmd_fuzz(
    target_id: &str,
    corpus_dir: &Path,
    bug: Option<&str>,
    seed: Option<u64>,
    cfg: &Config,
    out: &Path,
) -> Result<i32> {
    let target = targets::find_target(target_id)?;
    let corpus = selector::read_corpus_dir(corpus_dir)?;
    let bug_id = match bug {
        Some(id) => {
            target.bug_index(id)?;
            id.to_string()
        }
        None => target.bugs[0].bug_id.to_string(),
    };
    let rng_seed = seed.unwrap_or_else(|| {
        experiment::derive_trial_seed(cfg.master_seed, target_id, StrategyKind::Provided, 0)
    });
    let fuzz_cfg = cfg.fuzz.to_fuzz_config(&bug_id, rng_seed);
    let outcome = fuzzer::fuzz(target, &corpus, &fuzz_cfg)?;

    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("stats.json"),
        serde_json::to_vec_pretty(&outcome.stats)?,
    )?;
    if let Some(trigger) = &outcome.trigger_input {
        std::fs::write(out.join("trigger.bin"), trigger)?;
    }
    if let Some(audit) = &outcome.audit {
        let mut log = String::new();
        for record in audit {
            log.push_str(&serde_json::to_string(record)?);
            log.push('\n');
        }
        std::fs::write(out.join("audit.jsonl"), log)?;
    }
    println!(
        "target {} bug {}: triggered={} execs={} reaches={} coverage={:.3} -> {}",
        target_id,
        bug_id,
        outcome.stats.triggered,
        outcome.stats.total_execs,
        outcome.stats.total_reaches,
        outcome.stats.coverage_fraction,
        out.join("stats.json").display()
    );
    Ok(EXIT_OK)
}

fn cmd_campaign(bundle_dirs: &[PathBuf], cfg: &Config, json_only: bool, out: &Path) -> Result<i32> {
    let bundles: Vec<UserInputBundle> = bundle_dirs
        .iter()
        .map(|d| load_bundle_dir(d))
        .collect::<Result<_>>()?;
    let strategies: Vec<StrategyKind> = cfg
        .campaign
        .strategies
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let gateway: SharedGateway = gateway_from_config(&cfg.llm)?;

    let run = experiment::run_campaign(
        &bundles,
        &strategies,
        cfg.campaign.trials,
        cfg,
        gateway.as_ref(),
    )?;

    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("report.json"),
        serde_json::to_vec_pretty(&run.report)?,
    )?;
    if !json_only {
        std::fs::write(out.join("report.csv"), experiment::report_csv(&run.report))?;
        match experiment::coverage_reach_csv(&run.report) {
            Ok(csv) => std::fs::write(out.join("coverage_reach.csv"), csv)?,
            Err(e) => log::warn!("skipping coverage_reach.csv: {e}"),
        }
    }
    for output in &run.trial_outputs {
        let dir = out
            .join("runs")
            .join(&output.target_id)
            .join(output.strategy.as_str())
            .join(format!("trial-{}", output.trial));
        std::fs::create_dir_all(&dir)?;
        if let Some(stats) = &output.stats {
            std::fs::write(dir.join("stats.json"), serde_json::to_vec_pretty(stats)?)?;
        }
        if let Some(trigger) = &output.trigger_input {
            std::fs::write(dir.join("trigger.bin"), trigger)?;
        }
        if let Some(err) = &output.corpus_error {
            std::fs::write(dir.join("corpus_error.txt"), err)?;
        }
    }

    let failures = run
        .report
        .trial_records
        .iter()
        .filter(|r| r.corpus_error.is_some())
        .count();
    println!(
        "campaign: {} targets x {} strategies x {} trials -> {}",
        run.report.targets.len(),
        run.report.strategies.len(),
        run.report.trials_per_strategy,
        out.join("report.json").display()
    );
    for comparison in &run.report.comparisons {
        println!(
            "  {} {} vs {}: speedup={} reach_ratio={} p={}",
            comparison.target_id,
            comparison.baseline,
            comparison.subject,
            comparison
                .speedup
                .map(|v| format!("{v:.2}x"))
                .unwrap_or_else(|| "N.A".to_string()),
            comparison
                .reach_ratio
                .map(|v| format!("{v:.2}x"))
                .unwrap_or_else(|| "N.A".to_string()),
            comparison
                .p_two_sided
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".to_string()),
        );
    }
    if failures > 0 {
        eprintln!("warning: {failures} trials had corpus build failures");
        return Ok(EXIT_PARTIAL_FAILURE);
    }
    Ok(EXIT_OK)
}

fn cmd_report(report_path: &Path, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(report_path)?;
    let report: experiment::CampaignReport = serde_json::from_str(&text)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| report_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("report.csv"), experiment::report_csv(&report))?;
    match experiment::coverage_reach_csv(&report) {
        Ok(csv) => std::fs::write(out_dir.join("coverage_reach.csv"), csv)?,
        Err(e) => log::warn!("skipping coverage_reach.csv: {e}"),
    }
    println!("wrote tables to {}", out_dir.display());
    Ok(EXIT_OK)
}

fn cmd_probe(cfg: &Config) -> Result<i32> {
    let gateway = gateway_from_config(&cfg.llm)?;
    let report = gateway.probe();
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(EXIT_OK)
}
