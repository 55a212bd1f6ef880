//! Cross-module integration: the full pipeline through the library API and
//! the CLI binary, against the shipped fixtures and the built-in scriptbook.

use std::path::{Path, PathBuf};
use std::process::Command;

use iscbench::bundle::load_bundle;
use iscbench::config::Config;
use iscbench::experiment::{self, StrategyKind};
use iscbench::formats::{sniff, FormatTag, Sniff};
use iscbench::fuzzer;
use iscbench::llm::gateway_from_config;
use iscbench::targets;

fn fixture(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iscbench"))
}

fn small_config() -> Config {
    let mut cfg = Config::default();
    cfg.fuzz.exec_budget = 50_000;
    cfg.fuzz.time_budget_secs = 0;
    cfg
}

#[test]
fn pipeline_builds_a_triggering_corpus_from_the_demo_bundle() {
    let bundle = load_bundle(&fixture("bundles/mini-doc-demo")).unwrap();
    let cfg = small_config();
    let gateway = gateway_from_config(&cfg.llm).unwrap();
    let pipeline = experiment::run_isc_pipeline(&bundle, &cfg, gateway.as_ref()).unwrap();

    assert_eq!(pipeline.candidates.len(), 10);
    assert_eq!(pipeline.scripts.len(), 30);
    assert!(!pipeline.corpus.is_empty());
    for seed in &pipeline.corpus {
        assert_eq!(sniff(FormatTag::MiniDoc, &seed.bytes), Sniff::Compliant);
    }

    // The ranked corpus leads with the smallest seed, which encodes the
    // maintenance key and triggers immediately.
    let target = targets::find_target("mini-doc-parser").unwrap();
    let corpus: Vec<Vec<u8>> = pipeline.corpus.iter().map(|a| a.bytes.clone()).collect();
    let fuzz_cfg = cfg.fuzz.to_fuzz_config("DOC001", 7);
    let outcome = fuzzer::fuzz(target, &corpus, &fuzz_cfg).unwrap();
    assert!(outcome.stats.triggered);
    assert_eq!(outcome.stats.execs_to_trigger, Some(1));
}

#[test]
fn random_llm_corpus_reaches_but_does_not_instantly_trigger() {
    let cfg = small_config();
    let gateway = gateway_from_config(&cfg.llm).unwrap();
    let corpus = experiment::build_random_llm_corpus(FormatTag::MiniDoc, &cfg, gateway.as_ref())
        .unwrap();
    assert_eq!(corpus.len(), 10);
    let target = targets::find_target("mini-doc-parser").unwrap();
    for seed in &corpus {
        let trace = target.run(seed);
        assert!(trace.reached(0), "random seeds carry the extension prefix");
        assert!(!trace.triggered(0), "random seeds must not know the key");
    }
}

#[test]
fn provided_and_empty_like_corpora_are_format_valid_and_blind_to_the_bug() {
    for format in FormatTag::all() {
        for seed in experiment::provided_corpus(format) {
            assert_eq!(sniff(format, &seed), Sniff::Compliant);
        }
    }
    let target = targets::find_target("mini-doc-parser").unwrap();
    for seed in experiment::provided_corpus(FormatTag::MiniDoc) {
        assert!(!target.run(&seed).reached(0));
    }
}

#[test]
fn derive_trial_seed_separates_cells() {
    let a = experiment::derive_trial_seed(42, "t", StrategyKind::Isc4dgf, 0);
    let b = experiment::derive_trial_seed(42, "t", StrategyKind::Isc4dgf, 1);
    let c = experiment::derive_trial_seed(42, "t", StrategyKind::Provided, 0);
    let d = experiment::derive_trial_seed(43, "t", StrategyKind::Isc4dgf, 0);
    assert!(a != b && a != c && a != d);
    assert_eq!(a, experiment::derive_trial_seed(42, "t", StrategyKind::Isc4dgf, 0));
}

#[test]
fn campaign_cardinality_two_strategies_one_target() {
    let bundle = load_bundle(&fixture("bundles/mini-doc-demo")).unwrap();
    let mut cfg = small_config();
    cfg.fuzz.exec_budget = 5_000;
    let gateway = gateway_from_config(&cfg.llm).unwrap();
    let run = experiment::run_campaign(
        &[bundle],
        &[StrategyKind::Isc4dgf, StrategyKind::EmptyLike],
        10,
        &cfg,
        gateway.as_ref(),
    )
    .unwrap();
    assert_eq!(run.report.trial_records.len(), 20);
    assert_eq!(run.report.comparisons.len(), 1);
    let no_trigger = &run.report.aggregates["mini-doc-parser"]["empty_like"];
    assert_eq!(no_trigger.trigger_rate, 0.0);
    assert_eq!(no_trigger.mean_time_to_trigger_secs, None);
    let cmp = &run.report.comparisons[0];
    assert_eq!(cmp.speedup, None, "N.A when the baseline never triggers");
    assert_eq!(cmp.reach_ratio, None);
}

#[test]
fn aggregation_conserves_reach_sums() {
    let bundle = load_bundle(&fixture("bundles/mini-doc-demo")).unwrap();
    let mut cfg = small_config();
    cfg.fuzz.exec_budget = 3_000;
    let gateway = gateway_from_config(&cfg.llm).unwrap();
    let run = experiment::run_campaign(
        &[bundle],
        &[StrategyKind::RandomLlm],
        4,
        &cfg,
        gateway.as_ref(),
    )
    .unwrap();
    let agg = &run.report.aggregates["mini-doc-parser"]["random_llm"];
    assert_eq!(agg.mean_reaches * 4.0, agg.sum_reaches as f64);
}

#[test]
fn coverage_table_errors_name_the_missing_strategy() {
    let bundle = load_bundle(&fixture("bundles/mini-doc-demo")).unwrap();
    let mut cfg = small_config();
    cfg.fuzz.exec_budget = 1_000;
    let gateway = gateway_from_config(&cfg.llm).unwrap();
    let run = experiment::run_campaign(
        &[bundle],
        &[StrategyKind::Isc4dgf, StrategyKind::EmptyLike],
        1,
        &cfg,
        gateway.as_ref(),
    )
    .unwrap();
    match experiment::coverage_vs_reach_table(&run.report, StrategyKind::Provided) {
        Err(iscbench::Error::MissingStrategy(name)) => assert_eq!(name, "provided"),
        other => panic!("expected MissingStrategy, got {other:?}"),
    }
}

#[test]
fn identical_strategies_compare_at_unity() {
    // Same aggregate on both sides: delta 0%, multiplier 1.
    let bundle = load_bundle(&fixture("bundles/mini-doc-demo")).unwrap();
    let mut cfg = small_config();
    cfg.fuzz.exec_budget = 2_000;
    let gateway = gateway_from_config(&cfg.llm).unwrap();
    let run = experiment::run_campaign(
        &[bundle],
        &[StrategyKind::Isc4dgf, StrategyKind::Provided],
        2,
        &cfg,
        gateway.as_ref(),
    )
    .unwrap();
    let mut report = run.report.clone();
    let isc = report.aggregates["mini-doc-parser"]["isc4dgf"].clone();
    report
        .aggregates
        .get_mut("mini-doc-parser")
        .unwrap()
        .insert("provided".to_string(), isc);
    let rows = experiment::coverage_vs_reach_table(&report, StrategyKind::Provided).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].coverage_delta_pct, 0.0);
    assert_eq!(rows[0].reach_multiplier, Some(1.0));
}

// ---------------------------------------------------------------------------
// CLI binary behavior.
// ---------------------------------------------------------------------------

#[test]
fn cli_refine_writes_k_prompt_files_and_k1_override_writes_one() {
    let out = tempfile::TempDir::new().unwrap();
    let status = bin()
        .args(["refine", "--bundle"])
        .arg(fixture("bundles/mini-doc-demo"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let count = std::fs::read_dir(out.path().join("prompts")).unwrap().count();
    assert_eq!(count, 10);

    let out1 = tempfile::TempDir::new().unwrap();
    let status = bin()
        .args(["refine", "--candidates", "1", "--bundle"])
        .arg(fixture("bundles/mini-doc-demo"))
        .arg("--out")
        .arg(out1.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_dir(out1.path().join("prompts")).unwrap().count(), 1);
}

#[test]
fn cli_missing_bundle_dir_exits_2() {
    let status = bin()
        .args(["refine", "--bundle", "/nonexistent/bundle-dir"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_unknown_target_exits_2() {
    let corpus = tempfile::TempDir::new().unwrap();
    std::fs::write(corpus.path().join("seed-0.bin"), b"x").unwrap();
    let status = bin()
        .args(["fuzz", "--target", "no-such-parser", "--corpus"])
        .arg(corpus.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_fuzz_respects_budget_and_triggers_on_witness() {
    let target = targets::find_target("mini-doc-parser").unwrap();
    let corpus = tempfile::TempDir::new().unwrap();
    std::fs::write(corpus.path().join("seed-0.bin"), &target.bugs[0].witness).unwrap();
    let out = tempfile::TempDir::new().unwrap();
    let status = bin()
        .args(["fuzz", "--target", "mini-doc-parser", "--exec-budget", "500", "--corpus"])
        .arg(corpus.path())
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let stats: iscbench::fuzzer::FuzzTrialStats =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("stats.json")).unwrap())
            .unwrap();
    assert!(stats.triggered);
    assert!(stats.total_execs <= 500);
    assert!(out.path().join("trigger.bin").is_file());
}

#[test]
fn cli_build_corpus_reruns_are_byte_identical() {
    let out_a = tempfile::TempDir::new().unwrap();
    let out_b = tempfile::TempDir::new().unwrap();
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["build-corpus", "--bundle"])
            .arg(fixture("bundles/mini-doc-demo"))
            .arg("--out")
            .arg(out.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let dir_a = out_a.path().join("corpus");
    let dir_b = out_b.path().join("corpus");
    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .collect();
    names.sort();
    assert!(names.len() >= 2);
    for name in names {
        assert_eq!(
            std::fs::read(dir_a.join(&name)).unwrap(),
            std::fs::read(dir_b.join(&name)).unwrap(),
            "corpus file {name} differs between reruns"
        );
    }
}

#[test]
fn cli_all_failing_scripts_exit_3() {
    let dir = tempfile::TempDir::new().unwrap();
    let book = serde_json::json!({
        "default_response": "no code here",
        "entries": [
            {"prompt_contains": "Please summarize the above information concisely",
             "bucket": "greedy", "responses": ["summary zero"]},
            {"prompt_contains": "Please summarize the above information concisely",
             "bucket": "diverse", "responses": ["alt a", "alt b", "alt c"]},
            {"prompt_contains": "Generate Python code",
             "bucket": "any", "responses": ["```python\nraise SystemExit(1)\n```"]}
        ]
    });
    let book_path = dir.path().join("book.json");
    std::fs::write(&book_path, serde_json::to_vec_pretty(&book).unwrap()).unwrap();
    let config_path = dir.path().join("config.toml");
    std::fs::write(
        &config_path,
        format!("[llm]\nscriptbook = {:?}\n", book_path.to_string_lossy()),
    )
    .unwrap();

    let status = bin()
        .arg("--config")
        .arg(&config_path)
        .args(["build-corpus", "--candidates", "2", "--bundle"])
        .arg(fixture("bundles/mini-doc-demo"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn cli_campaign_json_only_and_strategy_subset() {
    let out = tempfile::TempDir::new().unwrap();
    let status = bin()
        .args([
            "campaign",
            "--strategies",
            "isc4dgf,empty_like",
            "--trials",
            "2",
            "--exec-budget",
            "5000",
            "--json-only",
            "--out",
        ])
        .arg(out.path())
        .arg(fixture("bundles/mini-doc-demo"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("report.json").is_file());
    assert!(!out.path().join("report.csv").exists(), "--json-only emits no CSV");
    let report: iscbench::experiment::CampaignReport =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report.strategies.len(), 2);
    assert_eq!(report.trial_records.len(), 4);
}

#[test]
fn cli_report_regenerates_tables_from_json() {
    let out = tempfile::TempDir::new().unwrap();
    let status = bin()
        .args([
            "campaign",
            "--strategies",
            "isc4dgf,provided",
            "--trials",
            "1",
            "--exec-budget",
            "2000",
            "--out",
        ])
        .arg(out.path())
        .arg(fixture("bundles/mini-doc-demo"))
        .status()
        .unwrap();
    assert!(status.success());
    let tables = tempfile::TempDir::new().unwrap();
    let status = bin()
        .args(["report", "--report"])
        .arg(out.path().join("report.json"))
        .arg("--out")
        .arg(tables.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(tables.path().join("report.csv")).unwrap();
    assert_eq!(
        csv,
        std::fs::read_to_string(out.path().join("report.csv")).unwrap(),
        "regenerated table must match the campaign's own"
    );
    assert!(tables.path().join("coverage_reach.csv").is_file());
}

#[test]
fn cli_probe_llm_reports_mock_healthy() {
    let output = bin().arg("probe-llm").output().unwrap();
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["healthy"], serde_json::Value::Bool(true));
    assert_eq!(report["backend_id"], "mock");
}
