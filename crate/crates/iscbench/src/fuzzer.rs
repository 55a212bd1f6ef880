//! Coverage-guided mutation fuzzer with reach/trigger accounting.
//!
//! The engine is a simplified AFL-style loop: a seed queue cycled round-robin,
//! a deterministic stage (bit flips, byte flips, bounded arithmetic,
//! interesting-value substitution) run once per entry, then stacked havoc
//! rounds weighted by entry energy. Inputs whose traces contain novel edges
//! join the queue; the covered-edge set only grows. A trial stops at the
//! first trigger of the designated bug or when its budget runs out.
//!
//! One trial is strictly single-threaded and fully deterministic: the RNG is
//! ChaCha8 seeded from `rng_seed`, and the clock is virtual (a fixed cost per
//! execution), so identical inputs yield bit-identical stats across runs and
//! platforms. Run trials in parallel for wall-clock speed; never share state
//! between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::targets::{EdgeSet, ExecutionTrace, TargetProgram};

/// Default virtual cost of one execution, in microseconds. 50us mimics the
/// throughput of a conventional instrumented-binary fuzzer, keeping reported
/// times on a familiar scale while staying reproducible.
pub const DEFAULT_VIRTUAL_EXEC_MICROS: u64 = 50;

pub const DEFAULT_ENERGY: u32 = 8;
pub const DEFAULT_HAVOC_STACKING: (u32, u32) = (1, 16);

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub rng_seed: u64,
    /// Virtual time budget; at least one of the two budgets must be set.
    pub time_budget: Option<Duration>,
    pub exec_budget: Option<u64>,
    pub target_bug: String,
    pub havoc_stacking: (u32, u32),
    pub max_input_bytes: usize,
    /// Havoc rounds per queue cycle; doubled for entries whose discovery
    /// covered the bug-site edge when `reach_boost` is on.
    pub energy: u32,
    pub reach_boost: bool,
    pub virtual_exec_micros: u64,
    /// Record one audit entry per execution. Only sensible at small budgets.
    pub audit: bool,
}

impl FuzzConfig {
    pub fn new(target_bug: impl Into<String>, rng_seed: u64) -> FuzzConfig {
        FuzzConfig {
            rng_seed,
            time_budget: None,
            exec_budget: Some(1_000_000),
            target_bug: target_bug.into(),
            havoc_stacking: DEFAULT_HAVOC_STACKING,
            max_input_bytes: 1 << 20,
            energy: DEFAULT_ENERGY,
            reach_boost: false,
            virtual_exec_micros: DEFAULT_VIRTUAL_EXEC_MICROS,
            audit: false,
        }
    }

    /// Virtual seconds at which this configuration stops a non-triggering
    /// trial. Used for censored ranks in campaign statistics.
    pub fn budget_virtual_secs(&self) -> f64 {
        let from_execs = self
            .exec_budget
            .map(|e| (e * self.virtual_exec_micros) as f64 / 1e6);
        let from_time = self.time_budget.map(|d| d.as_secs_f64());
        match (from_execs, from_time) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QueueEntry {
    pub bytes: Vec<u8>,
    pub discovery_exec: u64,
    pub coverage_novelty: EdgeSet,
    pub energy: u32,
    /// Seeds from the initial corpus; the only entries allowed an empty
    /// novelty set.
    pub initial: bool,
    det_done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzTrialStats {
    pub target_id: String,
    pub bug_id: String,
    pub rng_seed: u64,
    pub triggered: bool,
    pub time_to_trigger_secs: Option<f64>,
    pub execs_to_trigger: Option<u64>,
    pub reaches_before_trigger: u64,
    pub total_reaches: u64,
    pub total_execs: u64,
    pub edges_covered: u32,
    pub total_edges: u16,
    pub coverage_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub exec: u64,
    pub input_hex: String,
    pub reached: bool,
    pub triggered: bool,
}

#[derive(Debug, Clone)]
pub struct FuzzOutcome {
    pub stats: FuzzTrialStats,
    pub trigger_input: Option<Vec<u8>>,
    pub audit: Option<Vec<AuditRecord>>,
}

/// Thin wrapper over the target for crash-report validation.
pub fn replay(target: &TargetProgram, input: &[u8]) -> ExecutionTrace {
    target.run(input)
}

/// Run one fuzzing trial.
pub fn fuzz(target: &TargetProgram, corpus: &[Vec<u8>], cfg: &FuzzConfig) -> Result<FuzzOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for seed in corpus {
        if seed.len() > cfg.max_input_bytes {
            return Err(Error::SeedTooLarge {
                size: seed.len(),
                max: cfg.max_input_bytes,
            });
        }
    }
    if cfg.exec_budget.is_none() && cfg.time_budget.is_none() {
        return Err(Error::Config(
            "at least one of exec_budget/time_budget must be set".to_string(),
        ));
    }
    let bug_index = target.bug_index(&cfg.target_bug)?;
    let site_edge = target.bugs[bug_index].site_edge;

    let mut trial = Trial {
        target,
        bug_index,
        site_edge,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        covered: EdgeSet::default(),
        queue: Vec::new(),
        total_execs: 0,
        total_reaches: 0,
        triggered: false,
        execs_to_trigger: None,
        reaches_before_trigger: 0,
        trigger_input: None,
        audit: if cfg.audit { Some(Vec::new()) } else { None },
    };

    // Intake: every corpus seed joins the queue, novel or not.
    for seed in corpus {
        if trial.done() {
            break;
        }
        let novelty = trial.execute(seed);
        let discovery_exec = trial.total_execs;
        trial.push_entry(seed.clone(), discovery_exec, novelty, true);
    }

    let mut cursor = 0usize;
    while !trial.done() {
        let idx = cursor % trial.queue.len();
        if !trial.queue[idx].det_done {
            trial.queue[idx].det_done = true;
            trial.deterministic_stage(idx);
        }
        let rounds = trial.queue[idx].energy;
        for _ in 0..rounds {
            if trial.done() {
                break;
            }
            let mutated = trial.havoc_round(idx);
            let novelty = trial.execute(&mutated);
            if !novelty.is_empty() && !trial.triggered {
                let discovery_exec = trial.total_execs;
                trial.push_entry(mutated, discovery_exec, novelty, false);
            }
        }
        cursor += 1;
    }

    Ok(trial.finish())
}

struct Trial<'a> {
    target: &'a TargetProgram,
    bug_index: usize,
    site_edge: u16,
    cfg: &'a FuzzConfig,
    rng: ChaCha8Rng,
    covered: EdgeSet,
    queue: Vec<QueueEntry>,
    total_execs: u64,
    total_reaches: u64,
    triggered: bool,
    execs_to_trigger: Option<u64>,
    reaches_before_trigger: u64,
    trigger_input: Option<Vec<u8>>,
    audit: Option<Vec<AuditRecord>>,
}

impl Trial<'_> {
    fn virtual_elapsed_micros(&self) -> u64 {
        self.total_execs * self.cfg.virtual_exec_micros
    }

    fn done(&self) -> bool {
        if self.triggered {
            return true;
        }
        if let Some(budget) = self.cfg.exec_budget {
            if self.total_execs >= budget {
                return true;
            }
        }
        if let Some(budget) = self.cfg.time_budget {
            if self.virtual_elapsed_micros() >= budget.as_micros() as u64 {
                return true;
            }
        }
        false
    }

    /// Run one input, update counters and coverage, return the novel edges.
    fn execute(&mut self, input: &[u8]) -> EdgeSet {
        let trace = self.target.run(input);
        self.total_execs += 1;
        let reached = trace.reached(self.bug_index);
        if reached {
            self.total_reaches += 1;
        }
        let novelty = trace.edges.difference(self.covered);
        self.covered = self.covered.union(trace.edges);
        let triggered = trace.triggered(self.bug_index);
        if let Some(audit) = self.audit.as_mut() {
            audit.push(AuditRecord {
                exec: self.total_execs,
                input_hex: hex::encode(input),
                reached,
                triggered,
            });
        }
        if triggered {
            self.triggered = true;
            self.execs_to_trigger = Some(self.total_execs);
            self.reaches_before_trigger = self.total_reaches;
            self.trigger_input = Some(input.to_vec());
        }
        novelty
    }

    fn push_entry(&mut self, bytes: Vec<u8>, discovery_exec: u64, novelty: EdgeSet, initial: bool) {
        debug_assert!(initial || !novelty.is_empty());
        let mut energy = self.cfg.energy.max(1);
        if self.cfg.reach_boost && novelty.contains(self.site_edge) {
            energy *= 2;
        }
        self.queue.push(QueueEntry {
            bytes,
            discovery_exec,
            coverage_novelty: novelty,
            energy,
            initial,
            det_done: false,
        });
    }

    fn admit_if_novel(&mut self, buf: &[u8]) {
        if self.done() {
            return;
        }
        let novelty = self.execute(buf);
        if !novelty.is_empty() && !self.triggered {
            let discovery_exec = self.total_execs;
            self.push_entry(buf.to_vec(), discovery_exec, novelty, false);
        }
    }

    /// Deterministic stage over one queue entry, AFL-style: walking bit
    /// flips, byte flips, bounded +/-35 arithmetic at 8/16/32-bit widths in
    /// both byte orders, then interesting-value substitution.
    fn deterministic_stage(&mut self, idx: usize) {
        const ARITH_MAX: u64 = 35;
        const INTEREST8: [i8; 9] = [-128, -1, 0, 1, 16, 32, 64, 100, 127];
        const INTEREST16: [i16; 10] =
            [-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767];
        const INTEREST32: [i32; 8] = [
            i32::MIN,
            -100663046,
            -32769,
            32768,
            65535,
            65536,
            100663045,
            i32::MAX,
        ];

        let mut buf = self.queue[idx].bytes.clone();
        let len = buf.len();

        for bit in 0..len * 8 {
            if self.done() {
                return;
            }
            buf[bit / 8] ^= 1 << (bit % 8);
            self.admit_if_novel(&buf.clone());
            buf[bit / 8] ^= 1 << (bit % 8);
        }

        for i in 0..len {
            if self.done() {
                return;
            }
            buf[i] ^= 0xff;
            self.admit_if_novel(&buf.clone());
            buf[i] ^= 0xff;
        }

        for i in 0..len {
            let orig = buf[i];
            for d in 1..=ARITH_MAX as u8 {
                if self.done() {
                    return;
                }
                buf[i] = orig.wrapping_add(d);
                self.admit_if_novel(&buf.clone());
                buf[i] = orig.wrapping_sub(d);
                self.admit_if_novel(&buf.clone());
                buf[i] = orig;
            }
        }

        for i in 0..len.saturating_sub(1) {
            let orig = [buf[i], buf[i + 1]];
            for d in 1..=ARITH_MAX as u16 {
                if self.done() {
                    return;
                }
                for (value, bytes_of) in [
                    (u16::from_le_bytes(orig).wrapping_add(d), true),
                    (u16::from_le_bytes(orig).wrapping_sub(d), true),
                    (u16::from_be_bytes(orig).wrapping_add(d), false),
                    (u16::from_be_bytes(orig).wrapping_sub(d), false),
                ] {
                    let enc = if bytes_of {
                        value.to_le_bytes()
                    } else {
                        value.to_be_bytes()
                    };
                    buf[i] = enc[0];
                    buf[i + 1] = enc[1];
                    self.admit_if_novel(&buf.clone());
                    buf[i] = orig[0];
                    buf[i + 1] = orig[1];
                }
            }
        }

        for i in 0..len.saturating_sub(3) {
            let orig = [buf[i], buf[i + 1], buf[i + 2], buf[i + 3]];
            for d in 1..=ARITH_MAX as u32 {
                if self.done() {
                    return;
                }
                for (value, little) in [
                    (u32::from_le_bytes(orig).wrapping_add(d), true),
                    (u32::from_le_bytes(orig).wrapping_sub(d), true),
                    (u32::from_be_bytes(orig).wrapping_add(d), false),
                    (u32::from_be_bytes(orig).wrapping_sub(d), false),
                ] {
                    let enc = if little {
                        value.to_le_bytes()
                    } else {
                        value.to_be_bytes()
                    };
                    buf[i..i + 4].copy_from_slice(&enc);
                    self.admit_if_novel(&buf.clone());
                    buf[i..i + 4].copy_from_slice(&orig);
                }
            }
        }

        for i in 0..len {
            let orig = buf[i];
            for v in INTEREST8 {
                if self.done() {
                    return;
                }
                buf[i] = v as u8;
                self.admit_if_novel(&buf.clone());
                buf[i] = orig;
            }
        }

        for i in 0..len.saturating_sub(1) {
            let orig = [buf[i], buf[i + 1]];
            for v in INTEREST16 {
                if self.done() {
                    return;
                }
                for enc in [(v as u16).to_le_bytes(), (v as u16).to_be_bytes()] {
                    buf[i] = enc[0];
                    buf[i + 1] = enc[1];
                    self.admit_if_novel(&buf.clone());
                    buf[i] = orig[0];
                    buf[i + 1] = orig[1];
                }
            }
        }

        for i in 0..len.saturating_sub(3) {
            let orig = [buf[i], buf[i + 1], buf[i + 2], buf[i + 3]];
            for v in INTEREST32 {
                if self.done() {
                    return;
                }
                for enc in [(v as u32).to_le_bytes(), (v as u32).to_be_bytes()] {
                    buf[i..i + 4].copy_from_slice(&enc);
                    self.admit_if_novel(&buf.clone());
                    buf[i..i + 4].copy_from_slice(&orig);
                }
            }
        }
    }

    /// One stacked havoc mutation of the entry at `idx`.
    fn havoc_round(&mut self, idx: usize) -> Vec<u8> {
        let mut buf = self.queue[idx].bytes.clone();
        let (lo, hi) = self.cfg.havoc_stacking;
        let n = self.rng.gen_range(lo.max(1)..=hi.max(lo.max(1)));
        for _ in 0..n {
            match self.rng.gen_range(0..7u32) {
                0 => flip_bit(&mut buf, &mut self.rng),
                1 => overwrite_random(&mut buf, &mut self.rng),
                2 => overwrite_interesting(&mut buf, &mut self.rng),
                3 => insert_byte(&mut buf, &mut self.rng, self.cfg.max_input_bytes),
                4 => delete_block(&mut buf, &mut self.rng),
                5 => duplicate_block(&mut buf, &mut self.rng, self.cfg.max_input_bytes),
                _ => {
                    let other = self.rng.gen_range(0..self.queue.len());
                    splice(&mut buf, &self.queue[other].bytes, &mut self.rng);
                    buf.truncate(self.cfg.max_input_bytes);
                }
            }
        }
        buf
    }

    fn finish(mut self) -> FuzzOutcome {
        if !self.triggered {
            self.reaches_before_trigger = self.total_reaches;
        }
        let time_to_trigger_secs = self
            .execs_to_trigger
            .map(|e| (e * self.cfg.virtual_exec_micros) as f64 / 1e6);
        let stats = FuzzTrialStats {
            target_id: self.target.target_id.to_string(),
            bug_id: self.cfg.target_bug.clone(),
            rng_seed: self.cfg.rng_seed,
            triggered: self.triggered,
            time_to_trigger_secs,
            execs_to_trigger: self.execs_to_trigger,
            reaches_before_trigger: self.reaches_before_trigger,
            total_reaches: self.total_reaches,
            total_execs: self.total_execs,
            edges_covered: self.covered.len(),
            total_edges: self.target.total_edges,
            coverage_fraction: self.covered.len() as f64 / self.target.total_edges as f64,
        };
        FuzzOutcome {
            stats,
            trigger_input: self.trigger_input,
            audit: self.audit,
        }
    }
}

fn flip_bit(buf: &mut [u8], rng: &mut ChaCha8Rng) {
    if buf.is_empty() {
        return;
    }
    let bit = rng.gen_range(0..buf.len() * 8);
    buf[bit / 8] ^= 1 << (bit % 8);
}

fn overwrite_random(buf: &mut Vec<u8>, rng: &mut ChaCha8Rng) {
    if buf.is_empty() {
        buf.push(rng.gen());
        return;
    }
    let i = rng.gen_range(0..buf.len());
    buf[i] = rng.gen();
}

fn overwrite_interesting(buf: &mut [u8], rng: &mut ChaCha8Rng) {
    const INTEREST8: [i8; 9] = [-128, -1, 0, 1, 16, 32, 64, 100, 127];
    if buf.is_empty() {
        return;
    }
    let i = rng.gen_range(0..buf.len());
    buf[i] = INTEREST8[rng.gen_range(0..INTEREST8.len())] as u8;
}

fn insert_byte(buf: &mut Vec<u8>, rng: &mut ChaCha8Rng, max_len: usize) {
    if buf.len() >= max_len {
        return;
    }
    let i = rng.gen_range(0..=buf.len());
    buf.insert(i, rng.gen());
}

fn delete_block(buf: &mut Vec<u8>, rng: &mut ChaCha8Rng) {
    if buf.is_empty() {
        return;
    }
    let len = rng.gen_range(1..=buf.len().min(16));
    let start = rng.gen_range(0..=buf.len() - len);
    buf.drain(start..start + len);
}

fn duplicate_block(buf: &mut Vec<u8>, rng: &mut ChaCha8Rng, max_len: usize) {
    if buf.is_empty() || buf.len() >= max_len {
        return;
    }
    let len = rng.gen_range(1..=buf.len().min(32));
    let src = rng.gen_range(0..=buf.len() - len);
    let block: Vec<u8> = buf[src..src + len].to_vec();
    let at = rng.gen_range(0..=buf.len());
    let room = max_len - buf.len();
    let block = &block[..block.len().min(room)];
    for (k, b) in block.iter().enumerate() {
        buf.insert(at + k, *b);
    }
}

fn splice(buf: &mut Vec<u8>, other: &[u8], rng: &mut ChaCha8Rng) {
    if other.is_empty() {
        return;
    }
    let keep = if buf.is_empty() {
        0
    } else {
        rng.gen_range(0..=buf.len())
    };
    let from = rng.gen_range(0..other.len());
    buf.truncate(keep);
    buf.extend_from_slice(&other[from..]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{find_target, Outcome};

    fn doc_target() -> &'static TargetProgram {
        find_target("mini-doc-parser").unwrap()
    }

    fn cfg(budget: u64, seed: u64) -> FuzzConfig {
        let mut c = FuzzConfig::new("DOC001", seed);
        c.exec_budget = Some(budget);
        c
    }

    #[test]
    fn witness_corpus_triggers_on_first_execution() {
        let target = doc_target();
        let corpus = vec![target.bugs[0].witness.clone()];
        let out = fuzz(target, &corpus, &cfg(1000, 1)).unwrap();
        assert!(out.stats.triggered);
        assert_eq!(out.stats.execs_to_trigger, Some(1));
        assert_eq!(out.stats.reaches_before_trigger, 1);
        assert_eq!(out.stats.total_reaches, 1);
        assert_eq!(
            out.stats.time_to_trigger_secs,
            Some(DEFAULT_VIRTUAL_EXEC_MICROS as f64 / 1e6)
        );
        let trigger = out.trigger_input.unwrap();
        assert!(matches!(replay(target, &trigger).outcome, Outcome::Fault(_)));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            fuzz(doc_target(), &[], &cfg(100, 1)),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn oversized_seed_is_rejected_at_intake() {
        let mut c = cfg(100, 1);
        c.max_input_bytes = 8;
        let corpus = vec![vec![0u8; 9]];
        assert!(matches!(
            fuzz(doc_target(), &corpus, &c),
            Err(Error::SeedTooLarge { size: 9, max: 8 })
        ));
    }

    #[test]
    fn identical_configs_give_bit_identical_stats() {
        let target = doc_target();
        let corpus = vec![
            crate::formats::mini_doc_file(&[(b'T', b"hello"), (b'N', &[5])]),
            crate::formats::mini_doc_file(&[(b'Q', &[1, 2, 3, 4])]),
        ];
        let c = cfg(100_000, 77);
        let a = fuzz(target, &corpus, &c).unwrap();
        let b = fuzz(target, &corpus, &c).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.trigger_input, b.trigger_input);
        assert_eq!(
            serde_json::to_string(&a.stats).unwrap(),
            serde_json::to_string(&b.stats).unwrap()
        );
    }

    #[test]
    fn different_seeds_explore_differently() {
        let target = doc_target();
        let corpus = vec![crate::formats::mini_doc_file(&[(b'T', b"abcdefgh")])];
        let a = fuzz(target, &corpus, &cfg(20_000, 1)).unwrap();
        let b = fuzz(target, &corpus, &cfg(20_000, 2)).unwrap();
        // Same budget, but the havoc path differs.
        assert_eq!(a.stats.total_execs, b.stats.total_execs);
        assert_eq!(a.stats.rng_seed, 1);
        assert_eq!(b.stats.rng_seed, 2);
    }

    #[test]
    fn exec_budget_is_respected_exactly() {
        let target = doc_target();
        let corpus = vec![crate::formats::mini_doc_file(&[(b'T', b"x")])];
        let out = fuzz(target, &corpus, &cfg(5_000, 3)).unwrap();
        assert!(!out.stats.triggered);
        assert_eq!(out.stats.total_execs, 5_000);
    }

    #[test]
    fn virtual_time_budget_stops_the_trial() {
        let target = doc_target();
        let corpus = vec![crate::formats::mini_doc_file(&[(b'T', b"x")])];
        let mut c = cfg(1_000_000, 3);
        c.exec_budget = None;
        c.time_budget = Some(Duration::from_millis(100));
        let out = fuzz(target, &corpus, &c).unwrap();
        // 100ms at 50us per exec is exactly 2000 executions.
        assert_eq!(out.stats.total_execs, 2_000);
    }

    #[test]
    fn missing_budgets_are_a_config_error() {
        let mut c = cfg(100, 1);
        c.exec_budget = None;
        c.time_budget = None;
        let corpus = vec![vec![1u8]];
        assert!(matches!(
            fuzz(doc_target(), &corpus, &c),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn queue_entries_after_intake_carry_novelty() {
        // Indirect check via the audit log: recompute reach counts, and make
        // sure coverage only grows (monotonicity is engine-internal, but the
        // replayed traces let the test confirm the reported totals).
        let target = doc_target();
        let corpus = vec![crate::formats::mini_doc_file(&[(b'T', b"seed")])];
        let mut c = cfg(2_000, 11);
        c.audit = true;
        let out = fuzz(target, &corpus, &c).unwrap();
        let audit = out.audit.unwrap();
        assert_eq!(audit.len() as u64, out.stats.total_execs);
        let mut reaches = 0u64;
        let mut covered = EdgeSet::default();
        let mut coverage_sizes = Vec::new();
        for rec in &audit {
            let input = hex::decode(&rec.input_hex).unwrap();
            let trace = replay(target, &input);
            assert_eq!(trace.reached(0), rec.reached);
            if rec.reached {
                reaches += 1;
            }
            covered = covered.union(trace.edges);
            coverage_sizes.push(covered.len());
        }
        assert_eq!(reaches, out.stats.total_reaches);
        assert!(coverage_sizes.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(covered.len(), out.stats.edges_covered);
    }

    #[test]
    fn replay_of_empty_input_is_parse_error() {
        let trace = replay(doc_target(), &[]);
        assert_eq!(trace.outcome, Outcome::ParseError);
        assert_eq!(replay(doc_target(), &[]), trace);
    }
}
