//! Desk-scale workbench for studying how the initial seed corpus steers
//! directed grey-box fuzzing.
//!
//! The pipeline refines user-supplied vulnerability context into candidate
//! prompts, asks a pluggable completion backend for seed-generator scripts,
//! executes those scripts in a sandbox, screens and ranks the resulting
//! seeds into an initial corpus, and hands the corpus to an embedded
//! coverage-guided fuzzer running against instrumented toy targets. A
//! campaign layer compares corpus strategies across trials with trigger
//! times, reach counts, ratios, and exact Mann-Whitney p-values.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod fuzzer;
pub mod llm;
pub mod refinery;
pub mod selector;
pub mod stats;
pub mod synthesis;
pub mod targets;

pub use error::{Error, Result};
