//! Workbench configuration: one TOML file, flag overrides at the CLI layer.
//!
//! Every key has a documented default; unknown keys are rejected so typos
//! fail loudly instead of silently running a different experiment. Secrets
//! never live here: `llm.api_key_env` names an environment variable instead.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::fuzzer::{FuzzConfig, DEFAULT_ENERGY, DEFAULT_VIRTUAL_EXEC_MICROS};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Root seed from which every per-trial RNG seed is derived.
    pub master_seed: u64,
    pub llm: LlmConfig,
    pub refine: RefineConfig,
    pub synth: SynthConfig,
    pub select: SelectConfig,
    pub fuzz: FuzzSettings,
    pub campaign: CampaignConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            master_seed: 42,
            llm: LlmConfig::default(),
            refine: RefineConfig::default(),
            synth: SynthConfig::default(),
            select: SelectConfig::default(),
            fuzz: FuzzSettings::default(),
            campaign: CampaignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    /// `mock` or `remote`.
    pub backend: String,
    pub model: String,
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_inflight: u32,
    pub max_tokens: u32,
    /// Scriptbook path for the mock backend; the built-in book when unset.
    pub scriptbook: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            backend: "mock".to_string(),
            model: "gpt-4-0613".to_string(),
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            max_inflight: 4,
            max_tokens: 1024,
            scriptbook: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    /// Number of candidate prompts (K).
    pub candidates: u32,
    /// Sampling temperature for the diverse draws; the first draw is greedy.
    pub temperature: f64,
    /// Diverse-draw budget is `retry_factor * candidates`.
    pub retry_factor: u32,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            candidates: 10,
            temperature: 0.8,
            retry_factor: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub scripts_per_prompt: u32,
    /// Command used to run generator scripts; extra tokens become arguments.
    pub interpreter: String,
    pub timeout_secs: u64,
    pub output_cap_bytes: usize,
    /// 0 means one worker per available CPU.
    pub max_parallel: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scripts_per_prompt: 3,
            interpreter: "python3".to_string(),
            timeout_secs: 10,
            output_cap_bytes: 1 << 20,
            max_parallel: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SelectConfig {
    pub corpus_size: u32,
    pub max_seed_bytes: usize,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            corpus_size: 10,
            max_seed_bytes: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FuzzSettings {
    /// 0 disables the execution budget.
    pub exec_budget: u64,
    /// Virtual seconds; 0 disables the time budget.
    pub time_budget_secs: u64,
    pub max_input_bytes: usize,
    pub energy: u32,
    pub havoc_stacking_max: u32,
    pub reach_boost: bool,
    pub virtual_exec_micros: u64,
    pub audit_log: bool,
}

impl Default for FuzzSettings {
    fn default() -> Self {
        FuzzSettings {
            exec_budget: 2_000_000,
            time_budget_secs: 120,
            max_input_bytes: 1 << 20,
            energy: DEFAULT_ENERGY,
            havoc_stacking_max: 16,
            reach_boost: false,
            virtual_exec_micros: DEFAULT_VIRTUAL_EXEC_MICROS,
            audit_log: false,
        }
    }
}

impl FuzzSettings {
    /// Materialize a per-trial fuzzer configuration.
    pub fn to_fuzz_config(&self, target_bug: &str, rng_seed: u64) -> FuzzConfig {
        FuzzConfig {
            rng_seed,
            time_budget: (self.time_budget_secs > 0)
                .then(|| Duration::from_secs(self.time_budget_secs)),
            exec_budget: (self.exec_budget > 0).then_some(self.exec_budget),
            target_bug: target_bug.to_string(),
            havoc_stacking: (1, self.havoc_stacking_max.max(1)),
            max_input_bytes: self.max_input_bytes,
            energy: self.energy,
            reach_boost: self.reach_boost,
            virtual_exec_micros: self.virtual_exec_micros.max(1),
            audit: self.audit_log,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub trials: u32,
    /// Strategy names: isc4dgf, random_llm, provided, empty_like.
    pub strategies: Vec<String>,
    /// 0 means one worker per available CPU.
    pub max_parallel: u32,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            trials: 10,
            strategies: vec![
                "isc4dgf".to_string(),
                "random_llm".to_string(),
                "provided".to_string(),
                "empty_like".to_string(),
            ],
            max_parallel: 0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| Error::Toml(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.llm.backend != "mock" && self.llm.backend != "remote" {
            return Err(Error::Config(format!(
                "llm.backend must be mock or remote, got {:?}",
                self.llm.backend
            )));
        }
        if !(0.0..=2.0).contains(&self.refine.temperature) {
            return Err(Error::Config(
                "refine.temperature must be in [0, 2]".to_string(),
            ));
        }
        if self.refine.candidates == 0 {
            return Err(Error::Config("refine.candidates must be >= 1".to_string()));
        }
        if self.synth.scripts_per_prompt == 0 {
            return Err(Error::Config(
                "synth.scripts_per_prompt must be >= 1".to_string(),
            ));
        }
        if self.select.corpus_size == 0 {
            return Err(Error::Config("select.corpus_size must be >= 1".to_string()));
        }
        if self.fuzz.exec_budget == 0 && self.fuzz.time_budget_secs == 0 {
            return Err(Error::Config(
                "one of fuzz.exec_budget/fuzz.time_budget_secs must be set".to_string(),
            ));
        }
        if self.campaign.trials == 0 {
            return Err(Error::Config("campaign.trials must be >= 1".to_string()));
        }
        Ok(())
    }

    pub fn worker_count(setting: u32) -> usize {
        if setting > 0 {
            setting as usize
        } else {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let toml_text = "master_seed = 7\nnot_a_key = true\n";
        let parsed: std::result::Result<Config, _> = toml::from_str(toml_text);
        assert!(parsed.is_err());
    }

    #[test]
    fn nested_unknown_keys_are_rejected() {
        let toml_text = "[llm]\napi_key = \"secret\"\n";
        let parsed: std::result::Result<Config, _> = toml::from_str(toml_text);
        assert!(parsed.is_err(), "credentials in the config file must be refused");
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let toml_text = "[refine]\ncandidates = 3\n";
        let cfg: Config = toml::from_str(toml_text).unwrap();
        assert_eq!(cfg.refine.candidates, 3);
        assert_eq!(cfg.refine.temperature, 0.8);
        assert_eq!(cfg.master_seed, 42);
    }

    #[test]
    fn fuzz_settings_materialize_budgets() {
        let s = FuzzSettings::default();
        let fc = s.to_fuzz_config("DOC001", 9);
        assert_eq!(fc.exec_budget, Some(2_000_000));
        assert_eq!(fc.time_budget, Some(Duration::from_secs(120)));
        assert_eq!(fc.rng_seed, 9);
        // Exec budget binds first under the defaults: 2e6 execs at 50us is
        // 100 virtual seconds, under the 120s time budget.
        assert_eq!(fc.budget_virtual_secs(), 100.0);
    }
}
