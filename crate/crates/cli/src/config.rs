//! The pipeline configuration file (TOML) and its resolution against
//! command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use collab_core::eval::{EvalConfig, Protocol};
use collab_core::explain::ExplainConfig;
use collab_core::graph::TimeWindows;
use collab_core::models::{ModelKind, TrainConfig};
use collab_core::synth::SynthConfig;
use collab_core::RunMeta;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Dataset directory; `<out_dir>/dataset` when unset.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    CrossValidation,
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub protocol: ProtocolKind,
    pub k: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub models: Vec<ModelKind>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            protocol: ProtocolKind::CrossValidation,
            k: 5,
            test_fraction: 0.2,
            seed: 7,
            models: ModelKind::COMPARED.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateSection {
    /// Also report correlations over all cancer types together.
    pub pooled: bool,
}

impl Default for CorrelateSection {
    fn default() -> Self {
        CorrelateSection { pooled: true }
    }
}

/// Everything one experiment needs. Omitted blocks and keys take their
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub windows: TimeWindows,
    pub model: TrainConfig,
    pub eval: EvalSection,
    pub explain: ExplainConfig,
    pub correlate: CorrelateSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            paths: Paths::default(),
            synth: SynthConfig::default(),
            windows: TimeWindows::default(),
            model: TrainConfig::default(),
            eval: EvalSection::default(),
            explain: ExplainConfig::default(),
            correlate: CorrelateSection::default(),
        }
    }
}

/// The blocks that define an experiment's results. Locations are left out so
/// the same experiment hashes identically wherever it is written.
#[derive(Serialize)]
struct HashedBlocks<'a> {
    synth: &'a SynthConfig,
    windows: &'a TimeWindows,
    model: &'a TrainConfig,
    eval: &'a EvalSection,
    explain: &'a ExplainConfig,
    correlate: &'a CorrelateSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Sets every seed (generator, evaluation, explanation) to `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.eval.seed = seed;
        self.explain.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.windows.validate()?;
        self.eval_config().validate()?;
        if self.explain.n_permutations == 0 {
            anyhow::bail!(collab_core::Error::config(
                "explain.n_permutations",
                "must be at least 1"
            ));
        }
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            protocol: match self.eval.protocol {
                ProtocolKind::CrossValidation => Protocol::CrossValidation { k: self.eval.k },
                ProtocolKind::Holdout => Protocol::Holdout {
                    test_fraction: self.eval.test_fraction,
                },
            },
            seed: self.eval.seed,
            models: self.eval.models.clone(),
            train: self.model,
        }
    }

    /// SHA-256 (hex) of the result-defining blocks in canonical JSON.
    pub fn hash(&self) -> String {
        let blocks = HashedBlocks {
            synth: &self.synth,
            windows: &self.windows,
            model: &self.model,
            eval: &self.eval,
            explain: &self.explain,
            correlate: &self.correlate,
        };
        let json = serde_json::to_vec(&blocks).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn meta(&self, seed: u64) -> RunMeta {
        RunMeta {
            seed,
            config_hash: self.hash(),
            tool_version: TOOL_VERSION.into(),
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.paths
            .dataset
            .clone()
            .unwrap_or_else(|| self.out_dir.join("dataset"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}
