//! Run configuration: one TOML file describing data, vocabulary, model, and
//! training. Every field has a default; unknown keys are rejected so typos
//! surface as config errors instead of silently-ignored settings.
//!
//! Precedence: command-line flags override file values, which override the
//! defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::train::TrainConfig;
use crate::{Error, Result};

/// Vocabulary fitting limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabSection {
    /// Maximum vocabulary size including PAD/UNK (default 10000).
    pub max_size: usize,
    /// Minimum corpus frequency for a token to enter the vocabulary
    /// (default 2).
    pub min_freq: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        VocabSection { max_size: 10000, min_freq: 2 }
    }
}

/// Architecture switches. `vocab_size` is not configured here; it comes
/// from the fitted vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Embedding width d (default 64).
    pub embed_dim: usize,
    /// LSTM hidden width h (default 64).
    pub hidden_dim: usize,
    /// Attention heads H; must divide hidden_dim (default 4).
    pub num_heads: usize,
    /// Output classes C (default 5).
    pub num_classes: usize,
    /// Sequence length L; longer texts are truncated, shorter ones padded
    /// (default 64).
    pub max_len: usize,
    /// Multi-head attention plus fusion on/off (default true).
    pub enable_attention: bool,
    /// TF-IDF embedding gate on/off (default true).
    pub enable_tfidf_gate: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            embed_dim: 64,
            hidden_dim: 64,
            num_heads: 4,
            num_classes: 5,
            max_len: 64,
            enable_attention: true,
            enable_tfidf_gate: true,
        }
    }
}

/// Optimization settings; see `train::TrainConfig` for semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_milestones: Vec<f64>,
    pub grad_clip_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr0: t.lr0,
            decay_factor: t.decay_factor,
            decay_milestones: t.decay_milestones,
            grad_clip_norm: t.grad_clip_norm,
            max_steps: t.max_steps,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
        }
    }
}

/// Everything one run needs. Serialized verbatim into the model artifact so
/// a trained model carries its own provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset CSV path (header `text,label`). No default; required by
    /// `train` and `ablate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    /// Directory for artifacts and reports (default "emoseq-out").
    pub output_dir: String,
    /// Optional display names, indexed by label, used in reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    /// Master seed; split/init/shuffle streams are derived from it
    /// (default 42).
    pub seed: u64,
    /// Fraction of examples in the training split (default 0.7).
    pub train_fraction: f64,
    pub vocab: VocabSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            output_dir: "emoseq-out".into(),
            class_names: None,
            seed: 42,
            train_fraction: 0.7,
            vocab: VocabSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

/// Flag-level overrides collected by the CLI; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data: Option<String>,
    pub output_dir: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr0: Option<f64>,
    pub max_len: Option<usize>,
}

impl RunConfig {
    /// Parse a TOML config file. Unknown keys and type mismatches are
    /// config errors carrying the offending key.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read config '{}': {e}", path.display()),
            ))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text)
            .map_err(|e| Error::Config(format!("config parse failed: {}", e.message())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialization")
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(v) = &o.data {
            self.data = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.lr0 {
            self.train.lr0 = v;
        }
        if let Some(v) = o.max_len {
            self.model.max_len = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1) (got {})",
                self.train_fraction
            )));
        }
        if self.vocab.max_size < 2 {
            return Err(Error::Config("vocab.max_size must be at least 2".into()));
        }
        if let Some(names) = &self.class_names {
            if names.len() != self.model.num_classes {
                return Err(Error::Config(format!(
                    "class_names has {} entries but model.num_classes is {}",
                    names.len(),
                    self.model.num_classes
                )));
            }
        }
        self.to_model_config(self.vocab.max_size, 0).validate()?;
        self.to_train_config(0).validate()
    }

    /// Concrete model config for a fitted vocabulary and a derived init
    /// seed.
    pub fn to_model_config(&self, vocab_size: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.model.embed_dim,
            hidden_dim: self.model.hidden_dim,
            num_heads: self.model.num_heads,
            num_classes: self.model.num_classes,
            max_len: self.model.max_len,
            enable_attention: self.model.enable_attention,
            enable_tfidf_gate: self.model.enable_tfidf_gate,
            seed,
        }
    }

    /// Concrete training config with a derived shuffle seed.
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr0: self.train.lr0,
            decay_factor: self.train.decay_factor,
            decay_milestones: self.train.decay_milestones.clone(),
            seed,
            grad_clip_norm: self.train.grad_clip_norm,
            max_steps: self.train.max_steps,
            adam_beta1: self.train.adam_beta1,
            adam_beta2: self.train.adam_beta2,
            adam_eps: self.train.adam_eps,
        }
    }
}
