use std::fs;
use std::path::{Path, PathBuf};

use answerable_core::corpus::{Granularity, ReplyScope};
use answerable_core::neural::Activation;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Which of the three systems a command trains or expects in a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    ContextCnn,
    BaselineCnn,
    Logreg,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::ContextCnn => "context-cnn",
            System::BaselineCnn => "baseline-cnn",
            System::Logreg => "logreg",
        }
    }
}

/// Which split of the dataset a command evaluates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

/// Fully resolved settings for one invocation. Written to the output
/// directory as `config.json` so every artifact records how it was made.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub threads_file: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub questions_file: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub deterministic: bool,
    pub min_first_tier: usize,
    pub reply_scope: ReplyScope,
    pub min_count: u64,
    pub system: System,
    pub filter_x: usize,
    pub window: usize,
    pub filters: usize,
    pub seq_len: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub positive_weight: f64,
    pub negative_weight: f64,
    pub train_embeddings: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub runs: usize,
    pub lambda: f64,
    pub min_df: usize,
    pub binary_features: bool,
    pub train_size: Option<usize>,
    pub valid_size: Option<usize>,
    pub test_size: Option<usize>,
    pub granularity: Granularity,
    pub eval_split: SplitName,
    pub windows: Vec<usize>,
    pub filter_grid: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threads_file: None,
            embeddings: None,
            questions_file: None,
            model_file: None,
            out: PathBuf::from("out"),
            seed: 13,
            deterministic: false,
            min_first_tier: 100,
            reply_scope: ReplyScope::DirectChildren,
            min_count: 2,
            system: System::ContextCnn,
            filter_x: 5,
            window: 3,
            filters: 100,
            seq_len: 60,
            activation: Activation::Relu,
            dropout: 0.5,
            positive_weight: 4.0,
            negative_weight: 1.0,
            train_embeddings: false,
            learning_rate: 1e-3,
            batch_size: 50,
            max_epochs: 25,
            patience: 3,
            runs: 1,
            lambda: 1e-4,
            min_df: 1,
            binary_features: false,
            train_size: None,
            valid_size: None,
            test_size: None,
            granularity: Granularity::Month,
            eval_split: SplitName::Test,
            windows: vec![1, 2, 3, 4, 5],
            filter_grid: vec![5, 100, 300],
            sizes: Vec::new(),
        }
    }
}

/// One layer of overrides: a config file or the command line flags.
/// Absent fields leave the lower layer untouched.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub threads_file: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub questions_file: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub deterministic: Option<bool>,
    pub min_first_tier: Option<usize>,
    pub reply_scope: Option<ReplyScope>,
    pub min_count: Option<u64>,
    pub system: Option<System>,
    pub filter_x: Option<usize>,
    pub window: Option<usize>,
    pub filters: Option<usize>,
    pub seq_len: Option<usize>,
    pub activation: Option<Activation>,
    pub dropout: Option<f64>,
    pub positive_weight: Option<f64>,
    pub negative_weight: Option<f64>,
    pub train_embeddings: Option<bool>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub runs: Option<usize>,
    pub lambda: Option<f64>,
    pub min_df: Option<usize>,
    pub binary_features: Option<bool>,
    pub train_size: Option<usize>,
    pub valid_size: Option<usize>,
    pub test_size: Option<usize>,
    pub granularity: Option<Granularity>,
    pub eval_split: Option<SplitName>,
    pub windows: Option<Vec<usize>>,
    pub filter_grid: Option<Vec<usize>>,
    pub sizes: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn apply(&mut self, layer: &ConfigLayer) {
        macro_rules! set {
            ($($field:ident),* $(,)?) => {
                $(if let Some(v) = &layer.$field { self.$field = v.clone(); })*
            };
        }
        macro_rules! set_path {
            ($($field:ident),* $(,)?) => {
                $(if layer.$field.is_some() { self.$field = layer.$field.clone(); })*
            };
        }
        set_path!(threads_file, embeddings, questions_file, model_file);
        set!(
            out,
            seed,
            deterministic,
            min_first_tier,
            reply_scope,
            min_count,
            system,
            filter_x,
            window,
            filters,
            seq_len,
            activation,
            dropout,
            positive_weight,
            negative_weight,
            train_embeddings,
            learning_rate,
            batch_size,
            max_epochs,
            patience,
            runs,
            lambda,
            min_df,
            binary_features,
            granularity,
            eval_split,
            windows,
            filter_grid,
            sizes,
        );
        if layer.train_size.is_some() {
            self.train_size = layer.train_size;
        }
        if layer.valid_size.is_some() {
            self.valid_size = layer.valid_size;
        }
        if layer.test_size.is_some() {
            self.test_size = layer.test_size;
        }
    }

    /// Defaults, then the config file, then the flag layers, in that order.
    pub fn resolve(config_path: Option<&Path>, flag_layers: &[ConfigLayer]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_path {
            cfg.apply(&load_config_file(path)?);
        }
        for layer in flag_layers {
            cfg.apply(layer);
        }
        Ok(cfg)
    }

    /// Writes the resolved settings to `<out>/config.json`.
    pub fn echo(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        crate::commands::write_file(&self.out.join("config.json"), text.as_bytes())
    }
}

pub fn load_config_file(path: &Path) -> Result<ConfigLayer> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)
            .with_context(|| format!("parsing JSON config {}", path.display())),
        Some("toml") => {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))
        }
        _ => bail!(
            "config file {} must have a .json or .toml extension",
            path.display()
        ),
    }
}
