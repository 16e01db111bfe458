pub mod curve;
pub mod eval;
pub mod grid;
pub mod ingest;
pub mod ngrams;
pub mod pairs;
pub mod predict;
pub mod train;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use answerable_core::checkpoint::LoadedModel;
use answerable_core::corpus::{split_dataset, QuestionRecord, Splits};
use answerable_core::eval::{question_key, QuestionKey};
use answerable_core::neural::{ClassWeights, ModelConfig, TrainConfig};
use answerable_core::text::EmbeddingTable;
use anyhow::{bail, Context, Result};

use crate::config::{RunConfig, System};

/// Writes the full contents through a temporary file in the same
/// directory, so an error never leaves a half-written artifact behind.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    stage_file(path, |tmp| fs::write(tmp, bytes).map_err(Into::into))
}

/// Runs `write` against a temporary path, then renames it into place.
pub fn stage_file(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)
        .with_context(|| format!("creating output directory {}", parent.display()))?;
    let tmp = tempfile::Builder::new()
        .prefix(".stage-")
        .tempfile_in(&parent)
        .context("creating staging file")?
        .into_temp_path();
    write(&tmp)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn questions_path(cfg: &RunConfig) -> PathBuf {
    cfg.questions_file
        .clone()
        .unwrap_or_else(|| cfg.out.join("questions.jsonl"))
}

pub fn model_path(cfg: &RunConfig) -> PathBuf {
    cfg.model_file
        .clone()
        .unwrap_or_else(|| cfg.out.join("checkpoint"))
}

pub fn load_questions(cfg: &RunConfig) -> Result<Vec<QuestionRecord>> {
    let path = questions_path(cfg);
    let records = answerable_core::corpus::read_questions_jsonl(&path)
        .with_context(|| format!("reading questions from {}", path.display()))?;
    Ok(records)
}

pub fn load_table(cfg: &RunConfig) -> Result<EmbeddingTable> {
    let path = cfg
        .embeddings
        .as_ref()
        .context("this command needs an embeddings file (--embeddings)")?;
    EmbeddingTable::load(path)
        .with_context(|| format!("loading embeddings from {}", path.display()))
}

pub fn load_model(cfg: &RunConfig) -> Result<LoadedModel> {
    let path = model_path(cfg);
    answerable_core::checkpoint::load_any(&path)
        .with_context(|| format!("loading model checkpoint {}", path.display()))
}

/// Requested sizes, or an 80/10/10 cut of everything when unset.
pub fn split_sizes(cfg: &RunConfig, total: usize) -> (usize, usize, usize) {
    match (cfg.train_size, cfg.valid_size, cfg.test_size) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            let train = cfg.train_size.unwrap_or(total * 8 / 10);
            let valid = cfg.valid_size.unwrap_or(total / 10);
            let test = cfg
                .test_size
                .unwrap_or_else(|| total.saturating_sub(train + valid));
            (train, valid, test)
        }
    }
}

pub fn make_splits(cfg: &RunConfig, records: &[QuestionRecord]) -> Result<Splits> {
    let sizes = split_sizes(cfg, records.len());
    split_dataset(records, sizes, cfg.granularity, cfg.seed)
        .context("splitting the question corpus")
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        ..TrainConfig::default()
    }
}

/// Architecture for the configured CNN system.
pub fn cnn_config(cfg: &RunConfig, embed_dim: usize) -> Result<ModelConfig> {
    let mut model = match cfg.system {
        System::ContextCnn => ModelConfig::multi_window(cfg.filter_x, embed_dim, cfg.seq_len),
        System::BaselineCnn => {
            ModelConfig::single_window(cfg.window, cfg.filters, embed_dim, cfg.seq_len)
        }
        System::Logreg => bail!("system logreg is not a CNN"),
    };
    model.activation = cfg.activation;
    model.dropout_rate = cfg.dropout;
    model.class_weights = ClassWeights {
        positive: cfg.positive_weight,
        negative: cfg.negative_weight,
    };
    model.train_embeddings = cfg.train_embeddings;
    Ok(model)
}

/// Scores every record with whichever model the checkpoint holds. CNN
/// checkpoints store weights only, so the embedding vocabulary is always
/// re-read from the embeddings file.
pub fn score_records(
    cfg: &RunConfig,
    model: &LoadedModel,
    records: &[QuestionRecord],
) -> Result<Vec<f64>> {
    match model {
        LoadedModel::Cnn(model) => {
            let table = load_table(cfg)?;
            if table.dim() != model.config().embed_dim {
                bail!(
                    "embeddings have dimension {} but the checkpoint expects {}",
                    table.dim(),
                    model.config().embed_dim
                );
            }
            let seq_len = model.config().seq_len;
            Ok(records
                .iter()
                .map(|r| model.predict(&table.resolve(&r.tokens, seq_len), &table))
                .collect())
        }
        LoadedModel::Logreg(clf) => Ok(clf.score_records(records)),
    }
}

pub fn score_map(records: &[QuestionRecord], scores: &[f64]) -> HashMap<QuestionKey, f64> {
    records
        .iter()
        .zip(scores)
        .map(|(r, &s)| (question_key(&r.thread_id, &r.post_id), s))
        .collect()
}

pub fn labels(records: &[QuestionRecord]) -> Vec<u8> {
    records.iter().map(|r| r.label).collect()
}
