//! Binary model checkpoints.
//!
//! Layout: an 8-byte magic, a little-endian `u64` manifest length, a JSON
//! manifest, then the flat parameter vector as little-endian `f64`s in the
//! manifest's declared order. The manifest contains no maps, so saving the
//! same model twice produces byte-identical files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logreg::{BowClassifier, LogRegModel, Vocabulary};
use crate::neural::{Model, ModelConfig};

pub const MAGIC: &[u8; 8] = b"ANSWCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io failed")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("unsupported checkpoint version {found}")]
    UnsupportedVersion { found: u32 },
    #[error("manifest is not valid JSON")]
    Json(#[from] serde_json::Error),
    #[error("payload holds {got} parameter bytes, manifest declares {expected}")]
    ParamBytes { expected: usize, got: usize },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("manifest is inconsistent: {0}")]
    Inconsistent(&'static str),
    #[error(transparent)]
    Model(#[from] crate::neural::NeuralError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    #[serde(flatten)]
    pub model: ModelManifest,
}

/// Model-specific manifest body; `param_len` counts `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelManifest {
    Cnn {
        config: ModelConfig,
        embed_rows: usize,
        param_len: usize,
    },
    Logreg {
        lambda: f64,
        binary: bool,
        vocab: Vec<String>,
        param_len: usize,
    },
}

impl ModelManifest {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelManifest::Cnn { .. } => "cnn",
            ModelManifest::Logreg { .. } => "logreg",
        }
    }

    fn param_len(&self) -> usize {
        match self {
            ModelManifest::Cnn { param_len, .. } | ModelManifest::Logreg { param_len, .. } => {
                *param_len
            }
        }
    }
}

/// Writes a checkpoint; the manifest must declare exactly `params.len()`.
pub fn save(
    path: impl AsRef<Path>,
    manifest: &Manifest,
    params: &[f64],
) -> Result<(), CheckpointError> {
    if manifest.model.param_len() != params.len() {
        return Err(CheckpointError::Inconsistent(
            "declared param_len differs from payload",
        ));
    }
    let json = serde_json::to_vec(manifest)?;
    let mut w = std::io::BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in params {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(Manifest, Vec<f64>), CheckpointError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 8 {
        return Err(if bytes.starts_with(&MAGIC[..bytes.len().min(8)]) {
            CheckpointError::Truncated
        } else {
            CheckpointError::BadMagic
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let json_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let json_end = 16usize
        .checked_add(json_len)
        .ok_or(CheckpointError::Truncated)?;
    if bytes.len() < json_end {
        return Err(CheckpointError::Truncated);
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[16..json_end])?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: manifest.format_version,
        });
    }
    let payload = &bytes[json_end..];
    let expected = manifest.model.param_len() * 8;
    if payload.len() != expected {
        return Err(CheckpointError::ParamBytes {
            expected,
            got: payload.len(),
        });
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((manifest, params))
}

pub fn save_cnn(model: &Model, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model: ModelManifest::Cnn {
            config: model.config().clone(),
            embed_rows: model.embed_row_count(),
            param_len: model.param_count(),
        },
    };
    save(path, &manifest, model.params())
}

pub fn load_cnn(path: impl AsRef<Path>) -> Result<Model, CheckpointError> {
    match load_any(path)? {
        LoadedModel::Cnn(model) => Ok(model),
        LoadedModel::Logreg(_) => Err(CheckpointError::WrongKind {
            expected: "cnn",
            found: "logreg",
        }),
    }
}

pub fn save_logreg(clf: &BowClassifier, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let mut params = clf.model.weights.clone();
    params.push(clf.model.intercept);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model: ModelManifest::Logreg {
            lambda: clf.model.lambda,
            binary: clf.model.binary,
            vocab: clf.vocab.words().to_vec(),
            param_len: params.len(),
        },
    };
    save(path, &manifest, &params)
}

pub fn load_logreg(path: impl AsRef<Path>) -> Result<BowClassifier, CheckpointError> {
    match load_any(path)? {
        LoadedModel::Logreg(clf) => Ok(clf),
        LoadedModel::Cnn(_) => Err(CheckpointError::WrongKind {
            expected: "logreg",
            found: "cnn",
        }),
    }
}

pub enum LoadedModel {
    Cnn(Model),
    Logreg(BowClassifier),
}

impl LoadedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedModel::Cnn(_) => "cnn",
            LoadedModel::Logreg(_) => "logreg",
        }
    }
}

/// Loads whichever model kind the file declares.
pub fn load_any(path: impl AsRef<Path>) -> Result<LoadedModel, CheckpointError> {
    let (manifest, mut params) = load(path)?;
    match manifest.model {
        ModelManifest::Cnn {
            config, embed_rows, ..
        } => Ok(LoadedModel::Cnn(Model::from_parts(
            config, params, embed_rows,
        )?)),
        ModelManifest::Logreg {
            lambda,
            binary,
            vocab,
            ..
        } => {
            if params.len() != vocab.len() + 1 {
                return Err(CheckpointError::Inconsistent(
                    "logreg payload must hold one weight per word plus an intercept",
                ));
            }
            if !vocab.windows(2).all(|w| w[0] < w[1]) {
                return Err(CheckpointError::Inconsistent(
                    "vocabulary must be sorted and unique",
                ));
            }
            let intercept = params.pop().unwrap();
            Ok(LoadedModel::Logreg(BowClassifier {
                vocab: Vocabulary::from_words(vocab),
                model: LogRegModel {
                    weights: params,
                    intercept,
                    lambda,
                    binary,
                },
            }))
        }
    }
}
