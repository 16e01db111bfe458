//! Mini-batch training with Adam, early stopping on validation AUC, and
//! best-epoch parameter restoration.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, NeuralError};
use crate::corpus::QuestionRecord;
use crate::eval;
use crate::text::EmbeddingTable;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive epochs without improvement tolerated before stopping.
    pub patience: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 50,
            max_epochs: 25,
            patience: 3,
            shuffle_seed: 0,
        }
    }
}

/// One question resolved against the embedding vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub ids: Vec<u32>,
    pub label: u8,
}

/// Resolves records to row ids, truncating to the model's sequence length.
pub fn prepare_samples(
    records: &[QuestionRecord],
    table: &EmbeddingTable,
    seq_len: usize,
) -> Vec<Sample> {
    records
        .iter()
        .map(|r| Sample {
            ids: table.resolve(&r.tokens, seq_len),
            label: r.label,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub valid_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Present when the validation set had both classes; the restored
    /// parameters reproduce exactly this AUC.
    pub best_valid_auc: Option<f64>,
    pub stopped_early: bool,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    fn new(len: usize) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Scores every sample in inference mode.
pub fn predict_batch(model: &Model, table: &EmbeddingTable, samples: &[Sample]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| model.predict(&s.ids, table))
        .collect()
}

fn valid_auc(model: &Model, table: &EmbeddingTable, valid: &[Sample]) -> Option<f64> {
    if valid.is_empty() {
        return None;
    }
    let scores = predict_batch(model, table, valid);
    let labels: Vec<u8> = valid.iter().map(|s| s.label).collect();
    eval::auc(&scores, &labels).ok()
}

/// Trains in place. Batch gradients are summed over the batch; model
/// selection tracks validation AUC when available and falls back to mean
/// training loss otherwise. On return the model holds the best epoch's
/// parameters.
pub fn train(
    model: &mut Model,
    table: &EmbeddingTable,
    train_set: &[Sample],
    valid_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainReport, NeuralError> {
    if train_set.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut adam = Adam::new(model.param_count());
    let mut epochs = Vec::new();
    let mut best_params: Vec<f64> = model.params().to_vec();
    let mut best_epoch = 0usize;
    let mut best_auc: Option<f64> = None;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grad_sum = vec![0.0; model.param_count()];
            for &i in batch {
                let sample = &train_set[i];
                let pass = model.forward_train(&sample.ids, table, &mut rng);
                let loss = model.loss(&pass, sample.label);
                if !loss.is_finite() {
                    return Err(NeuralError::NonFiniteLoss { epoch });
                }
                loss_sum += loss;
                let grads = model.backward(&pass, sample.label)?;
                for (acc, g) in grad_sum.iter_mut().zip(&grads) {
                    *acc += g;
                }
            }
            adam.step(model.params_mut(), &grad_sum, cfg);
        }
        let mean_train_loss = loss_sum / train_set.len() as f64;
        let auc_now = valid_auc(model, table, valid_set);
        epochs.push(EpochRecord {
            epoch,
            mean_train_loss,
            valid_auc: auc_now,
        });

        let improved = match auc_now {
            Some(a) => best_auc.is_none_or(|b| a > b),
            None => mean_train_loss < best_loss,
        };
        if improved {
            best_params.copy_from_slice(model.params());
            best_epoch = epoch;
            best_auc = auc_now;
            best_loss = mean_train_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    model.set_params(best_params);
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_valid_auc: best_auc,
        stopped_early,
    })
}
