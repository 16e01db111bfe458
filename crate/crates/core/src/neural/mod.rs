//! Convolutional sentence classifier over word embeddings.
//!
//! A question is encoded as a fixed-length matrix of embedding rows. Filter
//! banks of several window widths slide over it, each feature map is
//! max-pooled over time, and a softmax layer reads the concatenated pooled
//! vector. All parameters live in one flat `Vec<f64>` with a fixed layout
//! (bank weights and biases in bank order, then output weights and bias,
//! then optional embedding rows), which keeps the optimizer, checkpointing,
//! and finite-difference checks straightforward.

mod train;

pub use train::{
    predict_batch, prepare_samples, train, EpochRecord, Sample, TrainConfig, TrainReport,
};

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ngram::FilterAllocation;
use crate::text::{EmbeddingTable, EncodedQuestion, OOV};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("window sizes and filter counts differ in length ({windows} vs {counts})")]
    MismatchedCounts { windows: usize, counts: usize },
    #[error("model needs at least one filter bank")]
    NoBanks,
    #[error("window {window} exceeds sequence length {seq_len}")]
    WindowTooWide { window: usize, seq_len: usize },
    #[error("window sizes and filter counts must be positive")]
    ZeroSize,
    #[error("dropout rate {rate} is outside [0, 1)")]
    BadDropout { rate: f64 },
    #[error("class weights must be positive")]
    BadClassWeights,
    #[error("embedding dimension mismatch: model {model}, table {table}")]
    DimMismatch { model: usize, table: usize },
    #[error("trainable embeddings need an embedding table at init")]
    MissingEmbeddings,
    #[error("feature map is empty")]
    EmptyFeatureMap,
    #[error("forward pass does not match this model's shape")]
    ForeignPass,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("parameter count mismatch: layout holds {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("embedding row count is inconsistent with the configuration")]
    InconsistentEmbeddingRows,
}

/// Filter nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output, which is all the
    /// backward pass stores.
    pub fn grad_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Per-class loss weights; the positive (answered) class is upweighted to
/// counter the label imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights {
            positive: 4.0,
            negative: 1.0,
        }
    }
}

impl ClassWeights {
    pub fn for_label(self, label: u8) -> f64 {
        if label == 1 {
            self.positive
        } else {
            self.negative
        }
    }
}

/// Architecture and initialization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub window_sizes: Vec<usize>,
    pub filter_counts: Vec<usize>,
    pub embed_dim: usize,
    /// Questions are padded or truncated to this many tokens.
    pub seq_len: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub class_weights: ClassWeights,
    pub train_embeddings: bool,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Multi-window model: windows 1 through 5 with the preset allocation
    /// scaled by `x`.
    pub fn multi_window(x: usize, embed_dim: usize, seq_len: usize) -> Self {
        let alloc = FilterAllocation::preset(x);
        ModelConfig {
            window_sizes: (1..=5).collect(),
            filter_counts: alloc.counts.to_vec(),
            embed_dim,
            seq_len,
            activation: Activation::default(),
            dropout_rate: 0.5,
            class_weights: ClassWeights::default(),
            train_embeddings: false,
            init_seed: 0,
        }
    }

    /// Single-window baseline with one bank of the given width and count.
    pub fn single_window(window: usize, filters: usize, embed_dim: usize, seq_len: usize) -> Self {
        ModelConfig {
            window_sizes: vec![window],
            filter_counts: vec![filters],
            ..ModelConfig::multi_window(1, embed_dim, seq_len)
        }
    }

    /// Length of the pooled feature vector: total filter count.
    pub fn pooled_dim(&self) -> usize {
        self.filter_counts.iter().sum()
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.window_sizes.len() != self.filter_counts.len() {
            return Err(NeuralError::MismatchedCounts {
                windows: self.window_sizes.len(),
                counts: self.filter_counts.len(),
            });
        }
        if self.window_sizes.is_empty() {
            return Err(NeuralError::NoBanks);
        }
        if self.window_sizes.contains(&0)
            || self.filter_counts.contains(&0)
            || self.embed_dim == 0
            || self.seq_len == 0
        {
            return Err(NeuralError::ZeroSize);
        }
        if let Some(&window) = self.window_sizes.iter().find(|&&n| n > self.seq_len) {
            return Err(NeuralError::WindowTooWide {
                window,
                seq_len: self.seq_len,
            });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NeuralError::BadDropout {
                rate: self.dropout_rate,
            });
        }
        if self.class_weights.positive <= 0.0 || self.class_weights.negative <= 0.0 {
            return Err(NeuralError::BadClassWeights);
        }
        Ok(())
    }
}

/// Byte offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    bank_w: Vec<Range<usize>>,
    bank_b: Vec<Range<usize>>,
    out_w: Range<usize>,
    out_b: Range<usize>,
    embed: Range<usize>,
    total: usize,
}

impl Layout {
    fn build(config: &ModelConfig, embed_rows: usize) -> Layout {
        let d = config.embed_dim;
        let mut at = 0usize;
        let mut bank_w = Vec::with_capacity(config.window_sizes.len());
        let mut bank_b = Vec::with_capacity(config.window_sizes.len());
        for (&n, &count) in config.window_sizes.iter().zip(&config.filter_counts) {
            let w_len = count * n * d;
            bank_w.push(at..at + w_len);
            at += w_len;
            bank_b.push(at..at + count);
            at += count;
        }
        let pooled = config.pooled_dim();
        let out_w = at..at + 2 * pooled;
        at = out_w.end;
        let out_b = at..at + 2;
        at = out_b.end;
        let embed = at..at + embed_rows * d;
        at = embed.end;
        Layout {
            bank_w,
            bank_b,
            out_w,
            out_b,
            embed,
            total: at,
        }
    }
}

/// One filter bank viewed inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct FilterBank<'a> {
    pub window: usize,
    pub dim: usize,
    /// `filter_count * window * dim`, filter-major.
    pub weights: &'a [f64],
    pub biases: &'a [f64],
}

impl FilterBank<'_> {
    pub fn filter_count(&self) -> usize {
        self.biases.len()
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    encoded: EncodedQuestion,
    ids: Vec<u32>,
    /// Post-activation feature maps, one per filter across all banks.
    maps: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

impl ForwardPass {
    /// Post-activation feature maps in global filter order.
    pub fn feature_maps(&self) -> &[Vec<f64>] {
        &self.maps
    }

    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    /// Probability assigned to the answered class.
    pub fn score(&self) -> f64 {
        self.probs[1]
    }
}

/// Slides one filter bank over the encoded question.
///
/// Returns one post-activation feature map per filter, each of length
/// `rows - window + 1`.
pub fn convolve(
    encoded: &EncodedQuestion,
    bank: &FilterBank,
    activation: Activation,
) -> Result<Vec<Vec<f64>>, NeuralError> {
    let n = bank.window;
    let d = bank.dim;
    let rows = encoded.rows();
    if n > rows {
        return Err(NeuralError::WindowTooWide {
            window: n,
            seq_len: rows,
        });
    }
    debug_assert_eq!(d, encoded.dim());
    let positions = rows - n + 1;
    let x = encoded.matrix();
    let mut maps = Vec::with_capacity(bank.filter_count());
    for f in 0..bank.filter_count() {
        let w = &bank.weights[f * n * d..(f + 1) * n * d];
        let mut map = Vec::with_capacity(positions);
        for j in 0..positions {
            let window = &x[j * d..(j + n) * d];
            let mut z = bank.biases[f];
            for (wi, xi) in w.iter().zip(window) {
                z += wi * xi;
            }
            map.push(activation.apply(z));
        }
        maps.push(map);
    }
    Ok(maps)
}

/// Maximum value of a feature map and the first position attaining it.
pub fn max_over_time(map: &[f64]) -> Result<(f64, usize), NeuralError> {
    let mut best: Option<(f64, usize)> = None;
    for (j, &v) in map.iter().enumerate() {
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, j));
        }
    }
    best.ok_or(NeuralError::EmptyFeatureMap)
}

/// Numerically stable two-class softmax.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Class-weighted negative log likelihood with the probability clamped away
/// from zero.
pub fn weighted_nll(probs: [f64; 2], label: u8, weights: ClassWeights) -> f64 {
    let p = probs[label as usize].max(1e-12);
    -weights.for_label(label) * p.ln()
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layout: Layout,
    params: Vec<f64>,
    /// Embedding rows owned by the model: vocabulary plus one shared
    /// out-of-vocabulary row. Zero when embeddings stay in the table.
    embed_rows: usize,
}

impl Model {
    /// Initializes weights Glorot-uniform and biases to zero, fully
    /// determined by `config.init_seed`. A table is required (and copied)
    /// only when embeddings are trainable.
    pub fn init(config: ModelConfig, table: Option<&EmbeddingTable>) -> Result<Model, NeuralError> {
        config.validate()?;
        let embed_rows = if config.train_embeddings {
            let table = table.ok_or(NeuralError::MissingEmbeddings)?;
            if table.dim() != config.embed_dim {
                return Err(NeuralError::DimMismatch {
                    model: config.embed_dim,
                    table: table.dim(),
                });
            }
            table.vocab_size() + 1
        } else {
            if let Some(t) = table {
                if t.dim() != config.embed_dim {
                    return Err(NeuralError::DimMismatch {
                        model: config.embed_dim,
                        table: t.dim(),
                    });
                }
            }
            0
        };
        let layout = Layout::build(&config, embed_rows);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let d = config.embed_dim;
        for (k, &n) in config.window_sizes.iter().enumerate() {
            let fan_in = (n * d) as f64;
            let fan_out = config.filter_counts[k] as f64;
            let bound = (6.0 / (fan_in + fan_out)).sqrt();
            for slot in &mut params[layout.bank_w[k].clone()] {
                *slot = rng.random_range(-bound..bound);
            }
        }
        let pooled = config.pooled_dim() as f64;
        let bound = (6.0 / (pooled + 2.0)).sqrt();
        for slot in &mut params[layout.out_w.clone()] {
            *slot = rng.random_range(-bound..bound);
        }
        if embed_rows > 0 {
            let table = table.unwrap();
            let dst = &mut params[layout.embed.clone()];
            for row in 0..table.vocab_size() {
                dst[row * d..(row + 1) * d].copy_from_slice(table.row(row as u32));
            }
            // the trailing out-of-vocabulary row starts at zero
        }
        Ok(Model {
            config,
            layout,
            params,
            embed_rows,
        })
    }

    /// Rebuilds a model around saved parameters.
    pub fn from_parts(
        config: ModelConfig,
        params: Vec<f64>,
        embed_rows: usize,
    ) -> Result<Model, NeuralError> {
        config.validate()?;
        if config.train_embeddings != (embed_rows > 0) {
            return Err(NeuralError::InconsistentEmbeddingRows);
        }
        let layout = Layout::build(&config, embed_rows);
        if params.len() != layout.total {
            return Err(NeuralError::ParamCount {
                expected: layout.total,
                got: params.len(),
            });
        }
        Ok(Model {
            config,
            layout,
            params,
            embed_rows,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Embedding rows owned by the model (zero for static embeddings).
    pub fn embed_row_count(&self) -> usize {
        self.embed_rows
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Replaces all parameters; the length must match the layout.
    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.layout.total);
        self.params = params;
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn pooled_dim(&self) -> usize {
        self.config.pooled_dim()
    }

    pub fn bank(&self, k: usize) -> FilterBank<'_> {
        FilterBank {
            window: self.config.window_sizes[k],
            dim: self.config.embed_dim,
            weights: &self.params[self.layout.bank_w[k].clone()],
            biases: &self.params[self.layout.bank_b[k].clone()],
        }
    }

    pub fn bank_weight_range(&self, k: usize) -> Range<usize> {
        self.layout.bank_w[k].clone()
    }

    pub fn bank_bias_range(&self, k: usize) -> Range<usize> {
        self.layout.bank_b[k].clone()
    }

    pub fn output_weight_range(&self) -> Range<usize> {
        self.layout.out_w.clone()
    }

    pub fn output_bias_range(&self) -> Range<usize> {
        self.layout.out_b.clone()
    }

    pub fn embedding_range(&self) -> Range<usize> {
        self.layout.embed.clone()
    }

    fn embed_row(&self, id: u32) -> &[f64] {
        let d = self.config.embed_dim;
        let row = if id == OOV {
            self.embed_rows - 1
        } else {
            id as usize
        };
        debug_assert!(row < self.embed_rows);
        let base = self.layout.embed.start + row * d;
        &self.params[base..base + d]
    }

    /// Builds the input matrix for resolved row ids, padding or truncating
    /// to the configured sequence length.
    pub fn encode_ids(&self, ids: &[u32], table: &EmbeddingTable) -> EncodedQuestion {
        if self.embed_rows == 0 {
            return table.encode_rows(ids, self.config.seq_len);
        }
        let d = self.config.embed_dim;
        let n = self.config.seq_len;
        let true_length = ids.len().min(n);
        let mut matrix = vec![0.0; n * d];
        for (r, &id) in ids.iter().take(true_length).enumerate() {
            matrix[r * d..(r + 1) * d].copy_from_slice(self.embed_row(id));
        }
        EncodedQuestion::from_matrix(matrix, n, d, true_length)
    }

    fn forward_inner(
        &self,
        ids: &[u32],
        table: &EmbeddingTable,
        mask: Option<Vec<f64>>,
    ) -> ForwardPass {
        let encoded = self.encode_ids(ids, table);
        let pooled_dim = self.pooled_dim();
        let mut maps = Vec::with_capacity(pooled_dim);
        let mut argmax = Vec::with_capacity(pooled_dim);
        let mut pooled = Vec::with_capacity(pooled_dim);
        for k in 0..self.config.window_sizes.len() {
            let bank_maps = convolve(&encoded, &self.bank(k), self.config.activation)
                .expect("windows were validated against seq_len at init");
            for map in bank_maps {
                let (v, j) = max_over_time(&map).expect("maps are non-empty by construction");
                maps.push(map);
                argmax.push(j);
                pooled.push(v);
            }
        }
        let dropped: Vec<f64> = match &mask {
            Some(m) => pooled.iter().zip(m).map(|(p, f)| p * f).collect(),
            None => pooled.clone(),
        };
        let out_w = &self.params[self.layout.out_w.clone()];
        let out_b = &self.params[self.layout.out_b.clone()];
        let mut logits = [0.0; 2];
        for c in 0..2 {
            let w = &out_w[c * pooled_dim..(c + 1) * pooled_dim];
            logits[c] = out_b[c] + w.iter().zip(&dropped).map(|(a, b)| a * b).sum::<f64>();
        }
        let probs = softmax2(logits);
        ForwardPass {
            encoded,
            ids: ids.to_vec(),
            maps,
            argmax,
            pooled,
            mask,
            dropped,
            logits,
            probs,
        }
    }

    /// Inference-mode forward pass: no dropout.
    pub fn forward(&self, ids: &[u32], table: &EmbeddingTable) -> ForwardPass {
        self.forward_inner(ids, table, None)
    }

    /// Training-mode forward pass with inverted dropout on the pooled
    /// vector. A rate of zero draws nothing from the stream.
    pub fn forward_train(
        &self,
        ids: &[u32],
        table: &EmbeddingTable,
        rng: &mut ChaCha8Rng,
    ) -> ForwardPass {
        let rate = self.config.dropout_rate;
        let mask = if rate > 0.0 {
            let keep = 1.0 / (1.0 - rate);
            Some(
                (0..self.pooled_dim())
                    .map(|_| {
                        if rng.random::<f64>() < rate {
                            0.0
                        } else {
                            keep
                        }
                    })
                    .collect(),
            )
        } else {
            None
        };
        self.forward_inner(ids, table, mask)
    }

    /// Probability that the question gets answered.
    pub fn predict(&self, ids: &[u32], table: &EmbeddingTable) -> f64 {
        self.forward(ids, table).score()
    }

    pub fn loss(&self, pass: &ForwardPass, label: u8) -> f64 {
        weighted_nll(pass.probs, label, self.config.class_weights)
    }

    /// Exact gradient of the weighted loss with respect to every parameter,
    /// in flat layout order.
    pub fn backward(&self, pass: &ForwardPass, label: u8) -> Result<Vec<f64>, NeuralError> {
        let pooled_dim = self.pooled_dim();
        if pass.pooled.len() != pooled_dim
            || pass.encoded.dim() != self.config.embed_dim
            || pass.encoded.rows() != self.config.seq_len
        {
            return Err(NeuralError::ForeignPass);
        }
        let d = self.config.embed_dim;
        let weight = self.config.class_weights.for_label(label);
        let mut grads = vec![0.0; self.layout.total];

        let mut d_logits = [0.0; 2];
        for c in 0..2 {
            let indicator = if c == label as usize { 1.0 } else { 0.0 };
            d_logits[c] = weight * (pass.probs[c] - indicator);
        }

        let out_w = &self.params[self.layout.out_w.clone()];
        {
            let g_out_w = &mut grads[self.layout.out_w.clone()];
            for c in 0..2 {
                for i in 0..pooled_dim {
                    g_out_w[c * pooled_dim + i] = d_logits[c] * pass.dropped[i];
                }
            }
        }
        grads[self.layout.out_b.clone()].copy_from_slice(&d_logits);

        let mut d_pooled = vec![0.0; pooled_dim];
        for (i, slot) in d_pooled.iter_mut().enumerate() {
            let d_dropped = out_w[i] * d_logits[0] + out_w[pooled_dim + i] * d_logits[1];
            let pass_through = pass.mask.as_ref().map_or(1.0, |m| m[i]);
            *slot = d_dropped * pass_through;
        }

        let trainable_input = self.embed_rows > 0;
        let mut d_input = if trainable_input {
            vec![0.0; self.config.seq_len * d]
        } else {
            Vec::new()
        };
        let x = pass.encoded.matrix();
        let mut global = 0usize;
        for k in 0..self.config.window_sizes.len() {
            let n = self.config.window_sizes[k];
            let count = self.config.filter_counts[k];
            let w_base = self.layout.bank_w[k].start;
            let b_base = self.layout.bank_b[k].start;
            for f in 0..count {
                let h = pass.pooled[global];
                let g = d_pooled[global] * self.config.activation.grad_from_output(h);
                if g != 0.0 {
                    let j = pass.argmax[global];
                    let window = &x[j * d..(j + n) * d];
                    let w_at = w_base + f * n * d;
                    for (offset, &xv) in window.iter().enumerate() {
                        grads[w_at + offset] += g * xv;
                    }
                    grads[b_base + f] += g;
                    if trainable_input {
                        let w = &self.params[w_at..w_at + n * d];
                        for (offset, &wv) in w.iter().enumerate() {
                            d_input[j * d + offset] += g * wv;
                        }
                    }
                }
                global += 1;
            }
        }

        if trainable_input {
            // padding rows carry no parameters, so their gradient is dropped
            let g_embed_base = self.layout.embed.start;
            for (r, &id) in pass.ids.iter().take(pass.encoded.true_length()).enumerate() {
                let row = if id == OOV {
                    self.embed_rows - 1
                } else {
                    id as usize
                };
                for c in 0..d {
                    grads[g_embed_base + row * d + c] += d_input[r * d + c];
                }
            }
        }
        Ok(grads)
    }

    /// Central-difference gradient of the inference-mode loss, for checking
    /// `backward` against.
    pub fn numerical_gradient(
        &mut self,
        ids: &[u32],
        table: &EmbeddingTable,
        label: u8,
        epsilon: f64,
    ) -> Vec<f64> {
        let mut grads = vec![0.0; self.param_count()];
        for i in 0..self.param_count() {
            let original = self.params[i];
            self.params[i] = original + epsilon;
            let plus = self.loss(&self.forward(ids, table), label);
            self.params[i] = original - epsilon;
            let minus = self.loss(&self.forward(ids, table), label);
            self.params[i] = original;
            grads[i] = (plus - minus) / (2.0 * epsilon);
        }
        grads
    }
}

/// Largest elementwise relative difference, with an absolute floor so that
/// near-zero pairs compare absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::EmbeddingTable;
    use proptest::prelude::*;

    fn tiny_table() -> EmbeddingTable {
        EmbeddingTable::from_pairs(
            3,
            vec![
                ("alpha".into(), vec![0.1, -0.3, 0.5]),
                ("beta".into(), vec![0.7, 0.2, -0.1]),
                ("gamma".into(), vec![-0.4, 0.6, 0.9]),
                ("delta".into(), vec![0.3, -0.8, 0.2]),
            ],
        )
        .unwrap()
    }

    fn tiny_config(act: Activation, dropout: f64) -> ModelConfig {
        ModelConfig {
            window_sizes: vec![1, 2, 3],
            filter_counts: vec![2, 3, 2],
            embed_dim: 3,
            seq_len: 5,
            activation: act,
            dropout_rate: dropout,
            class_weights: ClassWeights::default(),
            train_embeddings: false,
            init_seed: 42,
        }
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let mut c = tiny_config(Activation::Relu, 0.0);
        c.filter_counts.pop();
        assert!(matches!(
            c.validate(),
            Err(NeuralError::MismatchedCounts { .. })
        ));

        let mut c = tiny_config(Activation::Relu, 0.0);
        c.window_sizes = vec![9];
        c.filter_counts = vec![1];
        assert!(matches!(
            c.validate(),
            Err(NeuralError::WindowTooWide {
                window: 9,
                seq_len: 5
            })
        ));

        let mut c = tiny_config(Activation::Relu, 0.0);
        c.dropout_rate = 1.0;
        assert!(matches!(c.validate(), Err(NeuralError::BadDropout { .. })));

        let c = tiny_config(Activation::Relu, 0.999);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let table = tiny_table();
        let a = Model::init(tiny_config(Activation::Relu, 0.5), Some(&table)).unwrap();
        let b = Model::init(tiny_config(Activation::Relu, 0.5), Some(&table)).unwrap();
        assert_eq!(a.params(), b.params());

        let mut other_seed = tiny_config(Activation::Relu, 0.5);
        other_seed.init_seed = 43;
        let c = Model::init(other_seed, Some(&table)).unwrap();
        assert_ne!(a.params(), c.params());

        for k in 0..3 {
            let n = a.config().window_sizes[k];
            let bound = (6.0 / ((n * 3) as f64 + a.config().filter_counts[k] as f64)).sqrt();
            assert!(a.params()[a.bank_weight_range(k)]
                .iter()
                .all(|w| w.abs() < bound));
            assert!(a.params()[a.bank_bias_range(k)].iter().all(|&b| b == 0.0));
        }
        assert!(a.params()[a.output_bias_range()].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn pooled_dim_matches_multi_window_allocation() {
        let c = ModelConfig::multi_window(5, 3, 20);
        assert_eq!(c.filter_counts, vec![5, 100, 300, 300, 300]);
        assert_eq!(c.pooled_dim(), 1005);
        let b = ModelConfig::single_window(3, 100, 3, 20);
        assert_eq!(b.pooled_dim(), 100);
    }

    #[test]
    fn convolve_matches_hand_computation() {
        // one filter, window 2, dim 2, identity-friendly numbers
        let enc = EncodedQuestion::from_matrix(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, 2, 3);
        let weights = [0.5, -1.0, 0.25, 2.0];
        let biases = [0.1];
        let bank = FilterBank {
            window: 2,
            dim: 2,
            weights: &weights,
            biases: &biases,
        };
        let maps = convolve(&enc, &bank, Activation::Relu).unwrap();
        assert_eq!(maps.len(), 1);
        // j=0: .5*1 -1*2 +.25*3 +2*4 +.1 = 7.35 ; j=1: .5*3 -1*4 +.25*5 +2*6 +.1 = 10.85
        assert!((maps[0][0] - 7.35).abs() < 1e-12);
        assert!((maps[0][1] - 10.85).abs() < 1e-12);

        let too_wide = FilterBank {
            window: 4,
            dim: 2,
            weights: &[0.0; 8],
            biases: &[0.0],
        };
        assert!(matches!(
            convolve(&enc, &too_wide, Activation::Relu),
            Err(NeuralError::WindowTooWide { .. })
        ));
    }

    #[test]
    fn max_over_time_takes_first_peak() {
        assert_eq!(max_over_time(&[1.0, 3.0, 3.0, 2.0]).unwrap(), (3.0, 1));
        assert_eq!(max_over_time(&[-5.0]).unwrap(), (-5.0, 0));
        assert!(matches!(
            max_over_time(&[]),
            Err(NeuralError::EmptyFeatureMap)
        ));
    }

    #[test]
    fn softmax_is_stable_at_extreme_logits() {
        let p = softmax2([1000.0, 999.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!(p[0] > p[1]);
    }

    #[test]
    fn weighted_loss_upweights_positives() {
        let probs = [0.5, 0.5];
        let w = ClassWeights::default();
        let pos = weighted_nll(probs, 1, w);
        let neg = weighted_nll(probs, 0, w);
        assert!((pos / neg - 4.0).abs() < 1e-12);
        // clamp keeps the loss finite at probability zero
        assert!(weighted_nll([1.0, 0.0], 1, w).is_finite());
    }

    /// Nudges every parameter so no pre-activation sits exactly on the relu
    /// kink and no two pooling candidates are exactly tied. Zero-initialized
    /// biases otherwise leave fully-padded window positions at z = 0, where
    /// central differences see a one-sided slope.
    fn jitter_params(model: &mut Model, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in model.params_mut() {
            *p += rng.random_range(-0.25..0.25);
        }
    }

    fn gradient_check_error(
        model: &mut Model,
        table: &EmbeddingTable,
        ids: &[u32],
        label: u8,
    ) -> f64 {
        let pass = model.forward(ids, table);
        let analytic = model.backward(&pass, label).unwrap();
        let numeric = model.numerical_gradient(ids, table, label, 1e-5);
        max_relative_error(&analytic, &numeric)
    }

    fn check_gradients(config: ModelConfig, ids: &[u32], label: u8) {
        let table = tiny_table();
        let mut model = Model::init(config, Some(&table)).unwrap();
        jitter_params(&mut model, 7);
        let err = gradient_check_error(&mut model, &table, ids, label);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradients_match_finite_differences_tanh() {
        check_gradients(tiny_config(Activation::Tanh, 0.0), &[0, 1, 2, 3], 1);
        check_gradients(tiny_config(Activation::Tanh, 0.0), &[2, 0], 0);
    }

    #[test]
    fn gradients_match_finite_differences_relu() {
        check_gradients(tiny_config(Activation::Relu, 0.0), &[0, 1, 2, 3], 1);
        check_gradients(tiny_config(Activation::Relu, 0.0), &[3, 3, 1], 0);
    }

    #[test]
    fn gradients_match_finite_differences_with_oov_and_padding() {
        check_gradients(tiny_config(Activation::Tanh, 0.0), &[OOV, 1, OOV], 1);
    }

    #[test]
    fn gradients_match_finite_differences_trainable_embeddings() {
        let mut config = tiny_config(Activation::Tanh, 0.0);
        config.train_embeddings = true;
        check_gradients(config.clone(), &[0, 1, 2, 3], 1);
        check_gradients(config, &[OOV, 2], 0);
    }

    #[test]
    fn dropout_gradient_matches_with_refixed_mask() {
        let table = tiny_table();
        let config = tiny_config(Activation::Tanh, 0.5);
        let mut model = Model::init(config, Some(&table)).unwrap();
        let ids = [0u32, 1, 2];
        let label = 1u8;
        let loss_with_mask = |m: &Model| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let pass = m.forward_train(&ids, &tiny_table(), &mut rng);
            m.loss(&pass, label)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pass = model.forward_train(&ids, &table, &mut rng);
        assert!(pass.mask.as_ref().unwrap().contains(&0.0));
        assert!(pass.mask.as_ref().unwrap().contains(&2.0));
        let analytic = model.backward(&pass, label).unwrap();
        let eps = 1e-5;
        let mut numeric = vec![0.0; model.param_count()];
        for i in 0..model.param_count() {
            let original = model.params()[i];
            model.params_mut()[i] = original + eps;
            let plus = loss_with_mask(&model);
            model.params_mut()[i] = original - eps;
            let minus = loss_with_mask(&model);
            model.params_mut()[i] = original;
            numeric[i] = (plus - minus) / (2.0 * eps);
        }
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn eval_forward_is_deterministic_and_dropout_free() {
        let table = tiny_table();
        let model = Model::init(tiny_config(Activation::Relu, 0.5), Some(&table)).unwrap();
        let a = model.forward(&[0, 1], &table);
        let b = model.forward(&[0, 1], &table);
        assert_eq!(a.probs, b.probs);
        assert!(a.mask.is_none());
        assert_eq!(a.pooled, a.dropped);
        assert!((a.probs[0] + a.probs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_ignores_tokens_beyond_seq_len() {
        let table = tiny_table();
        let model = Model::init(tiny_config(Activation::Relu, 0.0), Some(&table)).unwrap();
        let short = model.forward(&[0, 1, 2, 3, 0], &table);
        let long = model.forward(&[0, 1, 2, 3, 0, 1, 2], &table);
        assert_eq!(short.probs, long.probs);
    }

    #[test]
    fn backward_rejects_foreign_passes() {
        let table = tiny_table();
        let model = Model::init(tiny_config(Activation::Relu, 0.0), Some(&table)).unwrap();
        let mut other_cfg = tiny_config(Activation::Relu, 0.0);
        other_cfg.filter_counts = vec![1, 1, 1];
        let other = Model::init(other_cfg, Some(&table)).unwrap();
        let pass = other.forward(&[0], &table);
        assert!(matches!(
            model.backward(&pass, 1),
            Err(NeuralError::ForeignPass)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_models_pass_gradient_checks(
            seed in 0u64..1000,
            label in 0u8..=1,
            ids in proptest::collection::vec(0u32..4, 1..6),
            tanh in proptest::bool::ANY,
        ) {
            let mut config = tiny_config(
                if tanh { Activation::Tanh } else { Activation::Relu },
                0.0,
            );
            config.init_seed = seed;
            let table = tiny_table();
            let model = Model::init(config, Some(&table)).unwrap();
            let mut best = f64::INFINITY;
            for attempt in 0..3u64 {
                let mut jittered = model.clone();
                jitter_params(&mut jittered, seed.wrapping_mul(31).wrapping_add(attempt));
                best = best.min(gradient_check_error(&mut jittered, &table, &ids, label));
                if best < 1e-4 {
                    break;
                }
            }
            prop_assert!(best < 1e-4, "max relative error {best}");
        }

        #[test]
        fn probabilities_always_normalize(
            seed in 0u64..500,
            ids in proptest::collection::vec(0u32..4, 0..8),
        ) {
            let mut config = tiny_config(Activation::Relu, 0.0);
            config.init_seed = seed;
            let table = tiny_table();
            let model = Model::init(config, Some(&table)).unwrap();
            let pass = model.forward(&ids, &table);
            prop_assert!((pass.probs[0] + pass.probs[1] - 1.0).abs() < 1e-12);
            prop_assert!(pass.probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}
