//! Seeded synthetic question corpora.
//!
//! Two word families ("up…", "down…") get embedding vectors on opposite
//! sides of a fixed direction; each record mostly samples words from its
//! own class family, with a configurable fraction of cross-class noise.
//! This yields datasets that are learnably separable both lexically (for
//! bag-of-words models) and in embedding space (for the convolutional
//! model), while timestamps spread the records over several months so the
//! temporal split machinery stays exercised.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::QuestionRecord;
use crate::text::{EmbeddingTable, TokenSequence};

/// 2013-01-01T00:00:00Z; records step forward two hours apart from here.
const BASE_TIMESTAMP: i64 = 1_356_998_400;
const STEP_SECONDS: i64 = 7_200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub train_size: usize,
    pub valid_size: usize,
    pub embed_dim: usize,
    /// Distinct words per class family.
    pub vocab_per_class: usize,
    pub positive_fraction: f64,
    /// Probability that a token is drawn from the opposite class family.
    pub token_noise: f64,
    /// Per-component jitter applied to each word vector.
    pub vector_noise: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            train_size: 2000,
            valid_size: 500,
            embed_dim: 8,
            vocab_per_class: 30,
            positive_fraction: 0.5,
            token_noise: 0.15,
            vector_noise: 0.1,
            min_tokens: 4,
            max_tokens: 9,
            seed: 0,
        }
    }
}

impl SynthOptions {
    /// An 80/20 imbalanced, heavily overlapping variant where class
    /// probabilities stay informative rather than saturated.
    pub fn imbalanced(seed: u64) -> Self {
        SynthOptions {
            positive_fraction: 0.2,
            token_noise: 0.35,
            seed,
            ..SynthOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub table: EmbeddingTable,
    pub train: Vec<QuestionRecord>,
    pub valid: Vec<QuestionRecord>,
}

/// Generates the dataset deterministically from `opts.seed`.
pub fn separable_dataset(opts: &SynthOptions) -> SynthDataset {
    assert!(opts.embed_dim >= 1 && opts.vocab_per_class >= 1);
    assert!(opts.min_tokens >= 1 && opts.min_tokens <= opts.max_tokens);
    assert!((0.0..=1.0).contains(&opts.positive_fraction));
    assert!((0.0..=1.0).contains(&opts.token_noise));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let d = opts.embed_dim;
    let axis: Vec<f64> = (0..d)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
        .collect();

    let mut pairs: Vec<(String, Vec<f64>)> = Vec::with_capacity(2 * opts.vocab_per_class);
    for (family, sign) in [("up", 1.0), ("down", -1.0)] {
        for i in 0..opts.vocab_per_class {
            let vec: Vec<f64> = axis
                .iter()
                .map(|&a| sign * a + opts.vector_noise * rng.random_range(-1.0..1.0))
                .collect();
            pairs.push((format!("{family}{i}"), vec));
        }
    }
    let table = EmbeddingTable::from_pairs(d, pairs).expect("generated words are unique");

    let total = opts.train_size + opts.valid_size;
    let mut records = Vec::with_capacity(total);
    for i in 0..total {
        let label = u8::from(rng.random::<f64>() < opts.positive_fraction);
        let own_family = if label == 1 { "up" } else { "down" };
        let other_family = if label == 1 { "down" } else { "up" };
        let len = rng.random_range(opts.min_tokens..=opts.max_tokens);
        let mut words: Vec<String> = (0..len)
            .map(|_| {
                let family = if rng.random::<f64>() < opts.token_noise {
                    other_family
                } else {
                    own_family
                };
                format!("{family}{}", rng.random_range(0..opts.vocab_per_class))
            })
            .collect();
        let text = format!("{}?", words.join(" "));
        words.push("?".to_string());
        records.push(QuestionRecord {
            thread_id: "synth".to_string(),
            post_id: format!("s{i:05}"),
            text,
            tokens: TokenSequence::from_tokens(words),
            created_utc: BASE_TIMESTAMP + i as i64 * STEP_SECONDS,
            label,
        });
    }
    let valid = records.split_off(opts.train_size);
    SynthDataset {
        table,
        train: records,
        valid,
    }
}

/// Returns the records with the same label multiset dealt out in a seeded
/// random order.
pub fn permute_labels(records: &[QuestionRecord], seed: u64) -> Vec<QuestionRecord> {
    let mut labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    records
        .iter()
        .zip(labels)
        .map(|(r, label)| QuestionRecord { label, ..r.clone() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logreg::{BowClassifier, LogRegOptions};

    #[test]
    fn generation_is_seed_deterministic() {
        let opts = SynthOptions {
            train_size: 50,
            valid_size: 20,
            ..SynthOptions::default()
        };
        let a = separable_dataset(&opts);
        let b = separable_dataset(&opts);
        assert_eq!(a.train, b.train);
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.table.words(), b.table.words());
        assert_eq!(a.table.matrix(), b.table.matrix());

        let c = separable_dataset(&SynthOptions { seed: 1, ..opts });
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn shapes_and_metadata_hold() {
        let opts = SynthOptions {
            train_size: 120,
            valid_size: 30,
            ..SynthOptions::default()
        };
        let data = separable_dataset(&opts);
        assert_eq!(data.train.len(), 120);
        assert_eq!(data.valid.len(), 30);
        assert_eq!(data.table.vocab_size(), 60);
        for (i, r) in data.train.iter().chain(&data.valid).enumerate() {
            assert_eq!(r.created_utc, BASE_TIMESTAMP + i as i64 * STEP_SECONDS);
            let n = r.tokens.len();
            assert!((opts.min_tokens + 1..=opts.max_tokens + 1).contains(&n));
            assert_eq!(r.tokens.tokens().last().unwrap(), "?");
            assert!(crate::text::is_single_question(&r.text));
        }
    }

    #[test]
    fn positive_fraction_is_respected() {
        let opts = SynthOptions {
            train_size: 2000,
            valid_size: 0,
            ..SynthOptions::default()
        };
        let data = separable_dataset(&opts);
        let pos = data.train.iter().filter(|r| r.label == 1).count() as f64 / 2000.0;
        assert!((pos - 0.5).abs() < 0.05, "positive fraction {pos}");
        // two-hour spacing spreads 2000 records over several calendar months
        let months: std::collections::BTreeSet<i64> = data
            .train
            .iter()
            .map(|r| r.created_utc / (31 * 86_400))
            .collect();
        assert!(months.len() >= 3);

        let skewed = separable_dataset(&SynthOptions {
            train_size: 2000,
            valid_size: 0,
            ..SynthOptions::imbalanced(3)
        });
        let pos = skewed.train.iter().filter(|r| r.label == 1).count() as f64 / 2000.0;
        assert!((pos - 0.2).abs() < 0.05, "positive fraction {pos}");
    }

    #[test]
    fn lexical_signal_is_learnable() {
        let opts = SynthOptions {
            train_size: 300,
            valid_size: 100,
            ..SynthOptions::default()
        };
        let data = separable_dataset(&opts);
        let clf = BowClassifier::fit(&data.train, &LogRegOptions::default()).unwrap();
        let scores = clf.score_records(&data.valid);
        let labels: Vec<u8> = data.valid.iter().map(|r| r.label).collect();
        let auc = crate::eval::auc(&scores, &labels).unwrap();
        assert!(auc > 0.95, "AUC {auc}");
    }

    #[test]
    fn permutation_preserves_label_multiset() {
        let opts = SynthOptions {
            train_size: 200,
            valid_size: 0,
            ..SynthOptions::default()
        };
        let data = separable_dataset(&opts);
        let shuffled = permute_labels(&data.train, 11);
        let count = |rs: &[QuestionRecord]| rs.iter().filter(|r| r.label == 1).count();
        assert_eq!(count(&data.train), count(&shuffled));
        assert!(data
            .train
            .iter()
            .zip(&shuffled)
            .any(|(a, b)| a.label != b.label));
        // identical apart from labels
        for (a, b) in data.train.iter().zip(&shuffled) {
            assert_eq!(a.tokens, b.tokens);
            assert_eq!(a.post_id, b.post_id);
        }
        let again = permute_labels(&data.train, 11);
        assert_eq!(shuffled, again);
    }
}
