//! Bag-of-words logistic regression baseline.
//!
//! Features are lowercased unigram counts (or presence flags) over a closed,
//! alphabetically sorted vocabulary with stopwords removed. Training
//! minimizes the mean logistic loss plus an L2 penalty on the weights (the
//! intercept is not penalized) by full-batch gradient descent with Armijo
//! backtracking line search.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QuestionRecord;
use crate::text::TokenSequence;

/// English stopwords excluded from the vocabulary.
pub const STOPWORDS: &[&str] = &[
    "i",
    "me",
    "my",
    "myself",
    "we",
    "our",
    "ours",
    "ourselves",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "it",
    "its",
    "itself",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "what",
    "which",
    "who",
    "whom",
    "this",
    "that",
    "these",
    "those",
    "am",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "have",
    "has",
    "had",
    "having",
    "do",
    "does",
    "did",
    "doing",
    "would",
    "should",
    "could",
    "ought",
    "i'm",
    "you're",
    "he's",
    "she's",
    "it's",
    "we're",
    "they're",
    "i've",
    "you've",
    "we've",
    "they've",
    "i'd",
    "you'd",
    "he'd",
    "she'd",
    "we'd",
    "they'd",
    "i'll",
    "you'll",
    "he'll",
    "she'll",
    "we'll",
    "they'll",
    "isn't",
    "aren't",
    "wasn't",
    "weren't",
    "hasn't",
    "haven't",
    "hadn't",
    "doesn't",
    "don't",
    "didn't",
    "won't",
    "wouldn't",
    "shan't",
    "shouldn't",
    "can't",
    "cannot",
    "couldn't",
    "mustn't",
    "let's",
    "that's",
    "who's",
    "what's",
    "here's",
    "there's",
    "when's",
    "where's",
    "why's",
    "how's",
    "a",
    "an",
    "the",
    "and",
    "but",
    "if",
    "or",
    "because",
    "as",
    "until",
    "while",
    "of",
    "at",
    "by",
    "for",
    "with",
    "about",
    "against",
    "between",
    "into",
    "through",
    "during",
    "before",
    "after",
    "above",
    "below",
    "to",
    "from",
    "up",
    "down",
    "in",
    "out",
    "on",
    "off",
    "over",
    "under",
    "again",
    "further",
    "then",
    "once",
    "here",
    "there",
    "when",
    "where",
    "why",
    "how",
    "all",
    "any",
    "both",
    "each",
    "few",
    "more",
    "most",
    "other",
    "some",
    "such",
    "no",
    "nor",
    "not",
    "only",
    "own",
    "same",
    "so",
    "than",
    "too",
    "very",
    "can",
    "will",
    "just",
    "now",
];

#[derive(Debug, Error)]
pub enum LogRegError {
    #[error("training needs both classes: {positives} positive, {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },
    #[error("features and labels differ in length ({features} vs {labels})")]
    LengthMismatch { features: usize, labels: usize },
    #[error("training set is empty")]
    NoExamples,
    #[error("vocabulary is empty after stopword and frequency filtering")]
    EmptyVocabulary,
    #[error("regularization strength must be non-negative, got {lambda}")]
    BadLambda { lambda: f64 },
    #[error("line search failed to make progress at iteration {iteration}")]
    LineSearchFailed { iteration: usize },
}

fn stopword_set() -> HashSet<&'static str> {
    STOPWORDS.iter().copied().collect()
}

/// Closed vocabulary, alphabetically sorted so feature indices are
/// reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Collects lowercased non-stopword tokens appearing in at least
    /// `min_df` documents.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a TokenSequence>, min_df: usize) -> Self {
        let stop = stopword_set();
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let mut seen: HashSet<String> = HashSet::new();
            for token in doc.tokens() {
                let lower = token.to_lowercase();
                if stop.contains(lower.as_str()) {
                    continue;
                }
                if seen.insert(lower.clone()) {
                    *df.entry(lower).or_insert(0) += 1;
                }
            }
        }
        let mut words: Vec<String> = df
            .into_iter()
            .filter(|&(_, n)| n >= min_df.max(1))
            .map(|(w, _)| w)
            .collect();
        words.sort();
        Vocabulary::from_words(words)
    }

    /// Wraps an already sorted, deduplicated word list.
    pub fn from_words(words: Vec<String>) -> Self {
        debug_assert!(
            words.windows(2).all(|w| w[0] < w[1]),
            "words must be sorted and unique"
        );
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { words, index }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }
}

/// Sparse feature vector: (index, value) sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct BowVector {
    entries: Vec<(u32, f64)>,
}

impl BowVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| v * weights[i as usize])
            .sum()
    }
}

/// Counts (or flags, when `binary`) in-vocabulary lowercased tokens.
pub fn featurize(tokens: &TokenSequence, vocab: &Vocabulary, binary: bool) -> BowVector {
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for token in tokens.tokens() {
        if let Some(i) = vocab.index_of(&token.to_lowercase()) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(i, c)| (i, if binary { 1.0 } else { c }))
        .collect();
    entries.sort_by_key(|&(i, _)| i);
    BowVector { entries }
}

/// Weights and intercept of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub binary: bool,
}

impl LogRegModel {
    pub fn score(&self, features: &BowVector) -> f64 {
        sigmoid(features.dot(&self.weights) + self.intercept)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegOptions {
    pub lambda: f64,
    pub binary: bool,
    /// Document-frequency threshold for the vocabulary.
    pub min_df: usize,
    pub max_iters: usize,
    /// Stop once the gradient infinity norm falls below this.
    pub tolerance: f64,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        LogRegOptions {
            lambda: 1e-4,
            binary: false,
            min_df: 1,
            max_iters: 10_000,
            tolerance: 1e-6,
        }
    }
}

/// Mean logistic loss plus `lambda/2 * ||w||^2`, intercept unpenalized.
fn objective(
    features: &[BowVector],
    labels: &[u8],
    weights: &[f64],
    intercept: f64,
    lambda: f64,
) -> f64 {
    let n = features.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let margin = x.dot(weights) + intercept;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        loss += softplus(-sign * margin);
    }
    loss / n + 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

fn gradient(
    features: &[BowVector],
    labels: &[u8],
    weights: &[f64],
    intercept: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let p = sigmoid(x.dot(weights) + intercept);
        let err = (p - y as f64) / n;
        for &(i, v) in x.entries() {
            gw[i as usize] += err * v;
        }
        gb += err;
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g += lambda * w;
    }
    (gw, gb)
}

/// Fits weights from zero by gradient descent with Armijo backtracking.
pub fn train_logreg(
    features: &[BowVector],
    labels: &[u8],
    dim: usize,
    opts: &LogRegOptions,
) -> Result<LogRegModel, LogRegError> {
    if features.len() != labels.len() {
        return Err(LogRegError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(LogRegError::NoExamples);
    }
    if opts.lambda < 0.0 {
        return Err(LogRegError::BadLambda {
            lambda: opts.lambda,
        });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(LogRegError::SingleClass {
            positives,
            negatives,
        });
    }

    let mut weights = vec![0.0; dim];
    let mut intercept = 0.0;
    let mut value = objective(features, labels, &weights, intercept, opts.lambda);
    let mut step: f64 = 1.0;
    const ARMIJO: f64 = 1e-4;

    for iteration in 0..opts.max_iters {
        let (gw, gb) = gradient(features, labels, &weights, intercept, opts.lambda);
        let inf_norm = gw.iter().map(|g| g.abs()).fold(gb.abs(), f64::max);
        if inf_norm < opts.tolerance {
            break;
        }
        let sq_norm = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        // start from twice the last accepted step so accepted steps can grow
        step = (step * 2.0).min(1e6);
        loop {
            let trial_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let trial_b = intercept - step * gb;
            let trial_value = objective(features, labels, &trial_w, trial_b, opts.lambda);
            if trial_value <= value - ARMIJO * step * sq_norm {
                weights = trial_w;
                intercept = trial_b;
                value = trial_value;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(LogRegError::LineSearchFailed { iteration });
            }
        }
    }
    Ok(LogRegModel {
        weights,
        intercept,
        lambda: opts.lambda,
        binary: opts.binary,
    })
}

/// Vocabulary plus fitted model, the unit that gets checkpointed.
#[derive(Debug, Clone, PartialEq)]
pub struct BowClassifier {
    pub vocab: Vocabulary,
    pub model: LogRegModel,
}

impl BowClassifier {
    /// Builds the vocabulary from the training records and fits the model.
    pub fn fit(records: &[QuestionRecord], opts: &LogRegOptions) -> Result<Self, LogRegError> {
        let vocab = Vocabulary::build(records.iter().map(|r| &r.tokens), opts.min_df);
        if vocab.is_empty() {
            return Err(LogRegError::EmptyVocabulary);
        }
        let features: Vec<BowVector> = records
            .iter()
            .map(|r| featurize(&r.tokens, &vocab, opts.binary))
            .collect();
        let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
        let model = train_logreg(&features, &labels, vocab.len(), opts)?;
        Ok(BowClassifier { vocab, model })
    }

    pub fn score(&self, tokens: &TokenSequence) -> f64 {
        self.model
            .score(&featurize(tokens, &self.vocab, self.model.binary))
    }

    pub fn score_records(&self, records: &[QuestionRecord]) -> Vec<f64> {
        records.iter().map(|r| self.score(&r.tokens)).collect()
    }
}
