//! Predicting whether forum questions get answered.
//!
//! This crate implements the full pipeline behind the `answerable` CLI:
//!
//! - [`text`] — tokenization, single-question detection, word-embedding
//!   tables, and fixed-length sequence encoding.
//! - [`corpus`] — AMA thread-dump ingestion: tree reconstruction, thread
//!   and post filters, labeled question extraction, temporally uniform
//!   splits, evaluation pairs, and corpus statistics.
//! - [`ngram`] — unique n-gram counting with frequency thresholds, growth
//!   ratios, and the derived per-window filter allocation.
//! - [`neural`] — the variable-window text CNN (convolution, max-over-time
//!   pooling, softmax) with exact backpropagation and an Adam training loop.
//!   The fixed-window baseline CNN is the same model with a single window.
//! - [`logreg`] — the bag-of-words logistic-regression baseline.
//! - [`eval`] — AUC/ROC metrics and pairwise agreement.
//! - [`experiment`] — window/filter grid and training-size curve runners.
//! - [`checkpoint`] — the binary model container shared by both model kinds.
//! - [`synth`] — synthetic dataset generators used by tests and demos.
//!
//! Everything is deterministic for a fixed seed: parameter initialization,
//! data shuffling, dropout, and splits all derive from explicit seeds, and
//! training is 64-bit and single-threaded.

#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod corpus;
pub mod eval;
pub mod experiment;
pub mod logreg;
pub mod neural;
pub mod ngram;
pub mod synth;
pub mod text;

pub use text::{EmbeddingTable, EncodedQuestion, TokenSequence};
