//! Unique n-gram counting, growth ratios, and the derived filter allocation.
//!
//! N-grams are counted within sentences only (no cross-sentence windows),
//! and grams below a frequency threshold are discarded before the unique
//! count is taken. The growth ratios — bigrams over unigrams, and each of
//! the 3/4/5-gram counts over bigrams — drive how many convolution filters
//! each window size receives.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest n-gram order tracked by a profile.
pub const MAX_ORDER: usize = 5;

/// Separator used to join tokens into map keys; never appears in tokens
/// produced by the tokenizer (it is whitespace-class for `split`).
const JOIN: char = '\u{1f}';

#[derive(Debug, Error, PartialEq)]
pub enum NgramError {
    #[error("growth ratios undefined: unigram or bigram count is zero")]
    UndefinedRatios,
    #[error("no profiles supplied")]
    NoProfiles,
}

/// Frequency maps for orders `1..=max_order`, mergeable across shards.
#[derive(Debug, Clone)]
pub struct NgramCounter {
    max_order: usize,
    maps: Vec<HashMap<String, u64>>,
}

impl NgramCounter {
    pub fn new(max_order: usize) -> Self {
        assert!(max_order >= 1);
        NgramCounter {
            max_order,
            maps: vec![HashMap::new(); max_order],
        }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Adds every within-sentence n-gram of one token sequence.
    pub fn add_sentence<S: AsRef<str>>(&mut self, tokens: &[S]) {
        for n in 1..=self.max_order {
            if tokens.len() < n {
                break;
            }
            let map = &mut self.maps[n - 1];
            for window in tokens.windows(n) {
                let mut key = String::new();
                for (i, t) in window.iter().enumerate() {
                    if i > 0 {
                        key.push(JOIN);
                    }
                    key.push_str(t.as_ref());
                }
                *map.entry(key).or_insert(0) += 1;
            }
        }
    }

    /// Exact merge of another shard's frequency maps.
    pub fn merge(&mut self, other: NgramCounter) {
        assert_eq!(self.max_order, other.max_order);
        for (mine, theirs) in self.maps.iter_mut().zip(other.maps) {
            for (k, v) in theirs {
                *mine.entry(k).or_insert(0) += v;
            }
        }
    }

    /// Number of distinct n-grams whose corpus frequency is at least
    /// `min_count`.
    pub fn unique_count(&self, n: usize, min_count: u64) -> u64 {
        assert!((1..=self.max_order).contains(&n));
        assert!(min_count >= 1);
        self.maps[n - 1]
            .values()
            .filter(|&&c| c >= min_count)
            .count() as u64
    }
}

/// Counts distinct n-grams with frequency >= `min_count` over a corpus of
/// token sequences. Only order `n` is tallied.
pub fn count_unique_ngrams<S, T>(
    corpus: impl IntoIterator<Item = T>,
    n: usize,
    min_count: u64,
) -> u64
where
    T: AsRef<[S]>,
    S: AsRef<str>,
{
    assert!(n >= 1);
    assert!(min_count >= 1);
    let mut map: HashMap<String, u64> = HashMap::new();
    for sentence in corpus {
        let tokens = sentence.as_ref();
        if tokens.len() < n {
            continue;
        }
        for window in tokens.windows(n) {
            let mut key = String::new();
            for (i, t) in window.iter().enumerate() {
                if i > 0 {
                    key.push(JOIN);
                }
                key.push_str(t.as_ref());
            }
            *map.entry(key).or_insert(0) += 1;
        }
    }
    map.values().filter(|&&c| c >= min_count).count() as u64
}

/// Per-order unique counts and growth ratios for orders 1 through 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramProfile {
    /// `counts[i]` is the unique (i+1)-gram count after thresholding.
    pub counts: [u64; MAX_ORDER],
    /// Threshold applied to each order.
    pub min_counts: [u64; MAX_ORDER],
    /// Bigrams over unigrams; `None` when the unigram count is zero.
    pub ratio_unigram_bigram: Option<f64>,
    /// `[3,4,5]`-gram counts over bigrams; `None` when bigrams are zero.
    pub ratio_bigram_higher: [Option<f64>; 3],
}

impl NgramProfile {
    /// Derives the ratios from raw per-order counts.
    pub fn from_counts(counts: [u64; MAX_ORDER], min_counts: [u64; MAX_ORDER]) -> Self {
        let ratio_unigram_bigram = (counts[0] > 0).then(|| counts[1] as f64 / counts[0] as f64);
        let mut ratio_bigram_higher = [None; 3];
        if counts[1] > 0 {
            for (i, slot) in ratio_bigram_higher.iter_mut().enumerate() {
                *slot = Some(counts[i + 2] as f64 / counts[1] as f64);
            }
        }
        NgramProfile {
            counts,
            min_counts,
            ratio_unigram_bigram,
            ratio_bigram_higher,
        }
    }

    pub fn ratios_defined(&self) -> bool {
        self.ratio_unigram_bigram.is_some() && self.ratio_bigram_higher.iter().all(|r| r.is_some())
    }
}

/// Counts orders 1..=5 over `corpus` with one threshold per order.
///
/// The same threshold for every order is the common case; pass distinct
/// values to reproduce treatments where unigrams were cut differently.
pub fn growth_profile_per_order<S, T>(
    corpus: impl IntoIterator<Item = T>,
    min_counts: [u64; MAX_ORDER],
) -> NgramProfile
where
    T: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut counter = NgramCounter::new(MAX_ORDER);
    for sentence in corpus {
        counter.add_sentence(sentence.as_ref());
    }
    profile_from_counter(&counter, min_counts)
}

/// Counts orders 1..=5 with a uniform frequency threshold.
pub fn growth_profile<S, T>(corpus: impl IntoIterator<Item = T>, min_count: u64) -> NgramProfile
where
    T: AsRef<[S]>,
    S: AsRef<str>,
{
    growth_profile_per_order(corpus, [min_count; MAX_ORDER])
}

/// Builds a profile from an already-populated (possibly merged) counter.
pub fn profile_from_counter(counter: &NgramCounter, min_counts: [u64; MAX_ORDER]) -> NgramProfile {
    assert!(counter.max_order() >= MAX_ORDER);
    let mut counts = [0u64; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        counts[n - 1] = counter.unique_count(n, min_counts[n - 1]);
    }
    NgramProfile::from_counts(counts, min_counts)
}

/// How filter counts are derived from profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    /// The preset multipliers `{1, 20, 60, 60, 60}`.
    Preset,
    /// Multipliers recomputed from the supplied profiles' growth ratios.
    Computed,
}

/// Filter counts per window size `1..=5`, each a multiple of `x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterAllocation {
    pub x: usize,
    /// `counts[i]` is the filter count for window size `i + 1`.
    pub counts: [usize; MAX_ORDER],
}

impl FilterAllocation {
    /// The preset allocation `{x, 20x, 60x, 60x, 60x}`.
    pub fn preset(x: usize) -> Self {
        assert!(x >= 1);
        FilterAllocation {
            x,
            counts: [x, 20 * x, 60 * x, 60 * x, 60 * x],
        }
    }

    pub fn count_for_window(&self, n: usize) -> Option<usize> {
        (1..=MAX_ORDER).contains(&n).then(|| self.counts[n - 1])
    }
}

fn round_to_ten(v: f64) -> usize {
    let rounded = (v / 10.0).round() as usize * 10;
    rounded.max(1)
}

/// Derives the per-window filter allocation.
///
/// Preset mode ignores the profiles and returns `{x, 20x, 60x, 60x, 60x}`.
/// Computed mode averages the unigram→bigram ratio across profiles for the
/// window-2 multiplier, and multiplies it by the mean of all bigram→higher
/// ratios (across orders and profiles) for windows 3–5; both multipliers
/// are rounded to the nearest 10 with a floor of 1.
pub fn derive_allocation(
    profiles: &[NgramProfile],
    x: usize,
    mode: AllocationMode,
) -> Result<FilterAllocation, NgramError> {
    assert!(x >= 1);
    match mode {
        AllocationMode::Preset => Ok(FilterAllocation::preset(x)),
        AllocationMode::Computed => {
            if profiles.is_empty() {
                return Err(NgramError::NoProfiles);
            }
            if profiles.iter().any(|p| !p.ratios_defined()) {
                return Err(NgramError::UndefinedRatios);
            }
            let mean_ub = profiles
                .iter()
                .map(|p| p.ratio_unigram_bigram.unwrap())
                .sum::<f64>()
                / profiles.len() as f64;
            let bn: Vec<f64> = profiles
                .iter()
                .flat_map(|p| p.ratio_bigram_higher.iter().map(|r| r.unwrap()))
                .collect();
            let mean_bn = bn.iter().sum::<f64>() / bn.len() as f64;
            let tier2 = round_to_ten(mean_ub);
            let tier345 = round_to_ten(mean_ub * mean_bn);
            Ok(FilterAllocation {
                x,
                counts: [x, tier2 * x, tier345 * x, tier345 * x, tier345 * x],
            })
        }
    }
}
