//! Temporally uniform ordering, train/valid/test splits, and nested
//! subsampling.
//!
//! Records are bucketed by calendar period of `created_utc` (UTC). A draw
//! order is built by water-filling across buckets: each pick takes from the
//! bucket whose filled fraction would stay lowest, so every prefix of the
//! order covers all periods near-proportionally. Within a bucket the order
//! is a seeded shuffle. Splits are consecutive chunks of this order, which
//! makes subsamples of different sizes nested for a fixed seed.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::QuestionRecord;

/// Calendar resolution of the temporal buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Month,
    Year,
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("requested {requested} records but only {available} are available")]
    Shortfall { requested: usize, available: usize },
    #[error("timestamp {timestamp} is out of range for calendar bucketing")]
    BadTimestamp { timestamp: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<QuestionRecord>,
    pub valid: Vec<QuestionRecord>,
    pub test: Vec<QuestionRecord>,
}

fn bucket_key(timestamp: i64, granularity: Granularity) -> Result<(i32, u32), SplitError> {
    let dt =
        DateTime::from_timestamp(timestamp, 0).ok_or(SplitError::BadTimestamp { timestamp })?;
    Ok(match granularity {
        Granularity::Month => (dt.year(), dt.month()),
        Granularity::Year => (dt.year(), 0),
    })
}

/// Builds the temporally uniform draw order over `records`, as indices.
///
/// Bucket interiors are shuffled with a stream seeded by `seed`; buckets are
/// visited in chronological key order while shuffling, so the result depends
/// only on (records, granularity, seed), never on prior RNG use.
pub fn uniform_order(
    records: &[QuestionRecord],
    granularity: Granularity,
    seed: u64,
) -> Result<Vec<usize>, SplitError> {
    let mut buckets: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        buckets
            .entry(bucket_key(r.created_utc, granularity)?)
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = Vec::with_capacity(buckets.len());
    for (_, mut idxs) in buckets {
        // bucket membership is input-order dependent; sort by stable keys
        // before shuffling so input order cannot leak through
        idxs.sort_by(|&a, &b| {
            let ra = &records[a];
            let rb = &records[b];
            (ra.created_utc, &ra.thread_id, &ra.post_id).cmp(&(
                rb.created_utc,
                &rb.thread_id,
                &rb.post_id,
            ))
        });
        idxs.shuffle(&mut rng);
        pools.push(idxs);
    }

    let total: usize = pools.len();
    let mut taken = vec![0usize; total];
    let mut order = Vec::with_capacity(records.len());
    loop {
        // pick the bucket minimizing (taken + 1) / size, ties to the
        // earliest bucket; exact integer cross-multiplication
        let mut best: Option<usize> = None;
        for b in 0..total {
            if taken[b] >= pools[b].len() {
                continue;
            }
            let better = match best {
                None => true,
                Some(c) => {
                    let lhs = (taken[b] as u128 + 1) * pools[c].len() as u128;
                    let rhs = (taken[c] as u128 + 1) * pools[b].len() as u128;
                    lhs < rhs
                }
            };
            if better {
                best = Some(b);
            }
        }
        match best {
            Some(b) => {
                order.push(pools[b][taken[b]]);
                taken[b] += 1;
            }
            None => break,
        }
    }
    Ok(order)
}

/// Takes the first `size` records of the uniform draw order.
///
/// For a fixed seed and granularity, a smaller subsample is a prefix of a
/// larger one over the same records.
pub fn uniform_subsample(
    records: &[QuestionRecord],
    size: usize,
    granularity: Granularity,
    seed: u64,
) -> Result<Vec<QuestionRecord>, SplitError> {
    if size > records.len() {
        return Err(SplitError::Shortfall {
            requested: size,
            available: records.len(),
        });
    }
    let order = uniform_order(records, granularity, seed)?;
    Ok(order[..size].iter().map(|&i| records[i].clone()).collect())
}

/// Cuts train, valid, and test as consecutive chunks of the uniform order.
pub fn split_dataset(
    records: &[QuestionRecord],
    sizes: (usize, usize, usize),
    granularity: Granularity,
    seed: u64,
) -> Result<Splits, SplitError> {
    let (n_train, n_valid, n_test) = sizes;
    let requested = n_train + n_valid + n_test;
    if requested > records.len() {
        return Err(SplitError::Shortfall {
            requested,
            available: records.len(),
        });
    }
    let order = uniform_order(records, granularity, seed)?;
    let pick = |range: std::ops::Range<usize>| -> Vec<QuestionRecord> {
        order[range].iter().map(|&i| records[i].clone()).collect()
    };
    Ok(Splits {
        train: pick(0..n_train),
        valid: pick(n_train..n_train + n_valid),
        test: pick(n_train + n_valid..requested),
    })
}
