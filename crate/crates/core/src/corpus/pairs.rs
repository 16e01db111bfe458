//! Pairing of answered with unanswered questions for side-by-side judging.
//!
//! Pairs minimize posting-time distance so that neither member enjoys a
//! freshness advantage. Candidates are matched greedily in order of
//! increasing |Δt|, each question used at most once; ties break on the
//! answered timestamp, then the unanswered timestamp, then post ids, so the
//! result never depends on input order.

use serde::{Deserialize, Serialize};

use super::QuestionRecord;

/// One judging item: an answered and an unanswered question from the same
/// thread, close in posting time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionPair {
    pub answered: QuestionRecord,
    pub unanswered: QuestionRecord,
}

impl QuestionPair {
    pub fn time_distance(&self) -> i64 {
        (self.answered.created_utc - self.unanswered.created_utc).abs()
    }
}

/// Pairs questions from a single thread. Records with other thread ids are
/// the caller's bug, not a recoverable state.
pub fn build_pairs(records: &[QuestionRecord]) -> Vec<QuestionPair> {
    if let Some(first) = records.first() {
        debug_assert!(
            records.iter().all(|r| r.thread_id == first.thread_id),
            "build_pairs requires records from one thread"
        );
    }
    let answered: Vec<&QuestionRecord> = records.iter().filter(|r| r.label == 1).collect();
    let unanswered: Vec<&QuestionRecord> = records.iter().filter(|r| r.label == 0).collect();

    let mut candidates: Vec<(i64, usize, usize)> =
        Vec::with_capacity(answered.len() * unanswered.len());
    for (ai, a) in answered.iter().enumerate() {
        for (ui, u) in unanswered.iter().enumerate() {
            candidates.push(((a.created_utc - u.created_utc).abs(), ai, ui));
        }
    }
    candidates.sort_by(|x, y| {
        let ka = (
            x.0,
            answered[x.1].created_utc,
            unanswered[x.2].created_utc,
            &answered[x.1].post_id,
            &unanswered[x.2].post_id,
        );
        let kb = (
            y.0,
            answered[y.1].created_utc,
            unanswered[y.2].created_utc,
            &answered[y.1].post_id,
            &unanswered[y.2].post_id,
        );
        ka.cmp(&kb)
    });

    let mut a_used = vec![false; answered.len()];
    let mut u_used = vec![false; unanswered.len()];
    let mut pairs = Vec::new();
    for (_, ai, ui) in candidates {
        if a_used[ai] || u_used[ui] {
            continue;
        }
        a_used[ai] = true;
        u_used[ui] = true;
        pairs.push(QuestionPair {
            answered: answered[ai].clone(),
            unanswered: unanswered[ui].clone(),
        });
    }
    pairs.sort_by(|x, y| {
        (x.answered.created_utc, &x.answered.post_id)
            .cmp(&(y.answered.created_utc, &y.answered.post_id))
    });
    pairs
}

/// Groups records by thread id (ascending) and pairs within each thread.
pub fn build_pairs_by_thread(records: &[QuestionRecord]) -> Vec<QuestionPair> {
    let mut by_thread: std::collections::BTreeMap<&str, Vec<QuestionRecord>> =
        std::collections::BTreeMap::new();
    for r in records {
        by_thread.entry(&r.thread_id).or_default().push(r.clone());
    }
    by_thread
        .values()
        .flat_map(|group| build_pairs(group))
        .collect()
}
