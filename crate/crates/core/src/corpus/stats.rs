//! Corpus summary statistics, bucketed by thread creation year.
//!
//! Only threads that pass the thread-level filters contribute. Posts,
//! sentences, and words count every tree post including the submission;
//! words are the word-class tokens of the markdown-stripped body. Questions
//! for a thread are attributed to its root year. The overall row sums the
//! counts and macro-averages the per-year means.

use std::io;
use std::path::Path;

use chrono::{DateTime, Datelike};
use serde::Serialize;

use super::{extract_questions, thread_passes_filters, PipelineOptions, Thread};
use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearStats {
    pub year: i32,
    pub threads: u64,
    pub posts_per_thread: f64,
    pub sentences_per_post: f64,
    pub words_per_post: f64,
    pub questions: u64,
    pub answered_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub years: Vec<YearStats>,
    pub total_threads: u64,
    pub total_questions: u64,
    /// Macro averages over the year rows.
    pub mean_posts_per_thread: f64,
    pub mean_sentences_per_post: f64,
    pub mean_words_per_post: f64,
    pub mean_answered_pct: f64,
}

#[derive(Default)]
struct Accum {
    threads: u64,
    posts: u64,
    sentences: u64,
    words: u64,
    questions: u64,
    answered: u64,
}

pub fn corpus_stats(threads: &[Thread], opts: &PipelineOptions) -> CorpusStats {
    let mut by_year: std::collections::BTreeMap<i32, Accum> = std::collections::BTreeMap::new();
    for thread in threads {
        if !thread_passes_filters(thread, opts.min_first_tier) {
            continue;
        }
        let year = DateTime::from_timestamp(thread.root().created_utc, 0)
            .map(|dt| dt.year())
            .unwrap_or(1970);
        let acc = by_year.entry(year).or_default();
        acc.threads += 1;
        acc.posts += thread.posts().len() as u64;
        for post in thread.posts() {
            let stripped = text::strip_markdown(&post.body);
            let stripped = stripped.trim();
            acc.sentences += text::split_sentences(stripped).len() as u64;
            acc.words += text::tokenize(stripped)
                .tokens()
                .iter()
                .filter(|t| text::is_word_token(t))
                .count() as u64;
        }
        for q in extract_questions(thread, opts.reply_scope) {
            acc.questions += 1;
            acc.answered += q.label as u64;
        }
    }

    let years: Vec<YearStats> = by_year
        .into_iter()
        .map(|(year, a)| YearStats {
            year,
            threads: a.threads,
            posts_per_thread: a.posts as f64 / a.threads as f64,
            sentences_per_post: ratio(a.sentences, a.posts),
            words_per_post: ratio(a.words, a.posts),
            questions: a.questions,
            answered_pct: 100.0 * ratio(a.answered, a.questions),
        })
        .collect();

    let n = years.len() as f64;
    let mean = |f: fn(&YearStats) -> f64| {
        if years.is_empty() {
            0.0
        } else {
            years.iter().map(f).sum::<f64>() / n
        }
    };
    CorpusStats {
        total_threads: years.iter().map(|y| y.threads).sum(),
        total_questions: years.iter().map(|y| y.questions).sum(),
        mean_posts_per_thread: mean(|y| y.posts_per_thread),
        mean_sentences_per_post: mean(|y| y.sentences_per_post),
        mean_words_per_post: mean(|y| y.words_per_post),
        mean_answered_pct: mean(|y| y.answered_pct),
        years,
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Writes one row per year plus a final `all` row. Means and percentages
/// are fixed to two decimals.
pub fn write_stats_csv(stats: &CorpusStats, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "year",
        "threads",
        "posts_per_thread",
        "sentences_per_post",
        "words_per_post",
        "questions",
        "answered_pct",
    ])?;
    for y in &stats.years {
        w.write_record([
            y.year.to_string(),
            y.threads.to_string(),
            format!("{:.2}", y.posts_per_thread),
            format!("{:.2}", y.sentences_per_post),
            format!("{:.2}", y.words_per_post),
            y.questions.to_string(),
            format!("{:.2}", y.answered_pct),
        ])?;
    }
    w.write_record([
        "all".to_string(),
        stats.total_threads.to_string(),
        format!("{:.2}", stats.mean_posts_per_thread),
        format!("{:.2}", stats.mean_sentences_per_post),
        format!("{:.2}", stats.mean_words_per_post),
        stats.total_questions.to_string(),
        format!("{:.2}", stats.mean_answered_pct),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::test_support::post;
    use super::*;
    use crate::corpus::ReplyScope;

    const Y2012: i64 = 1340000000;
    const Y2013: i64 = 1370000000;

    /// Root plus three first-tier posts, hand-countable bodies.
    fn small_thread(id: &str, base: i64) -> Thread {
        Thread::parse(
            id.into(),
            "Science AMA".into(),
            String::new(),
            vec![
                // 2 sentences, 5 words
                post("r", None, "host", "Hello there. Ask me anything.", base),
                // question, answered: 1 sentence, 4 words
                post("q1", Some("r"), "u1", "How did it start?", base + 10),
                post("h1", Some("q1"), "host", "slowly", base + 20),
                // question, unanswered: 1 sentence, 3 words
                post("q2", Some("r"), "u2", "Any regrets yet?", base + 15),
                // not a question: 1 sentence, 2 words
                post("c3", Some("r"), "u3", "Great thread!", base + 12),
            ],
        )
        .unwrap()
    }

    fn opts() -> PipelineOptions {
        PipelineOptions {
            min_first_tier: 3,
            reply_scope: ReplyScope::DirectChildren,
        }
    }

    #[test]
    fn hand_counted_single_year() {
        let threads = vec![small_thread("a", Y2012)];
        let s = corpus_stats(&threads, &opts());
        assert_eq!(s.years.len(), 1);
        let y = &s.years[0];
        assert_eq!(y.year, 2012);
        assert_eq!(y.threads, 1);
        assert_eq!(y.questions, 2);
        assert!((y.posts_per_thread - 5.0).abs() < 1e-12);
        // sentences: 2 + 1 + 1 + 1 + 1 = 6 over 5 posts
        assert!((y.sentences_per_post - 6.0 / 5.0).abs() < 1e-12);
        // words: 5 + 4 + 1 + 3 + 2 = 15 over 5 posts
        assert!((y.words_per_post - 15.0 / 5.0).abs() < 1e-12);
        assert!((y.answered_pct - 50.0).abs() < 1e-12);
    }

    #[test]
    fn overall_row_macro_averages_years() {
        // second year gets two copies of the same thread: identical means,
        // doubled counts
        let threads = vec![
            small_thread("a", Y2012),
            small_thread("b", Y2013),
            small_thread("c", Y2013 + 1000),
        ];
        let s = corpus_stats(&threads, &opts());
        assert_eq!(s.years.len(), 2);
        assert_eq!(s.total_threads, 3);
        assert_eq!(s.total_questions, 6);
        assert_eq!(s.years[1].threads, 2);
        assert!((s.mean_posts_per_thread - 5.0).abs() < 1e-12);
        assert!((s.mean_answered_pct - 50.0).abs() < 1e-12);
    }

    #[test]
    fn filtered_threads_contribute_nothing() {
        let big = small_thread("a", Y2012);
        let tiny = Thread::parse(
            "b".into(),
            "Tiny".into(),
            String::new(),
            vec![
                post("r", None, "h", "Hi.", Y2012),
                post("c", Some("r"), "u", "Yo.", Y2012 + 1),
            ],
        )
        .unwrap();
        let s = corpus_stats(&[big, tiny], &opts());
        assert_eq!(s.total_threads, 1);
    }

    #[test]
    fn csv_layout_is_stable() {
        let threads = vec![small_thread("a", Y2012)];
        let s = corpus_stats(&threads, &opts());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.csv");
        write_stats_csv(&s, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let expected = "year,threads,posts_per_thread,sentences_per_post,words_per_post,questions,answered_pct\n\
             2012,1,5.00,1.20,3.00,2,50.00\n\
             all,1,5.00,1.20,3.00,2,50.00\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn empty_corpus_yields_empty_table() {
        let s = corpus_stats(&[], &opts());
        assert!(s.years.is_empty());
        assert_eq!(s.total_threads, 0);
        assert_eq!(s.mean_answered_pct, 0.0);
    }
}
