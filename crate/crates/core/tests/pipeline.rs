//! End-to-end checks of the ingestion pipeline against the hand-counted
//! three-thread fixture: one real 2012 session, one "[AMA Request]"
//! placeholder, and one 2013 session with an orphaned comment.

use std::path::PathBuf;

use answerable_core::corpus::{
    corpus_stats, extract_corpus, filter_verdict, read_questions_jsonl, read_threads_jsonl,
    write_questions_jsonl, write_stats_csv, FilterVerdict, PipelineOptions, QuestionRecord,
    ReplyScope,
};

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/threads.jsonl")
}

fn fixture_options() -> PipelineOptions {
    PipelineOptions {
        min_first_tier: 3,
        reply_scope: ReplyScope::DirectChildren,
    }
}

#[test]
fn fixture_threads_filter_as_hand_counted() {
    let threads = read_threads_jsonl(fixture_path()).unwrap();
    assert_eq!(threads.len(), 3);
    let verdicts: Vec<(&str, FilterVerdict)> = threads
        .iter()
        .map(|t| (t.id.as_str(), filter_verdict(t, 3)))
        .collect();
    assert_eq!(
        verdicts,
        vec![
            ("alpha2012", FilterVerdict::Kept),
            ("beta2012req", FilterVerdict::AmaRequest),
            ("gamma2013", FilterVerdict::Kept),
        ]
    );

    let gamma = &threads[2];
    let quarantined: Vec<&str> = gamma.quarantined().iter().map(|p| p.id.as_str()).collect();
    assert_eq!(quarantined, vec!["c4"]);
}

#[test]
fn fixture_questions_match_hand_counted_set() {
    let threads = read_threads_jsonl(fixture_path()).unwrap();
    let records = extract_corpus(&threads, &fixture_options());

    let summary: Vec<(&str, &str, &str, i64, u8)> = records
        .iter()
        .map(|r| {
            (
                r.thread_id.as_str(),
                r.post_id.as_str(),
                r.text.as_str(),
                r.created_utc,
                r.label,
            )
        })
        .collect();
    assert_eq!(
        summary,
        vec![
            (
                "alpha2012",
                "a1",
                "How many hives do you manage?",
                1331640600,
                1
            ),
            ("alpha2012", "a3", "Do bees recognize you?", 1331641200, 0),
            (
                "gamma2013",
                "c1",
                "What does space smell like?",
                1373630700,
                1
            ),
            (
                "gamma2013",
                "c3",
                "How do you sleep up there?",
                1373631300,
                0
            ),
        ]
    );

    let tokens: Vec<&str> = records[0]
        .tokens
        .tokens()
        .iter()
        .map(String::as_str)
        .collect();
    assert_eq!(
        tokens,
        vec!["How", "many", "hives", "do", "you", "manage", "?"]
    );
}

/// The 2012 host's last post is at 1331643600; the question at 1331647200
/// falls outside the active period, the two-sentence post fails the single
/// question filter, the nested question is not first-tier, and host posts
/// are never questions.
#[test]
fn fixture_exclusions_are_exact() {
    let threads = read_threads_jsonl(fixture_path()).unwrap();
    let records = extract_corpus(&threads, &fixture_options());
    let ids: Vec<&str> = records.iter().map(|r| r.post_id.as_str()).collect();
    for excluded in [
        "a4", "a5", "a6", "a7", "a8", "b1", "b2", "b3", "c4", "c5", "c6",
    ] {
        assert!(!ids.contains(&excluded), "{excluded} should be excluded");
    }
}

#[test]
fn fixture_stats_match_hand_counted_sheet() {
    let threads = read_threads_jsonl(fixture_path()).unwrap();
    let stats = corpus_stats(&threads, &fixture_options());

    assert_eq!(stats.years.len(), 2);
    let y2012 = &stats.years[0];
    assert_eq!((y2012.year, y2012.threads, y2012.questions), (2012, 1, 2));
    assert_eq!(y2012.posts_per_thread, 9.0);
    assert_eq!(y2012.sentences_per_post, 11.0 / 9.0);
    assert_eq!(y2012.words_per_post, 40.0 / 9.0);
    assert_eq!(y2012.answered_pct, 50.0);
    let y2013 = &stats.years[1];
    assert_eq!((y2013.year, y2013.threads, y2013.questions), (2013, 1, 2));
    assert_eq!(y2013.posts_per_thread, 6.0);
    assert_eq!(y2013.sentences_per_post, 1.0);
    assert_eq!(y2013.words_per_post, 28.0 / 6.0);
    assert_eq!(y2013.answered_pct, 50.0);
    assert_eq!(stats.total_threads, 2);
    assert_eq!(stats.total_questions, 4);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stats.csv");
    write_stats_csv(&stats, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text,
        "year,threads,posts_per_thread,sentences_per_post,words_per_post,questions,answered_pct\n\
         2012,1,9.00,1.22,4.44,2,50.00\n\
         2013,1,6.00,1.00,4.67,2,50.00\n\
         all,2,7.50,1.11,4.56,4,50.00\n"
    );
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let run = || -> Vec<u8> {
        let threads = read_threads_jsonl(fixture_path()).unwrap();
        let records = extract_corpus(&threads, &fixture_options());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("questions.jsonl");
        write_questions_jsonl(&records, &path).unwrap();
        std::fs::read(&path).unwrap()
    };
    let first = run();
    let second = run();
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn written_questions_read_back_unchanged() {
    let threads = read_threads_jsonl(fixture_path()).unwrap();
    let records = extract_corpus(&threads, &fixture_options());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("questions.jsonl");
    write_questions_jsonl(&records, &path).unwrap();
    let back: Vec<QuestionRecord> = read_questions_jsonl(&path).unwrap();
    assert_eq!(records, back);
}
