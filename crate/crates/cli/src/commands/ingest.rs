use answerable_core::corpus::{
    self, corpus_stats, extract_corpus, filter_verdict, FilterVerdict, PipelineOptions,
};
use anyhow::{Context, Result};

use crate::commands::stage_file;
use crate::config::RunConfig;

/// Reads a thread dump and writes the labeled question corpus with its
/// per-year statistics table.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let path = cfg
        .threads_file
        .as_ref()
        .context("ingest needs a thread dump (--threads-file)")?;
    let threads = corpus::read_threads_jsonl(path)
        .with_context(|| format!("reading thread dump {}", path.display()))?;

    let opts = PipelineOptions {
        min_first_tier: cfg.min_first_tier,
        reply_scope: cfg.reply_scope,
    };
    let mut kept = 0usize;
    let mut too_small = 0usize;
    let mut requests = 0usize;
    for thread in &threads {
        match filter_verdict(thread, opts.min_first_tier) {
            FilterVerdict::Kept => kept += 1,
            FilterVerdict::TooFewFirstTier => too_small += 1,
            FilterVerdict::AmaRequest => requests += 1,
        }
    }

    let questions = extract_corpus(&threads, &opts);
    let stats = corpus_stats(&threads, &opts);
    let answered = questions.iter().filter(|q| q.label == 1).count();
    let pct = if questions.is_empty() {
        0.0
    } else {
        100.0 * answered as f64 / questions.len() as f64
    };

    let questions_path = cfg.out.join("questions.jsonl");
    stage_file(&questions_path, |tmp| {
        corpus::write_questions_jsonl(&questions, tmp).map_err(Into::into)
    })?;
    let stats_path = cfg.out.join("stats.csv");
    stage_file(&stats_path, |tmp| {
        corpus::write_stats_csv(&stats, tmp).map_err(Into::into)
    })?;
    cfg.echo()?;

    println!("threads read: {}", threads.len());
    println!("threads kept: {kept}");
    println!(
        "dropped, fewer than {} first-tier posts: {too_small}",
        cfg.min_first_tier
    );
    println!("dropped, ama request: {requests}");
    println!("questions: {}", questions.len());
    println!("answered: {answered} ({pct:.2}%)");
    println!("wrote {}", questions_path.display());
    println!("wrote {}", stats_path.display());
    Ok(())
}
