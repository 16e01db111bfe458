use answerable_core::ngram::{derive_allocation, growth_profile, AllocationMode, MAX_ORDER};
use anyhow::Result;

use crate::commands::{load_questions, stage_file};
use crate::config::RunConfig;

/// Profiles unique n-gram growth over the question corpus and prints the
/// filter allocations the profile implies.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let questions = load_questions(cfg)?;
    let corpus: Vec<&[String]> = questions.iter().map(|q| q.tokens.tokens()).collect();
    let profile = growth_profile(corpus, cfg.min_count);

    let csv_path = cfg.out.join("ngrams.csv");
    stage_file(&csv_path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        w.write_record(["n", "min_count", "unique"])?;
        for n in 1..=MAX_ORDER {
            w.write_record([
                n.to_string(),
                profile.min_counts[n - 1].to_string(),
                profile.counts[n - 1].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    cfg.echo()?;

    for n in 1..=MAX_ORDER {
        println!(
            "unique {n}-grams (min count {}): {}",
            cfg.min_count,
            profile.counts[n - 1]
        );
    }
    match profile.ratio_unigram_bigram {
        Some(r) => println!("bigram/unigram growth: {r:.2}"),
        None => println!("bigram/unigram growth: undefined"),
    }
    for (i, ratio) in profile.ratio_bigram_higher.iter().enumerate() {
        match ratio {
            Some(r) => println!("{}-gram/bigram growth: {r:.2}", i + 3),
            None => println!("{}-gram/bigram growth: undefined", i + 3),
        }
    }

    let preset = derive_allocation(
        std::slice::from_ref(&profile),
        cfg.filter_x,
        AllocationMode::Preset,
    )?;
    println!(
        "default allocation (x={}): {:?}",
        cfg.filter_x, preset.counts
    );
    match derive_allocation(&[profile], cfg.filter_x, AllocationMode::Computed) {
        Ok(computed) => {
            println!(
                "computed allocation (x={}): {:?}",
                cfg.filter_x, computed.counts
            )
        }
        Err(e) => println!("computed allocation unavailable: {e}"),
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}
