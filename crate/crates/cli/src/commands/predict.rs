use anyhow::Result;

use crate::commands::{load_model, load_questions, score_records, stage_file};
use crate::config::RunConfig;

/// Scores every question in the input file, preserving input order.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let questions = load_questions(cfg)?;
    let scores = score_records(cfg, &model, &questions)?;

    let path = cfg.out.join("predictions.csv");
    stage_file(&path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        w.write_record(["thread_id", "post_id", "score"])?;
        for (q, s) in questions.iter().zip(&scores) {
            w.write_record([q.thread_id.as_str(), q.post_id.as_str(), &s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    cfg.echo()?;

    println!(
        "scored {} questions with {} model",
        questions.len(),
        model.kind()
    );
    println!("wrote {}", path.display());
    Ok(())
}
