use answerable_core::eval::{write_roc_csv, EvalReport};
use anyhow::Result;

use crate::commands::{labels, load_model, load_questions, make_splits, score_records, stage_file};
use crate::config::{RunConfig, SplitName};

/// Scores the chosen split with a saved model, prints the AUC, and writes
/// the ROC sweep.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let questions = load_questions(cfg)?;
    let splits = make_splits(cfg, &questions)?;
    let part = match cfg.eval_split {
        SplitName::Train => &splits.train,
        SplitName::Valid => &splits.valid,
        SplitName::Test => &splits.test,
    };

    let scores = score_records(cfg, &model, part)?;
    let report = EvalReport::compute(&scores, &labels(part))?;
    let roc_path = cfg.out.join("roc.csv");
    stage_file(&roc_path, |tmp| {
        write_roc_csv(&report.roc, tmp).map_err(Into::into)
    })?;
    cfg.echo()?;

    println!("{} AUC {}", cfg.eval_split.as_str(), report.auc);
    println!(
        "model {}, {} records, {} positive, {} negative",
        model.kind(),
        scores.len(),
        report.positives,
        report.negatives
    );
    println!("wrote {}", roc_path.display());
    Ok(())
}
