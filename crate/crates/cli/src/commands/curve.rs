use answerable_core::experiment::{learning_curve, write_curve_csv, ExperimentOptions};
use anyhow::{bail, Result};

use crate::commands::{
    cnn_config, load_questions, load_table, make_splits, stage_file, train_config,
};
use crate::config::{RunConfig, System};

/// Trains the configured CNN on growing temporally uniform subsamples of
/// the training split and tabulates AUC against training set size.
pub fn run(cfg: &RunConfig) -> Result<()> {
    if cfg.sizes.is_empty() {
        bail!("curve needs at least one training set size (--sizes)");
    }
    if cfg.system == System::Logreg {
        bail!("curve supports the CNN systems only");
    }
    let questions = load_questions(cfg)?;
    let splits = make_splits(cfg, &questions)?;
    let table = load_table(cfg)?;
    let template = cnn_config(cfg, table.dim())?;
    let opts = ExperimentOptions {
        runs: cfg.runs,
        base_seed: cfg.seed,
        train: train_config(cfg),
        granularity: cfg.granularity,
    };

    let points = learning_curve(
        &table,
        &splits.train,
        &splits.valid,
        &template,
        &cfg.sizes,
        &opts,
    )?;

    let path = cfg.out.join("curve.csv");
    stage_file(&path, |tmp| {
        write_curve_csv(&points, tmp).map_err(Into::into)
    })?;
    cfg.echo()?;

    for p in &points {
        println!(
            "size {}: mean AUC {} (min {}, max {})",
            p.size,
            p.summary.mean(),
            p.summary.min(),
            p.summary.max()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
