use answerable_core::checkpoint::{save_cnn, save_logreg};
use answerable_core::corpus::Splits;
use answerable_core::eval::{self, RunSummary};
use answerable_core::experiment::derive_seed;
use answerable_core::logreg::{BowClassifier, LogRegOptions};
use answerable_core::neural::{self, EpochRecord, Model, TrainReport};
use anyhow::{ensure, Context, Result};
use serde::Serialize;

use crate::commands::{
    cnn_config, labels, load_questions, load_table, make_splits, stage_file, train_config,
    write_file,
};
use crate::config::{RunConfig, System};

#[derive(Serialize)]
struct Summary<'a> {
    system: &'a str,
    mean: f64,
    min: f64,
    max: f64,
}

/// Trains the configured system, keeps the run with the best validation
/// AUC, and writes checkpoint, history.csv, and summary.json.
pub fn run(cfg: &RunConfig) -> Result<()> {
    ensure!(cfg.runs >= 1, "runs must be at least 1");
    let questions = load_questions(cfg)?;
    let splits = make_splits(cfg, &questions)?;
    let (aucs, history) = match cfg.system {
        System::Logreg => train_logreg(cfg, &splits)?,
        System::ContextCnn | System::BaselineCnn => train_cnn(cfg, &splits)?,
    };

    let history_path = cfg.out.join("history.csv");
    stage_file(&history_path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        w.write_record(["epoch", "mean_train_loss", "valid_auc"])?;
        for e in &history {
            w.write_record([
                e.epoch.to_string(),
                e.mean_train_loss.to_string(),
                e.valid_auc.map(|a| a.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    let summary = RunSummary::new(aucs);
    let summary_path = cfg.out.join("summary.json");
    let mut text = serde_json::to_string_pretty(&Summary {
        system: cfg.system.as_str(),
        mean: summary.mean(),
        min: summary.min(),
        max: summary.max(),
    })?;
    text.push('\n');
    write_file(&summary_path, text.as_bytes())?;
    cfg.echo()?;

    println!(
        "{}: mean AUC {} (min {}, max {})",
        cfg.system.as_str(),
        summary.mean(),
        summary.min(),
        summary.max()
    );
    println!("wrote {}", cfg.out.join("checkpoint").display());
    println!("wrote {}", history_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn train_cnn(cfg: &RunConfig, splits: &Splits) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    let table = load_table(cfg)?;
    let template = cnn_config(cfg, table.dim())?;
    let base = train_config(cfg);
    let train_set = neural::prepare_samples(&splits.train, &table, template.seq_len);
    let valid_set = neural::prepare_samples(&splits.valid, &table, template.seq_len);

    let mut aucs = Vec::with_capacity(cfg.runs);
    let mut best: Option<(f64, Model, TrainReport)> = None;
    for run in 0..cfg.runs as u64 {
        let mut config = template.clone();
        config.init_seed = derive_seed(cfg.seed, 0, 2 * run);
        let mut train_cfg = base.clone();
        train_cfg.shuffle_seed = derive_seed(cfg.seed, 0, 2 * run + 1);
        let mut model = Model::init(config, Some(&table))?;
        let report = neural::train(&mut model, &table, &train_set, &valid_set, &train_cfg)?;
        let auc = report
            .best_valid_auc
            .context("validation split lacks both classes, no AUC to select on")?;
        println!(
            "run {}: valid AUC {auc} (best epoch {})",
            run + 1,
            report.best_epoch
        );
        aucs.push(auc);
        if best.as_ref().is_none_or(|(b, _, _)| auc > *b) {
            best = Some((auc, model, report));
        }
    }
    let (_, model, report) = best.expect("at least one run");
    stage_file(&cfg.out.join("checkpoint"), |tmp| {
        save_cnn(&model, tmp).map_err(Into::into)
    })?;
    Ok((aucs, report.epochs))
}

fn train_logreg(cfg: &RunConfig, splits: &Splits) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    let opts = LogRegOptions {
        lambda: cfg.lambda,
        binary: cfg.binary_features,
        min_df: cfg.min_df,
        ..LogRegOptions::default()
    };
    let clf = BowClassifier::fit(&splits.train, &opts)?;
    let valid_scores = clf.score_records(&splits.valid);
    let auc = eval::auc(&valid_scores, &labels(&splits.valid))
        .context("validation split lacks both classes, no AUC to report")?;
    let train_scores = clf.score_records(&splits.train);
    let loss = mean_log_loss(&train_scores, &labels(&splits.train));
    println!("run 1: valid AUC {auc}");
    stage_file(&cfg.out.join("checkpoint"), |tmp| {
        save_logreg(&clf, tmp).map_err(Into::into)
    })?;
    let history = vec![EpochRecord {
        epoch: 1,
        mean_train_loss: loss,
        valid_auc: Some(auc),
    }];
    Ok((vec![auc], history))
}

fn mean_log_loss(scores: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / scores.len().max(1) as f64
}
