use answerable_core::experiment::{run_grid, write_grid_csv, ExperimentOptions};
use answerable_core::neural::ModelConfig;
use anyhow::Result;

use crate::commands::{
    cnn_config, load_questions, load_table, make_splits, stage_file, train_config,
};
use crate::config::{RunConfig, System};

/// Trains one single-window model per (window, filter count) cell and
/// tabulates the mean validation AUC of each cell.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let questions = load_questions(cfg)?;
    let splits = make_splits(cfg, &questions)?;
    let table = load_table(cfg)?;
    let template: ModelConfig = {
        let mut base = cfg.clone();
        base.system = System::BaselineCnn;
        cnn_config(&base, table.dim())?
    };
    let opts = ExperimentOptions {
        runs: cfg.runs,
        base_seed: cfg.seed,
        train: train_config(cfg),
        granularity: cfg.granularity,
    };

    let cells = run_grid(
        &table,
        &splits.train,
        &splits.valid,
        &template,
        &cfg.windows,
        &cfg.filter_grid,
        &opts,
    )?;

    let path = cfg.out.join("grid.csv");
    stage_file(&path, |tmp| write_grid_csv(&cells, tmp).map_err(Into::into))?;
    cfg.echo()?;

    for cell in &cells {
        match (cell.mean_auc(), &cell.error) {
            (Some(mean), None) => {
                println!(
                    "window {} filters {}: mean AUC {mean}",
                    cell.window, cell.filters
                )
            }
            (_, Some(e)) => {
                println!(
                    "window {} filters {}: failed ({e})",
                    cell.window, cell.filters
                )
            }
            (None, None) => {
                println!("window {} filters {}: no runs", cell.window, cell.filters)
            }
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}
