//! Grid and learning-curve runners over one preprocessed dataset snapshot.
//!
//! Every run's seed derives from the base seed plus the cell's content (its
//! window and filter count, or its subsample size) and the run index, so
//! neither execution order nor parallelism can change any result. The
//! subsample seed is the base seed itself, which makes smaller learning
//! curve subsamples prefixes of larger ones.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Granularity, QuestionRecord, SplitError};
use crate::eval::RunSummary;
use crate::neural::{self, Model, ModelConfig, NeuralError, TrainConfig};
use crate::text::EmbeddingTable;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("validation set never produced an AUC (needs both classes)")]
    NoValidAuc,
    #[error("no sizes requested")]
    NoSizes,
    #[error("runs must be at least 1")]
    NoRuns,
}

/// splitmix64 finalizer; decorrelates structured inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-run seed from (base, cell identity, run index).
pub fn derive_seed(base: u64, cell: u64, run: u64) -> u64 {
    mix(mix(mix(base) ^ cell) ^ run)
}

/// Settings shared by every run of a grid or curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub runs: usize,
    pub base_seed: u64,
    pub train: TrainConfig,
    pub granularity: Granularity,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            runs: 5,
            base_seed: 0,
            train: TrainConfig::default(),
            granularity: Granularity::Month,
        }
    }
}

/// Outcome of one (window, filter count) grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub window: usize,
    pub filters: usize,
    pub aucs: Vec<f64>,
    pub error: Option<String>,
}

impl GridCell {
    pub fn mean_auc(&self) -> Option<f64> {
        if self.aucs.is_empty() {
            None
        } else {
            Some(self.aucs.iter().sum::<f64>() / self.aucs.len() as f64)
        }
    }
}

/// One learning-curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub summary: RunSummary,
}

fn run_once(
    table: &EmbeddingTable,
    train_records: &[QuestionRecord],
    valid_records: &[QuestionRecord],
    config: ModelConfig,
    mut train_cfg: TrainConfig,
    init_seed: u64,
    shuffle_seed: u64,
) -> Result<f64, ExperimentError> {
    let mut config = config;
    config.init_seed = init_seed;
    train_cfg.shuffle_seed = shuffle_seed;
    let seq_len = config.seq_len;
    let train_set = neural::prepare_samples(train_records, table, seq_len);
    let valid_set = neural::prepare_samples(valid_records, table, seq_len);
    let mut model = Model::init(config, Some(table))?;
    let report = neural::train(&mut model, table, &train_set, &valid_set, &train_cfg)?;
    report.best_valid_auc.ok_or(ExperimentError::NoValidAuc)
}

fn cell_key(window: usize, filters: usize) -> u64 {
    ((window as u64) << 32) | filters as u64
}

/// Trains a single-window model per (window, filter count) combination,
/// `opts.runs` times each. Training failures are captured in the cell
/// rather than aborting the rest of the grid.
pub fn run_grid(
    table: &EmbeddingTable,
    train_records: &[QuestionRecord],
    valid_records: &[QuestionRecord],
    template: &ModelConfig,
    windows: &[usize],
    filter_counts: &[usize],
    opts: &ExperimentOptions,
) -> Result<Vec<GridCell>, ExperimentError> {
    if opts.runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    let mut cells = Vec::with_capacity(windows.len() * filter_counts.len());
    for &window in windows {
        for &filters in filter_counts {
            let key = cell_key(window, filters);
            let config = ModelConfig {
                window_sizes: vec![window],
                filter_counts: vec![filters],
                ..template.clone()
            };
            let mut aucs = Vec::with_capacity(opts.runs);
            let mut error = None;
            for run in 0..opts.runs as u64 {
                let result = run_once(
                    table,
                    train_records,
                    valid_records,
                    config.clone(),
                    opts.train.clone(),
                    derive_seed(opts.base_seed, key, 2 * run),
                    derive_seed(opts.base_seed, key, 2 * run + 1),
                );
                match result {
                    Ok(auc) => aucs.push(auc),
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
            cells.push(GridCell {
                window,
                filters,
                aucs,
                error,
            });
        }
    }
    Ok(cells)
}

/// Trains the template model on temporally uniform subsamples of the
/// training records, one point per requested size.
pub fn learning_curve(
    table: &EmbeddingTable,
    train_records: &[QuestionRecord],
    valid_records: &[QuestionRecord],
    template: &ModelConfig,
    sizes: &[usize],
    opts: &ExperimentOptions,
) -> Result<Vec<CurvePoint>, ExperimentError> {
    if sizes.is_empty() {
        return Err(ExperimentError::NoSizes);
    }
    if opts.runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let subsample =
            corpus::uniform_subsample(train_records, size, opts.granularity, opts.base_seed)?;
        let mut aucs = Vec::with_capacity(opts.runs);
        for run in 0..opts.runs as u64 {
            let auc = run_once(
                table,
                &subsample,
                valid_records,
                template.clone(),
                opts.train.clone(),
                derive_seed(opts.base_seed, size as u64, 2 * run),
                derive_seed(opts.base_seed, size as u64, 2 * run + 1),
            )?;
            aucs.push(auc);
        }
        points.push(CurvePoint {
            size,
            summary: RunSummary::new(aucs),
        });
    }
    Ok(points)
}

/// Writes one row per cell: window, filters, runs, mean/min/max AUC, error.
pub fn write_grid_csv(cells: &[GridCell], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "window", "filters", "runs", "mean_auc", "min_auc", "max_auc", "error",
    ])?;
    for cell in cells {
        let (mean, min, max) = match cell.mean_auc() {
            Some(mean) => {
                let s = RunSummary::new(cell.aucs.clone());
                (mean.to_string(), s.min().to_string(), s.max().to_string())
            }
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            cell.window.to_string(),
            cell.filters.to_string(),
            cell.aucs.len().to_string(),
            mean,
            min,
            max,
            cell.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per size: size, runs, mean/min/max AUC.
pub fn write_curve_csv(points: &[CurvePoint], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["size", "runs", "mean_auc", "min_auc", "max_auc"])?;
    for p in points {
        w.write_record([
            p.size.to_string(),
            p.summary.aucs.len().to_string(),
            p.summary.mean().to_string(),
            p.summary.min().to_string(),
            p.summary.max().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;
    use crate::synth::{separable_dataset, SynthOptions};

    fn tiny_data(train: usize, valid: usize, seed: u64) -> crate::synth::SynthDataset {
        separable_dataset(&SynthOptions {
            train_size: train,
            valid_size: valid,
            embed_dim: 4,
            vocab_per_class: 10,
            seed,
            ..SynthOptions::default()
        })
    }

    fn tiny_template() -> ModelConfig {
        ModelConfig {
            window_sizes: vec![1],
            filter_counts: vec![4],
            embed_dim: 4,
            seq_len: 10,
            activation: Activation::Tanh,
            dropout_rate: 0.0,
            class_weights: Default::default(),
            train_embeddings: false,
            init_seed: 0,
        }
    }

    fn quick_opts(runs: usize) -> ExperimentOptions {
        ExperimentOptions {
            runs,
            base_seed: 7,
            train: TrainConfig {
                learning_rate: 0.05,
                batch_size: 25,
                max_epochs: 4,
                patience: 4,
                ..TrainConfig::default()
            },
            granularity: Granularity::Month,
        }
    }

    #[test]
    fn derive_seed_is_stable_and_spread_out() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        let mut seen = std::collections::HashSet::new();
        for base in 0..4u64 {
            for cell in 0..4u64 {
                for run in 0..4u64 {
                    assert!(seen.insert(derive_seed(base, cell, run)));
                }
            }
        }
    }

    #[test]
    fn single_cell_grid_equals_direct_training() {
        let data = tiny_data(60, 30, 0);
        let opts = quick_opts(2);
        let cells = run_grid(
            &data.table,
            &data.train,
            &data.valid,
            &tiny_template(),
            &[1],
            &[4],
            &opts,
        )
        .unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].aucs.len(), 2);

        let key = cell_key(1, 4);
        for run in 0..2u64 {
            let direct = run_once(
                &data.table,
                &data.train,
                &data.valid,
                tiny_template(),
                opts.train.clone(),
                derive_seed(opts.base_seed, key, 2 * run),
                derive_seed(opts.base_seed, key, 2 * run + 1),
            )
            .unwrap();
            assert_eq!(direct, cells[0].aucs[run as usize]);
        }
    }

    #[test]
    fn grid_cells_are_independent_of_execution_order() {
        let data = tiny_data(40, 20, 1);
        let opts = quick_opts(1);
        let forward = run_grid(
            &data.table,
            &data.train,
            &data.valid,
            &tiny_template(),
            &[1, 2],
            &[2, 4],
            &opts,
        )
        .unwrap();
        let permuted = run_grid(
            &data.table,
            &data.train,
            &data.valid,
            &tiny_template(),
            &[2, 1],
            &[4, 2],
            &opts,
        )
        .unwrap();
        let sort = |mut cells: Vec<GridCell>| {
            cells.sort_by_key(|c| (c.window, c.filters));
            cells
        };
        assert_eq!(sort(forward), sort(permuted));
    }

    #[test]
    fn failing_cells_do_not_poison_the_grid() {
        let data = tiny_data(30, 15, 2);
        let opts = quick_opts(1);
        // window 50 exceeds seq_len 10 and must fail in isolation
        let cells = run_grid(
            &data.table,
            &data.train,
            &data.valid,
            &tiny_template(),
            &[1, 50],
            &[2],
            &opts,
        )
        .unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].error.is_none() && cells[0].mean_auc().is_some());
        assert!(cells[1].error.is_some() && cells[1].mean_auc().is_none());
        assert!(cells[1]
            .error
            .as_ref()
            .unwrap()
            .contains("exceeds sequence length"));
    }

    #[test]
    fn full_size_curve_point_equals_plain_training() {
        let data = tiny_data(50, 25, 3);
        let opts = quick_opts(1);
        let points = learning_curve(
            &data.table,
            &data.train,
            &data.valid,
            &tiny_template(),
            &[50],
            &opts,
        )
        .unwrap();
        // the full-size subsample is a permutation of the training set;
        // training consumes it in shuffled order, so compare against a
        // direct run on the same permutation
        let subsample =
            corpus::uniform_subsample(&data.train, 50, Granularity::Month, opts.base_seed).unwrap();
        let direct = run_once(
            &data.table,
            &subsample,
            &data.valid,
            tiny_template(),
            opts.train.clone(),
            derive_seed(opts.base_seed, 50, 0),
            derive_seed(opts.base_seed, 50, 1),
        )
        .unwrap();
        assert_eq!(points[0].summary.aucs, vec![direct]);
    }

    #[test]
    fn curve_errors_on_oversized_request() {
        let data = tiny_data(30, 15, 4);
        let err = learning_curve(
            &data.table,
            &data.train,
            &data.valid,
            &tiny_template(),
            &[31],
            &quick_opts(1),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ExperimentError::Split(SplitError::Shortfall { .. })
        ));
    }

    #[test]
    fn curve_trend_is_monotone_over_averaged_seeds() {
        let sizes = [30, 120, 480];
        let mut means = vec![0.0; sizes.len()];
        for seed in 0..3u64 {
            let data = tiny_data(480, 150, 40 + seed);
            let opts = ExperimentOptions {
                base_seed: seed,
                ..quick_opts(1)
            };
            let points = learning_curve(
                &data.table,
                &data.train,
                &data.valid,
                &tiny_template(),
                &sizes,
                &opts,
            )
            .unwrap();
            for (m, p) in means.iter_mut().zip(&points) {
                *m += p.summary.mean() / 3.0;
            }
        }
        assert!(means[2] > means[0], "means {means:?}");
        for w in means.windows(2) {
            assert!(w[1] >= w[0] - 0.03, "means {means:?}");
        }
    }

    #[test]
    fn csv_writers_produce_stable_layouts() {
        let cells = vec![
            GridCell {
                window: 1,
                filters: 2,
                aucs: vec![0.5, 0.75],
                error: None,
            },
            GridCell {
                window: 9,
                filters: 2,
                aucs: vec![],
                error: Some("boom".into()),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let grid_path = dir.path().join("grid.csv");
        write_grid_csv(&cells, &grid_path).unwrap();
        let text = std::fs::read_to_string(&grid_path).unwrap();
        assert_eq!(
            text,
            "window,filters,runs,mean_auc,min_auc,max_auc,error\n\
             1,2,2,0.625,0.5,0.75,\n\
             9,2,0,,,,boom\n"
        );

        let points = vec![CurvePoint {
            size: 10,
            summary: RunSummary::new(vec![0.5, 1.0]),
        }];
        let curve_path = dir.path().join("curve.csv");
        write_curve_csv(&points, &curve_path).unwrap();
        let text = std::fs::read_to_string(&curve_path).unwrap();
        assert_eq!(
            text,
            "size,runs,mean_auc,min_auc,max_auc\n10,2,0.75,0.5,1\n"
        );
    }
}
