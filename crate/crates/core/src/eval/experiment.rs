//! Repeated train/evaluate runs and the latent-dimension sweep.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use super::split::{DatasetSplit, DEFAULT_TEST_FRACTION};
use super::{evaluate, SplitKind};
use crate::baselines::{train_lsi_lr, train_lsi_up, LsiConfig, DEFAULT_L2};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, ModelKind};
use crate::interactions::InteractionSet;
use crate::model::ModelState;
use crate::trainer::{fit, fit_with, log_likelihood_from, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub train: TrainConfig,
    /// Share of pairs (warm) or items (cold) held out for testing.
    pub test_fraction: f64,
    /// L2 penalty of the per-user regressions in LSI-LR.
    pub lsi_l2: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 64,
            train: TrainConfig::default(),
            test_fraction: DEFAULT_TEST_FRACTION,
            lsi_l2: DEFAULT_L2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub model: ModelKind,
    pub dataset: String,
    pub split: SplitKind,
    pub dim: usize,
    /// Test AUC of each repetition, in seed order.
    pub aucs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single repetition.
    pub std: f64,
}

impl ExperimentReport {
    fn new(model: ModelKind, dataset: &str, split: SplitKind, dim: usize, aucs: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&aucs);
        ExperimentReport {
            model,
            dataset: dataset.to_owned(),
            split,
            dim,
            aucs,
            mean,
            std,
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_compatible(model: ModelKind, dataset: &Dataset) -> Result<()> {
    if model
        .feature_variant()
        .is_some_and(|v| v.needs_user_metadata())
        && !dataset.has_user_metadata()
    {
        return Err(Error::validation(format!(
            "model {model} needs user metadata, which this dataset does not have"
        )));
    }
    let needs_tags = !matches!(model, ModelKind::Mf);
    if needs_tags && dataset.item_tags.iter().all(Vec::is_empty) {
        return Err(Error::validation(format!("model {model} needs item tags")));
    }
    Ok(())
}

fn has_qualifying_user(data: &InteractionSet) -> bool {
    let mut seen: HashMap<u32, (bool, bool)> = HashMap::new();
    data.iter().any(|x| {
        let e = seen.entry(x.user).or_default();
        if x.label.is_positive() {
            e.0 = true;
        } else {
            e.1 = true;
        }
        e.0 && e.1
    })
}

/// Trains `model` on one split and returns its test AUC.
pub fn run_split(model: ModelKind, dataset: &Dataset, split: &DatasetSplit, config: &ExperimentConfig) -> Result<f64> {
    let seed = split.seed;
    match model.feature_variant() {
        Some(variant) => {
            let mapping = dataset.feature_mapping(variant)?;
            let mut state = ModelState::for_mapping(config.dim, &mapping, seed)?;
            let train_config = TrainConfig {
                seed,
                ..config.train.clone()
            };
            if has_qualifying_user(&split.validation) {
                fit(&mut state, &mapping, &split.train, &split.validation, &train_config)?;
            } else {
                // too little validation data for AUC; stop on training likelihood instead
                log::warn!("validation set has no user with both labels; early stopping on training log-likelihood");
                let train = &split.train;
                fit_with(&mut state, &mapping, train, &train_config, |reps| log_likelihood_from(reps, train))?;
            }
            evaluate(&state.representations(&mapping)?, &split.test)
        }
        None => {
            let items = dataset.item_feature_matrix()?;
            let train = split.train_and_validation()?;
            let lsi = LsiConfig {
                l2: config.lsi_l2,
                ..LsiConfig::new(config.dim, seed)
            };
            match model {
                ModelKind::LsiLr => evaluate(&train_lsi_lr(&items, &train, &lsi)?, &split.test),
                ModelKind::LsiUp => evaluate(&train_lsi_up(&items, &train, config.dim, seed)?, &split.test),
                _ => unreachable!("factorisation models have a feature variant"),
            }
        }
    }
}

/// One split, training run and test evaluation per seed; repetitions run
/// in parallel.
pub fn run_experiment(
    model: ModelKind,
    dataset: &Dataset,
    dataset_name: &str,
    split: SplitKind,
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::validation("at least one repetition is required"));
    }
    check_compatible(model, dataset)?;
    let aucs = seeds
        .par_iter()
        .map(|&seed| {
            let s = DatasetSplit::new(split, &dataset.interactions, config.test_fraction, seed)?;
            let auc = run_split(model, dataset, &s, config)?;
            log::info!("{model} {dataset_name} {split} seed {seed}: auc {auc:.4}");
            Ok(auc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExperimentReport::new(model, dataset_name, split, config.dim, aucs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub model: ModelKind,
    pub dim: usize,
    pub mean: f64,
    pub std: f64,
}

/// Runs every model at every dimension in `dims` (positive, ascending).
pub fn dimension_sweep(
    models: &[ModelKind],
    dataset: &Dataset,
    dataset_name: &str,
    split: SplitKind,
    config: &ExperimentConfig,
    dims: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if dims.is_empty() || dims[0] == 0 || dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("dimensions must be positive and strictly ascending"));
    }
    let mut rows = Vec::with_capacity(models.len() * dims.len());
    for &model in models {
        for &dim in dims {
            let config = ExperimentConfig {
                dim,
                ..config.clone()
            };
            let report = run_experiment(model, dataset, dataset_name, split, &config, seeds)?;
            rows.push(SweepRow {
                model,
                dim,
                mean: report.mean,
                std: report.std,
            });
        }
    }
    Ok(rows)
}

/// Tab-delimited table with one row per model and a mean and a standard
/// deviation column per dataset and split. Missing cells are `-`.
pub fn write_results_table<W: Write>(reports: &[ExperimentReport], mut out: W) -> Result<()> {
    let mut models: Vec<ModelKind> = Vec::new();
    let mut columns: Vec<(String, SplitKind)> = Vec::new();
    for r in reports {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
        let col = (r.dataset.clone(), r.split);
        if !columns.contains(&col) {
            columns.push(col);
        }
    }
    write!(out, "model")?;
    for (dataset, split) in &columns {
        write!(out, "\t{dataset}_{split}_auc\t{dataset}_{split}_std")?;
    }
    writeln!(out)?;
    for model in models {
        write!(out, "{model}")?;
        for (dataset, split) in &columns {
            match reports
                .iter()
                .find(|r| r.model == model && &r.dataset == dataset && r.split == *split)
            {
                Some(r) => write!(out, "\t{:.4}\t{:.4}", r.mean, r.std)?,
                None => write!(out, "\t-\t-")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_sweep_table<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "model\td\tauc\tstd")?;
    for r in rows {
        writeln!(out, "{}\t{}\t{:.4}\t{:.4}", r.model, r.dim, r.mean, r.std)?;
    }
    Ok(())
}
