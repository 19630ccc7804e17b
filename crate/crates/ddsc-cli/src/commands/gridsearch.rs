//! `ddsc gridsearch`: exhaustive search over `{n_bases, lambda, alpha}` on a
//! validation split carved out of the training houses, selecting the lowest
//! overall discriminative-mode MAE. Ties keep the lexicographically smallest
//! config, so results are deterministic.

use std::path::Path;

use anyhow::anyhow;
use ddsc_core::dataio::{read_bundle, split_houses_with_stream, SplitData};
use ddsc_core::disagg::evaluate;
use ddsc_core::pipeline::train_model;
use ddsc_core::rng::STREAM_GRID_VALIDATION;
use ddsc_core::types::ApplianceDataset;
use ddsc_core::{DisaggMode, TrainConfig};
use serde::Deserialize;

use super::{numeric, usage, CliError, ConfigOverrides};

/// Fraction of training houses kept for fitting during the search; the rest
/// validate.
const FIT_RATIO: f64 = 0.7;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    n_bases: Vec<usize>,
    lambda: Vec<f64>,
    alpha: Vec<f64>,
}

fn columns_of_houses(split: &SplitData, wanted: &[String]) -> Vec<usize> {
    split
        .house_of_column
        .iter()
        .enumerate()
        .filter(|(_, h)| wanted.contains(h))
        .map(|(i, _)| i)
        .collect()
}

struct ScoredConfig {
    config: TrainConfig,
    mae: f64,
    sae: Option<f64>,
}

fn carve_validation(
    train: &SplitData,
    seed: u64,
) -> Result<(ApplianceDataset, ApplianceDataset), CliError> {
    let (fit_ids, val_ids) =
        split_houses_with_stream(&train.house_ids, FIT_RATIO, seed, STREAM_GRID_VALIDATION)
            .map_err(usage)?;
    let fit_cols = columns_of_houses(train, &fit_ids);
    let val_cols = columns_of_houses(train, &val_ids);
    if fit_cols.is_empty() || val_cols.is_empty() {
        return Err(usage(anyhow!(
            "validation carve left an empty side: {} fit and {} validation columns",
            fit_cols.len(),
            val_cols.len()
        )));
    }
    let fit = train.dataset.select_columns(&fit_cols).map_err(usage)?;
    let val = train.dataset.select_columns(&val_cols).map_err(usage)?;
    Ok((fit, val))
}

pub fn run(
    data_dir: &Path,
    grid_path: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
    seed: u64,
) -> Result<(), CliError> {
    let grid_text = std::fs::read_to_string(grid_path).map_err(usage)?;
    let grid: GridSpec = serde_json::from_str(&grid_text).map_err(usage)?;
    if grid.n_bases.is_empty() || grid.lambda.is_empty() || grid.alpha.is_empty() {
        return Err(usage(anyhow!("grid must list at least one value per axis")));
    }
    let mut n_bases = grid.n_bases.clone();
    n_bases.sort_unstable();
    n_bases.dedup();
    let mut lambdas = grid.lambda.clone();
    lambdas.sort_by(|a, b| a.total_cmp(b));
    lambdas.dedup();
    let mut alphas = grid.alpha.clone();
    alphas.sort_by(|a, b| a.total_cmp(b));
    alphas.dedup();

    let overrides = ConfigOverrides::load(config_path)?;
    let (base_config, _) = overrides.resolve(Some(seed));
    let bundle = read_bundle(data_dir).map_err(usage)?;
    let (fit, val) = carve_validation(&bundle.train, seed)?;

    let mut scores: Vec<ScoredConfig> = Vec::new();
    let mut best: Option<usize> = None;
    for &n in &n_bases {
        for &lambda in &lambdas {
            for &alpha in &alphas {
                let config = TrainConfig {
                    n_bases: n,
                    lambda,
                    alpha,
                    ..base_config.clone()
                };
                config.validate().map_err(usage)?;
                let trained = train_model(&fit, &config, false).map_err(numeric)?;
                let report = evaluate(&val, &trained.model, DisaggMode::Ddsc).map_err(numeric)?;
                scores.push(ScoredConfig {
                    config,
                    mae: report.overall.mae,
                    sae: report.overall.sae,
                });
                let candidate = scores.len() - 1;
                if best.is_none_or(|b| scores[candidate].mae < scores[b].mae) {
                    best = Some(candidate);
                }
            }
        }
    }
    let best = best.expect("non-empty grid");

    std::fs::create_dir_all(out_dir).map_err(usage)?;
    let mut table = String::from("n_bases,lambda,alpha,mae_ddsc,sae_ddsc,best\n");
    for (i, s) in scores.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.config.n_bases,
            s.config.lambda,
            s.config.alpha,
            s.mae,
            s.sae.map_or("undefined".to_string(), |v| format!("{v}")),
            i == best
        ));
    }
    std::fs::write(out_dir.join("scores.csv"), table).map_err(usage)?;
    std::fs::write(
        out_dir.join("best_config.json"),
        serde_json::to_string_pretty(&scores[best].config).map_err(numeric)?,
    )
    .map_err(usage)?;
    println!(
        "searched {} configs; best validation MAE {} at n_bases={} lambda={} alpha={}",
        scores.len(),
        scores[best].mae,
        scores[best].config.n_bases,
        scores[best].config.lambda,
        scores[best].config.alpha
    );
    Ok(())
}
