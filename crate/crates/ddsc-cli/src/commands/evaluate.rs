//! `ddsc evaluate`: score a model on a bundle split in both modes and write
//! the comparison reports.

use std::path::Path;

use anyhow::anyhow;
use ddsc_core::dataio::read_bundle;
use ddsc_core::disagg::{evaluate, metrics_table_csv, MetricsReport};
use ddsc_core::{DisaggMode, DisaggModel};
use serde::Serialize;

use super::{numeric, usage, CliError};

#[derive(Serialize)]
struct EvaluationFile {
    split: String,
    nnsc: MetricsReport,
    ddsc: MetricsReport,
}

pub fn run(model_path: &Path, data_dir: &Path, out_dir: &Path, split: &str) -> Result<(), CliError> {
    let model = DisaggModel::load(model_path).map_err(usage)?;
    let bundle = read_bundle(data_dir).map_err(usage)?;
    let dataset = match split {
        "test" => &bundle.test.dataset,
        "train" => &bundle.train.dataset,
        other => return Err(usage(anyhow!("unknown split {other:?}, expected test or train"))),
    };

    let nnsc = evaluate(dataset, &model, DisaggMode::Nnsc).map_err(numeric)?;
    let ddsc = evaluate(dataset, &model, DisaggMode::Ddsc).map_err(numeric)?;
    let table = metrics_table_csv(&nnsc, &ddsc).map_err(numeric)?;

    std::fs::create_dir_all(out_dir).map_err(usage)?;
    let file = EvaluationFile {
        split: split.to_string(),
        nnsc,
        ddsc,
    };
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&file).map_err(numeric)?,
    )
    .map_err(usage)?;
    std::fs::write(out_dir.join("report.csv"), table).map_err(usage)?;
    println!(
        "evaluated {} columns of the {split} split: overall MAE {} (nnsc) vs {} (ddsc)",
        file.nnsc.columns, file.nnsc.overall.mae, file.ddsc.overall.mae
    );
    Ok(())
}
