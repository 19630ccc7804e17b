//! `ddsc disaggregate`: split an aggregate matrix into per-appliance
//! prediction CSVs.

use std::path::Path;

use ddsc_core::dataio::{read_matrix_csv, write_matrix_csv};
use ddsc_core::disagg::predict;
use ddsc_core::{DisaggMode, DisaggModel, UsageMatrix};

use super::{numeric, usage, CliError};

pub fn run(
    model_path: &Path,
    input: &Path,
    mode: DisaggMode,
    out_dir: &Path,
) -> Result<(), CliError> {
    let model = DisaggModel::load(model_path).map_err(usage)?;
    let values = read_matrix_csv(input).map_err(usage)?;
    let aggregate = UsageMatrix::new(values, 3600, None).map_err(usage)?;
    let predictions = predict(&aggregate, &model, mode).map_err(numeric)?;

    std::fs::create_dir_all(out_dir).map_err(usage)?;
    for (label, prediction) in model.labels().iter().zip(&predictions) {
        write_matrix_csv(&out_dir.join(format!("{label}.csv")), prediction.values())
            .map_err(numeric)?;
    }
    println!(
        "wrote {} prediction matrices ({} columns, mode {}) to {}",
        predictions.len(),
        aggregate.num_columns(),
        mode.as_str(),
        out_dir.display()
    );
    Ok(())
}
