//! `ddsc report`: plot-ready long-format CSVs from prediction matrices.
//!
//! Writes `weekly_profiles.csv` (one row per label, column and hour) and
//! `shares.csv` (each label's percentage of the predicted total per column).

use std::path::Path;

use anyhow::anyhow;
use ddsc_core::dataio::read_matrix_csv;
use ndarray::Array2;

use super::{numeric, usage, CliError};

fn read_labeled_matrices(dir: &Path) -> Result<Vec<(String, Array2<f64>)>, CliError> {
    let mut labels = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(usage)? {
        let entry = entry.map_err(usage)?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(label) = name.strip_suffix(".csv") {
            labels.push(label.to_string());
        }
    }
    labels.sort();
    let mut out = Vec::with_capacity(labels.len());
    for label in labels {
        let values = read_matrix_csv(&dir.join(format!("{label}.csv"))).map_err(usage)?;
        out.push((label, values));
    }
    Ok(out)
}

pub fn run(predictions_dir: &Path, truth_dir: Option<&Path>, out_dir: &Path) -> Result<(), CliError> {
    let predictions = read_labeled_matrices(predictions_dir)?;
    if predictions.is_empty() {
        return Err(usage(anyhow!(
            "no prediction CSVs under {}",
            predictions_dir.display()
        )));
    }
    let dim = predictions[0].1.dim();
    for (label, values) in &predictions {
        if values.dim() != dim {
            return Err(usage(anyhow!(
                "prediction {label} has shape {:?}, expected {:?}",
                values.dim(),
                dim
            )));
        }
    }

    let truth = match truth_dir {
        None => None,
        Some(dir) => {
            let matrices = read_labeled_matrices(dir)?;
            for (label, values) in &predictions {
                let matching = matrices.iter().find(|(l, _)| l == label);
                match matching {
                    Some((_, t)) if t.dim() == values.dim() => {}
                    Some(_) => {
                        return Err(usage(anyhow!("truth for {label} has a different shape")))
                    }
                    None => return Err(usage(anyhow!("no truth matrix for {label}"))),
                }
            }
            Some(matrices)
        }
    };

    std::fs::create_dir_all(out_dir).map_err(usage)?;
    let (window_len, columns) = dim;

    let mut profiles = String::from(if truth.is_some() {
        "label,column,hour,predicted_kwh,truth_kwh,abs_error_kwh\n"
    } else {
        "label,column,hour,predicted_kwh\n"
    });
    for (label, values) in &predictions {
        let truth_values = truth
            .as_ref()
            .map(|m| &m.iter().find(|(l, _)| l == label).expect("checked above").1);
        for col in 0..columns {
            for hour in 0..window_len {
                let pred = values[[hour, col]];
                match truth_values {
                    Some(t) => {
                        let tv = t[[hour, col]];
                        profiles.push_str(&format!(
                            "{label},{col},{hour},{pred},{tv},{}\n",
                            (pred - tv).abs()
                        ));
                    }
                    None => profiles.push_str(&format!("{label},{col},{hour},{pred}\n")),
                }
            }
        }
    }
    std::fs::write(out_dir.join("weekly_profiles.csv"), profiles).map_err(usage)?;

    let mut shares = String::from("label,column,share_pct\n");
    for col in 0..columns {
        let total: f64 = predictions
            .iter()
            .map(|(_, values)| values.column(col).sum())
            .sum();
        if total <= 0.0 {
            return Err(numeric(anyhow!(
                "column {col} has zero predicted total; shares are undefined"
            )));
        }
        for (label, values) in &predictions {
            let share = 100.0 * values.column(col).sum() / total;
            shares.push_str(&format!("{label},{col},{share}\n"));
        }
    }
    std::fs::write(out_dir.join("shares.csv"), shares).map_err(usage)?;
    println!(
        "reported {} labels over {columns} columns to {}",
        predictions.len(),
        out_dir.display()
    );
    Ok(())
}
