//! Test-time prediction and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::ddsc::disaggregation_solve;
use crate::error::{DdscError, Result};
use crate::model::DisaggModel;
use crate::types::{ApplianceDataset, UsageMatrix};

/// Which basis set drives prediction: the plain pre-trained bases or the
/// discriminatively refined ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisaggMode {
    Nnsc,
    Ddsc,
}

impl DisaggMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DisaggMode::Nnsc => "nnsc",
            DisaggMode::Ddsc => "ddsc",
        }
    }
}

/// Splits an aggregate signal into per-appliance estimates.
///
/// Activations are inferred from the aggregate against the mode's bases and
/// each appliance is reconstructed with that same basis block.
pub fn predict(
    aggregate: &UsageMatrix,
    model: &DisaggModel,
    mode: DisaggMode,
) -> Result<Vec<UsageMatrix>> {
    if aggregate.window_len() != model.window_len() {
        return Err(DdscError::WindowLengthMismatch {
            expected: model.window_len(),
            actual: aggregate.window_len(),
        });
    }
    let bases = match mode {
        DisaggMode::Nnsc => model.recon_bases(),
        DisaggMode::Ddsc => model.disc_bases(),
    };
    let blocks = disaggregation_solve(aggregate.values(), bases, model.config())?;
    blocks
        .iter()
        .zip(bases)
        .map(|(block, basis)| {
            UsageMatrix::new(
                basis.values().dot(block.values()),
                aggregate.interval_seconds(),
                aggregate.start_timestamp(),
            )
        })
        .collect()
}

/// Reconstruction error of the true components using activations inferred
/// from the aggregate alone; the reconstruction always uses the model's
/// reconstruction bases, while the activations come from the mode's bases.
pub fn disaggregation_error(
    components: &[UsageMatrix],
    aggregate: &UsageMatrix,
    model: &DisaggModel,
    mode: DisaggMode,
) -> Result<f64> {
    if components.len() != model.num_appliances() {
        return Err(DdscError::ShapeMismatch(format!(
            "{} component matrices for a {}-appliance model",
            components.len(),
            model.num_appliances()
        )));
    }
    for (k, c) in components.iter().enumerate() {
        if c.values().dim() != aggregate.values().dim() {
            return Err(DdscError::ShapeMismatch(format!(
                "component {k} has shape {:?}, aggregate has {:?}",
                c.values().dim(),
                aggregate.values().dim()
            )));
        }
    }
    if aggregate.window_len() != model.window_len() {
        return Err(DdscError::WindowLengthMismatch {
            expected: model.window_len(),
            actual: aggregate.window_len(),
        });
    }
    let bases = match mode {
        DisaggMode::Nnsc => model.recon_bases(),
        DisaggMode::Ddsc => model.disc_bases(),
    };
    let blocks = disaggregation_solve(aggregate.values(), bases, model.config())?;
    let mut total = 0.0;
    for (k, block) in blocks.iter().enumerate() {
        let resid =
            components[k].values() - &model.recon_bases()[k].values().dot(block.values());
        total += 0.5 * resid.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total)
}

/// Mean absolute error per time step, in kWh.
pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(DdscError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let sum: f64 = truth.iter().zip(pred).map(|(t, p)| (p - t).abs()).sum();
    Ok(sum / truth.len() as f64)
}

/// Relative error of the total energy over the window. Undefined when the
/// truth total is zero; callers must surface that case, never report 0.
pub fn sae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(DdscError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let truth_total: f64 = truth.iter().sum();
    if truth_total == 0.0 {
        return Err(DdscError::ZeroTruthTotal);
    }
    let pred_total: f64 = pred.iter().sum();
    Ok((pred_total - truth_total).abs() / truth_total)
}

/// Squared error normalized by the truth energy. Computed for completeness;
/// headline comparisons use MAE and SAE.
pub fn nde(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(DdscError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let energy: f64 = truth.iter().map(|t| t * t).sum();
    if energy == 0.0 {
        return Err(DdscError::ZeroTruthEnergy);
    }
    let sq_err: f64 = truth.iter().zip(pred).map(|(t, p)| (p - t) * (p - t)).sum();
    Ok(sq_err / energy)
}

/// Per-appliance metric row. `sae`/`nde` are `None` when undefined for every
/// evaluated column; the undefined counts say how many columns were skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceMetrics {
    pub label: String,
    pub mae: f64,
    pub sae: Option<f64>,
    pub nde: Option<f64>,
    pub sae_undefined_columns: usize,
    pub nde_undefined_columns: usize,
}

/// Unweighted appliance means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub mae: f64,
    pub sae: Option<f64>,
    pub nde: Option<f64>,
}

/// Evaluation summary for one prediction mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: DisaggMode,
    pub columns: usize,
    pub per_appliance: Vec<ApplianceMetrics>,
    pub overall: OverallMetrics,
    /// Aggregation conventions, spelled out so reports are self-describing.
    pub conventions: String,
}

fn mean_defined(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Evaluates a model on a labeled dataset: predicts from the aggregate,
/// scores each appliance column by column, averages per-column metrics per
/// appliance and reports the unweighted appliance mean as the overall row.
pub fn evaluate(
    dataset: &ApplianceDataset,
    model: &DisaggModel,
    mode: DisaggMode,
) -> Result<MetricsReport> {
    if dataset.labels() != model.labels() {
        return Err(DdscError::ShapeMismatch(format!(
            "dataset labels {:?} do not match model labels {:?}",
            dataset.labels(),
            model.labels()
        )));
    }
    let predictions = predict(dataset.aggregate(), model, mode)?;
    let columns = dataset.num_columns();

    let mut per_appliance = Vec::with_capacity(dataset.num_appliances());
    for (k, label) in dataset.labels().iter().enumerate() {
        let truth = dataset.component(k).values();
        let pred = predictions[k].values();
        let mut maes = Vec::with_capacity(columns);
        let mut saes = Vec::new();
        let mut ndes = Vec::new();
        let mut sae_undefined = 0;
        let mut nde_undefined = 0;
        for j in 0..columns {
            let t: Vec<f64> = truth.column(j).to_vec();
            let p: Vec<f64> = pred.column(j).to_vec();
            maes.push(mae(&t, &p)?);
            match sae(&t, &p) {
                Ok(v) => saes.push(v),
                Err(DdscError::ZeroTruthTotal) => sae_undefined += 1,
                Err(e) => return Err(e),
            }
            match nde(&t, &p) {
                Ok(v) => ndes.push(v),
                Err(DdscError::ZeroTruthEnergy) => nde_undefined += 1,
                Err(e) => return Err(e),
            }
        }
        per_appliance.push(ApplianceMetrics {
            label: label.clone(),
            mae: mean_defined(&maes).expect("at least one column"),
            sae: mean_defined(&saes),
            nde: mean_defined(&ndes),
            sae_undefined_columns: sae_undefined,
            nde_undefined_columns: nde_undefined,
        });
    }

    let overall = OverallMetrics {
        mae: mean_defined(&per_appliance.iter().map(|a| a.mae).collect::<Vec<_>>())
            .expect("at least one appliance"),
        sae: mean_defined(&per_appliance.iter().filter_map(|a| a.sae).collect::<Vec<_>>()),
        nde: mean_defined(&per_appliance.iter().filter_map(|a| a.nde).collect::<Vec<_>>()),
    };

    Ok(MetricsReport {
        mode,
        columns,
        per_appliance,
        overall,
        conventions: "per-column metrics averaged per appliance, then unweighted appliance \
                      mean; undefined relative errors excluded with counts"
            .to_string(),
    })
}

fn metric_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "undefined".to_string(),
    }
}

/// Renders two reports (one per mode) as a comparison table: appliance rows
/// plus an overall row, with one column per metric and mode.
pub fn metrics_table_csv(nnsc: &MetricsReport, ddsc: &MetricsReport) -> Result<String> {
    if nnsc.per_appliance.len() != ddsc.per_appliance.len() {
        return Err(DdscError::ShapeMismatch(
            "reports cover different appliance sets".into(),
        ));
    }
    let mut out =
        String::from("appliance,mae_nnsc,mae_ddsc,sae_nnsc,sae_ddsc,nde_nnsc,nde_ddsc\n");
    for (a, b) in nnsc.per_appliance.iter().zip(&ddsc.per_appliance) {
        if a.label != b.label {
            return Err(DdscError::ShapeMismatch(format!(
                "report rows disagree: {} vs {}",
                a.label, b.label
            )));
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.label,
            a.mae,
            b.mae,
            metric_cell(a.sae),
            metric_cell(b.sae),
            metric_cell(a.nde),
            metric_cell(b.nde),
        ));
    }
    out.push_str(&format!(
        "overall,{},{},{},{},{},{}\n",
        nnsc.overall.mae,
        ddsc.overall.mae,
        metric_cell(nnsc.overall.sae),
        metric_cell(ddsc.overall.sae),
        metric_cell(nnsc.overall.nde),
        metric_cell(ddsc.overall.nde),
    ));
    Ok(out)
}
