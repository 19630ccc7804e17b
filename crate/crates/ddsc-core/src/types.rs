//! Domain types with validated constructors.
//!
//! Matrices follow one orientation throughout the crate: rows are time steps
//! within a window, columns are independent examples (house-weeks). All
//! values are non-negative finite `f64` in kWh per interval.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};

/// Absolute per-entry tolerance when checking that an aggregate signal equals
/// the sum of its components.
pub const AGGREGATE_TOL: f64 = 1e-9;

/// Slack allowed on dictionary column norms beyond 1.0.
pub const NORM_SLACK: f64 = 1e-12;

fn check_finite_nonneg(values: &ArrayView2<f64>) -> Result<()> {
    for ((row, col), &v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(DdscError::NonFiniteInput { row, col });
        }
        if v < 0.0 {
            return Err(DdscError::NegativeEntry { row, col, value: v });
        }
    }
    Ok(())
}

pub(crate) fn check_finite(values: &ArrayView2<f64>) -> Result<()> {
    for ((row, col), &v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(DdscError::NonFiniteInput { row, col });
        }
    }
    Ok(())
}

/// A window of energy readings: `window_len` rows of kWh per interval,
/// one column per example.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageMatrix {
    values: Array2<f64>,
    interval_seconds: u32,
    start_timestamp: Option<i64>,
}

impl UsageMatrix {
    pub fn new(
        values: Array2<f64>,
        interval_seconds: u32,
        start_timestamp: Option<i64>,
    ) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DdscError::ShapeMismatch(format!(
                "usage matrix must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if interval_seconds == 0 {
            return Err(DdscError::InvalidConfig(
                "interval_seconds must be positive".into(),
            ));
        }
        check_finite_nonneg(&values.view())?;
        Ok(Self {
            values,
            interval_seconds,
            start_timestamp,
        })
    }

    /// Convenience constructor from row-major nested vectors.
    pub fn from_rows(rows: Vec<Vec<f64>>, interval_seconds: u32) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?, interval_seconds, None)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Number of time steps per column.
    pub fn window_len(&self) -> usize {
        self.values.nrows()
    }

    /// Number of example columns.
    pub fn num_columns(&self) -> usize {
        self.values.ncols()
    }

    pub fn interval_seconds(&self) -> u32 {
        self.interval_seconds
    }

    pub fn start_timestamp(&self) -> Option<i64> {
        self.start_timestamp
    }

    /// A copy holding only the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(DdscError::ShapeMismatch(
                "cannot select zero columns".into(),
            ));
        }
        for &i in indices {
            if i >= self.num_columns() {
                return Err(DdscError::ShapeMismatch(format!(
                    "column index {i} out of range for {} columns",
                    self.num_columns()
                )));
            }
        }
        Ok(Self {
            values: self.values.select(Axis(1), indices),
            interval_seconds: self.interval_seconds,
            start_timestamp: self.start_timestamp,
        })
    }
}

/// Labeled per-appliance readings plus the whole-home aggregate, all of one
/// shape. The aggregate must equal the entry-wise component sum within
/// [`AGGREGATE_TOL`] (lossless-system assumption).
#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceDataset {
    labels: Vec<String>,
    components: Vec<UsageMatrix>,
    aggregate: UsageMatrix,
}

impl ApplianceDataset {
    /// Builds a dataset. When `aggregate` is omitted it is computed as the
    /// exact entry-wise sum of the components; when provided it is checked
    /// against that sum.
    pub fn new(
        labels: Vec<String>,
        components: Vec<UsageMatrix>,
        aggregate: Option<UsageMatrix>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(DdscError::ShapeMismatch("no components given".into()));
        }
        if labels.len() != components.len() {
            return Err(DdscError::ShapeMismatch(format!(
                "{} labels for {} components",
                labels.len(),
                components.len()
            )));
        }
        let first = &components[0];
        for (k, c) in components.iter().enumerate() {
            if c.values().dim() != first.values().dim()
                || c.interval_seconds() != first.interval_seconds()
            {
                return Err(DdscError::ShapeMismatch(format!(
                    "component {k} has shape {:?}, expected {:?}",
                    c.values().dim(),
                    first.values().dim()
                )));
            }
        }
        let mut sum = Array2::<f64>::zeros(first.values().dim());
        for c in &components {
            sum += c.values();
        }
        let aggregate = match aggregate {
            None => UsageMatrix::new(
                sum,
                first.interval_seconds(),
                first.start_timestamp(),
            )?,
            Some(agg) => {
                if agg.values().dim() != first.values().dim()
                    || agg.interval_seconds() != first.interval_seconds()
                {
                    return Err(DdscError::ShapeMismatch(format!(
                        "aggregate has shape {:?}, expected {:?}",
                        agg.values().dim(),
                        first.values().dim()
                    )));
                }
                for ((row, col), &v) in agg.values().indexed_iter() {
                    let delta = (v - sum[[row, col]]).abs();
                    if delta > AGGREGATE_TOL {
                        return Err(DdscError::AggregateInconsistent {
                            row,
                            col,
                            delta,
                            tol: AGGREGATE_TOL,
                        });
                    }
                }
                agg
            }
        };
        Ok(Self {
            labels,
            components,
            aggregate,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn components(&self) -> &[UsageMatrix] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &UsageMatrix {
        &self.components[k]
    }

    pub fn aggregate(&self) -> &UsageMatrix {
        &self.aggregate
    }

    /// Number of appliance categories.
    pub fn num_appliances(&self) -> usize {
        self.components.len()
    }

    pub fn window_len(&self) -> usize {
        self.aggregate.window_len()
    }

    pub fn num_columns(&self) -> usize {
        self.aggregate.num_columns()
    }

    /// A dataset holding only the given columns of every matrix.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.select_columns(indices))
            .collect::<Result<Vec<_>>>()?;
        let aggregate = self.aggregate.select_columns(indices)?;
        Self::new(self.labels.clone(), components, Some(aggregate))
    }
}

/// A non-negative basis matrix whose columns have unit-bounded l2 norm.
/// Rows are time steps, columns are basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    values: Array2<f64>,
}

impl Dictionary {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DdscError::ShapeMismatch(format!(
                "dictionary must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        check_finite_nonneg(&values.view())?;
        for (j, col) in values.axis_iter(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 + NORM_SLACK {
                return Err(DdscError::ColumnNormExceeded { column: j, norm });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn window_len(&self) -> usize {
        self.values.nrows()
    }

    /// Number of basis functions.
    pub fn num_bases(&self) -> usize {
        self.values.ncols()
    }
}

/// Non-negative activation coefficients: one row per basis function, one
/// column per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    values: Array2<f64>,
}

impl Activations {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DdscError::ShapeMismatch(format!(
                "activations must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        check_finite_nonneg(&values.view())?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_bases(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.values.ncols()
    }
}

/// Which sparsity penalty the activation solver applies.
///
/// `L1` charges the plain coefficient sum (coefficients are non-negative, so
/// this is the l1 norm); `SquaredFrobenius` charges the squared entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    L1,
    SquaredFrobenius,
}

/// Hyperparameters and iteration budgets for the full training pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Basis functions per appliance.
    pub n_bases: usize,
    /// Sparsity weight on activations.
    pub lambda: f64,
    /// Perceptron step size for discriminative refinement.
    pub alpha: f64,
    /// Alternation rounds in pre-training.
    pub nnsc_max_iters: usize,
    /// Discriminative refinement iterations.
    pub dd_max_iters: usize,
    /// Iteration cap for the inner activation and dictionary solvers.
    pub solver_max_iters: usize,
    /// Convergence threshold for the inner solvers.
    pub tol: f64,
    /// Root seed; all randomness derives from it.
    pub seed: u64,
    pub penalty_mode: PenaltyMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_bases: 64,
            lambda: 0.1,
            alpha: 1e-4,
            nnsc_max_iters: 100,
            dd_max_iters: 50,
            solver_max_iters: 500,
            tol: 1e-6,
            seed: 0,
            penalty_mode: PenaltyMode::L1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bases == 0 {
            return Err(DdscError::InvalidConfig("n_bases must be positive".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(DdscError::InvalidConfig(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(DdscError::InvalidConfig(format!(
                "alpha must be finite and positive, got {}",
                self.alpha
            )));
        }
        if self.nnsc_max_iters == 0 || self.dd_max_iters == 0 || self.solver_max_iters == 0 {
            return Err(DdscError::InvalidConfig(
                "iteration caps must be positive".into(),
            ));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(DdscError::InvalidConfig(format!(
                "tol must be finite and positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Converts row-major nested vectors into a rectangular matrix.
pub fn rows_to_matrix(rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(DdscError::BadFormat("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(DdscError::BadFormat("matrix has empty rows".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(DdscError::BadFormat(format!(
                "row {i} has {} values, expected {ncols}",
                row.len()
            )));
        }
    }
    let nrows = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| DdscError::BadFormat(e.to_string()))
}

/// Converts a matrix into row-major nested vectors.
pub fn matrix_to_rows(values: &Array2<f64>) -> Vec<Vec<f64>> {
    values
        .axis_iter(Axis(0))
        .map(|row| row.to_vec())
        .collect()
}
