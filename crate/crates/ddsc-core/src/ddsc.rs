//! Discriminative refinement of the disaggregation bases.
//!
//! Starting from the reconstruction bases, each iteration solves the joint
//! activation problem on the training aggregate, measures the regularized
//! disaggregation error, nudges the concatenated bases with a structured
//! perceptron step toward the per-appliance target activations, and projects
//! every appliance block back onto the constraint set. The bases with the
//! best recorded error are returned, not the last iterate: perceptron
//! updates are not monotone.

use ndarray::{s, Array2};
use serde::Serialize;

use crate::error::{DdscError, Result};
use crate::rng::{stream_rng, STREAM_DD_PROJECT};
use crate::solver::{penalty_value, project_dictionary, solve_activations};
use crate::types::{check_finite, Activations, ApplianceDataset, Dictionary, TrainConfig};

/// Iterations without improvement of the disaggregation error before the
/// loop stops.
const PATIENCE: usize = 5;

/// Horizontal concatenation of per-appliance bases into one matrix.
pub fn concat_bases(bases: &[Dictionary]) -> Result<Array2<f64>> {
    if bases.is_empty() {
        return Err(DdscError::ShapeMismatch("no bases to concatenate".into()));
    }
    let window_len = bases[0].window_len();
    let total: usize = bases.iter().map(|b| b.num_bases()).sum();
    let mut out = Array2::<f64>::zeros((window_len, total));
    let mut offset = 0;
    for (k, b) in bases.iter().enumerate() {
        if b.window_len() != window_len {
            return Err(DdscError::ShapeMismatch(format!(
                "basis block {k} has {} rows, expected {window_len}",
                b.window_len()
            )));
        }
        out.slice_mut(s![.., offset..offset + b.num_bases()])
            .assign(b.values());
        offset += b.num_bases();
    }
    Ok(out)
}

/// Vertical stacking of per-appliance activations into one matrix.
pub fn stack_activations(blocks: &[Activations]) -> Result<Array2<f64>> {
    if blocks.is_empty() {
        return Err(DdscError::ShapeMismatch("no activations to stack".into()));
    }
    let cols = blocks[0].num_columns();
    let total: usize = blocks.iter().map(|a| a.num_bases()).sum();
    let mut out = Array2::<f64>::zeros((total, cols));
    let mut offset = 0;
    for (k, a) in blocks.iter().enumerate() {
        if a.num_columns() != cols {
            return Err(DdscError::ShapeMismatch(format!(
                "activation block {k} has {} columns, expected {cols}",
                a.num_columns()
            )));
        }
        out.slice_mut(s![offset..offset + a.num_bases(), ..])
            .assign(a.values());
        offset += a.num_bases();
    }
    Ok(out)
}

/// Splits a stacked activation matrix back into per-appliance blocks.
pub fn split_activations(stacked: &Array2<f64>, sizes: &[usize]) -> Result<Vec<Activations>> {
    let total: usize = sizes.iter().sum();
    if total != stacked.nrows() {
        return Err(DdscError::ShapeMismatch(format!(
            "block sizes sum to {total} but the stacked matrix has {} rows",
            stacked.nrows()
        )));
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let block = stacked.slice(s![offset..offset + size, ..]).to_owned();
        out.push(Activations::new(block)?);
        offset += size;
    }
    Ok(out)
}

/// Solves the joint activation problem of an aggregate signal against the
/// concatenation of all appliance bases and splits the result back into
/// per-appliance blocks.
pub fn disaggregation_solve(
    aggregate: &Array2<f64>,
    bases: &[Dictionary],
    config: &TrainConfig,
) -> Result<Vec<Activations>> {
    let combined = Dictionary::new(concat_bases(bases)?)?;
    let (stacked, _) = solve_activations(
        aggregate,
        &combined,
        config.lambda,
        config.penalty_mode,
        config.solver_max_iters,
        config.tol,
    )?;
    let sizes: Vec<usize> = bases.iter().map(|b| b.num_bases()).collect();
    split_activations(stacked.values(), &sizes)
}

/// One structured perceptron step on the concatenated bases:
/// `B <- B - alpha * ((X - B A_hat) A_hat^T - (X - B A_star) A_star^T)`.
///
/// No projection is applied here. When `a_hat` equals `a_star` the two terms
/// cancel exactly and the input is returned bit-identically.
pub fn perceptron_step(
    aggregate: &Array2<f64>,
    bases: &Array2<f64>,
    a_hat: &Array2<f64>,
    a_star: &Array2<f64>,
    alpha: f64,
) -> Result<Array2<f64>> {
    check_finite(&aggregate.view())?;
    check_finite(&bases.view())?;
    for (name, a) in [("a_hat", a_hat), ("a_star", a_star)] {
        for ((row, col), &v) in a.indexed_iter() {
            if !v.is_finite() {
                return Err(DdscError::NonFiniteInput { row, col });
            }
            if v < 0.0 {
                return Err(DdscError::NegativeEntry { row, col, value: v });
            }
        }
        if a.nrows() != bases.ncols() || a.ncols() != aggregate.ncols() {
            return Err(DdscError::DimensionMismatch(format!(
                "{name} is {}x{}, expected {}x{}",
                a.nrows(),
                a.ncols(),
                bases.ncols(),
                aggregate.ncols()
            )));
        }
    }
    if bases.nrows() != aggregate.nrows() {
        return Err(DdscError::DimensionMismatch(format!(
            "bases have {} rows but the aggregate has {}",
            bases.nrows(),
            aggregate.nrows()
        )));
    }
    if !alpha.is_finite() {
        return Err(DdscError::InvalidConfig(format!(
            "alpha must be finite, got {alpha}"
        )));
    }

    let resid_hat = aggregate - &bases.dot(a_hat);
    let resid_star = aggregate - &bases.dot(a_star);
    let update = resid_hat.dot(&a_hat.t()) - resid_star.dot(&a_star.t());
    Ok(bases - &update.mapv(|v| alpha * v))
}

/// Per-iteration record of the discriminative training loop.
#[derive(Debug, Clone, Serialize)]
pub struct DdIterationRecord {
    pub iteration: usize,
    /// Regularized disaggregation error with the reconstruction bases in the
    /// data term; drives early stopping and best-iterate selection.
    pub error_recon_bases: f64,
    /// Same error with the discriminative bases in the data term.
    pub error_disc_bases: f64,
    /// Frobenius norm of the applied (pre-projection) basis update.
    pub update_norm: f64,
}

/// Outcome of discriminative training.
#[derive(Debug, Clone)]
pub struct DdscTraining {
    pub disc_bases: Vec<Dictionary>,
    pub log: Vec<DdIterationRecord>,
    pub best_iteration: usize,
    pub best_error: f64,
}

/// Regularized disaggregation error: reconstruction of the true components
/// from aggregate-inferred activations, plus the sparsity penalty.
fn regularized_error(
    dataset: &ApplianceDataset,
    recon_bases: &[Dictionary],
    blocks: &[Activations],
    config: &TrainConfig,
) -> f64 {
    let mut total = 0.0;
    for (k, block) in blocks.iter().enumerate() {
        let resid = dataset.component(k).values() - &recon_bases[k].values().dot(block.values());
        total += 0.5 * resid.iter().map(|v| v * v).sum::<f64>();
        total += penalty_value(&block.values().view(), config.lambda, config.penalty_mode);
    }
    total
}

/// Runs the discriminative training loop. See [`train_ddsc_with_observer`]
/// for a variant that exposes the bases after every projection.
pub fn train_ddsc(
    dataset: &ApplianceDataset,
    recon_bases: &[Dictionary],
    targets: &[Activations],
    config: &TrainConfig,
) -> Result<DdscTraining> {
    train_ddsc_with_observer(dataset, recon_bases, targets, config, |_, _| {})
}

/// Discriminative training with a per-iteration observer called with the
/// iteration index and the freshly projected bases.
pub fn train_ddsc_with_observer(
    dataset: &ApplianceDataset,
    recon_bases: &[Dictionary],
    targets: &[Activations],
    config: &TrainConfig,
    mut observer: impl FnMut(usize, &[Dictionary]),
) -> Result<DdscTraining> {
    config.validate()?;
    let k = dataset.num_appliances();
    if recon_bases.len() != k || targets.len() != k {
        return Err(DdscError::ShapeMismatch(format!(
            "{k} appliances but {} bases and {} target blocks",
            recon_bases.len(),
            targets.len()
        )));
    }
    for (i, (b, t)) in recon_bases.iter().zip(targets).enumerate() {
        if b.window_len() != dataset.window_len() {
            return Err(DdscError::ShapeMismatch(format!(
                "basis block {i} has {} rows, dataset windows have {}",
                b.window_len(),
                dataset.window_len()
            )));
        }
        if t.num_bases() != b.num_bases() || t.num_columns() != dataset.num_columns() {
            return Err(DdscError::ShapeMismatch(format!(
                "target block {i} is {}x{}, expected {}x{}",
                t.num_bases(),
                t.num_columns(),
                b.num_bases(),
                dataset.num_columns()
            )));
        }
    }

    let aggregate = dataset.aggregate().values();
    let sizes: Vec<usize> = recon_bases.iter().map(|b| b.num_bases()).collect();
    let a_star = stack_activations(targets)?;
    let mut rngs: Vec<_> = (0..k)
        .map(|i| stream_rng(config.seed, STREAM_DD_PROJECT + i as u64))
        .collect();

    let mut disc: Vec<Dictionary> = recon_bases.to_vec();
    let mut best: Vec<Dictionary> = disc.clone();
    let mut best_error = f64::INFINITY;
    let mut best_iteration = 0;
    let mut stall = 0usize;
    let mut log = Vec::new();

    for iteration in 0..config.dd_max_iters {
        let blocks = disaggregation_solve(aggregate, &disc, config)?;
        let error_recon = regularized_error(dataset, recon_bases, &blocks, config);
        let error_disc = regularized_error(dataset, &disc, &blocks, config);

        if error_recon < best_error {
            best_error = error_recon;
            best = disc.clone();
            best_iteration = iteration;
            stall = 0;
        } else {
            stall += 1;
        }
        if stall >= PATIENCE {
            log.push(DdIterationRecord {
                iteration,
                error_recon_bases: error_recon,
                error_disc_bases: error_disc,
                update_norm: 0.0,
            });
            break;
        }

        let concatenated = concat_bases(&disc)?;
        let a_hat = stack_activations(&blocks)?;
        let stepped = perceptron_step(aggregate, &concatenated, &a_hat, &a_star, config.alpha)?;
        let update_norm = (&stepped - &concatenated)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();

        let mut offset = 0;
        for (i, &size) in sizes.iter().enumerate() {
            let block = stepped.slice(s![.., offset..offset + size]).to_owned();
            disc[i] = project_dictionary(&block, &mut rngs[i])?;
            offset += size;
        }
        observer(iteration, &disc);

        log.push(DdIterationRecord {
            iteration,
            error_recon_bases: error_recon,
            error_disc_bases: error_disc,
            update_norm,
        });
    }

    Ok(DdscTraining {
        disc_bases: best,
        log,
        best_iteration,
        best_error,
    })
}
