//! Inner optimizers: the non-negative sparsity-regularized activation solve
//! and the non-negative dictionary update under unit-norm column constraints.
//!
//! The activation solve minimizes, per example column x,
//!
//! ```text
//!     0.5 * ||x - B a||^2 + penalty(a),    a >= 0
//! ```
//!
//! with `penalty(a) = lambda * sum(a)` in `L1` mode (the coefficients are
//! non-negative, so the sum is the l1 norm) or `lambda * sum(a^2)` in
//! `SquaredFrobenius` mode. Columns are independent, so the matrix problem
//! decomposes and is solved per column by cyclic coordinate descent with
//! exact single-coordinate minimization. Convergence is declared when the
//! worst per-coordinate optimality violation drops to `tol`: at a solution,
//! every positive coordinate has (near-)zero partial derivative and every
//! zero coordinate has a non-negative one.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DdscError, Result};
use crate::types::{check_finite, Activations, Dictionary, PenaltyMode, NORM_SLACK};

/// Denominator guard in the multiplicative dictionary update.
const MULT_EPS: f64 = 1e-12;

/// Refresh the incremental residual from scratch every this many sweeps to
/// cancel accumulated floating-point drift.
const RESIDUAL_REFRESH_SWEEPS: usize = 64;

/// Outcome summary of an inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Sweeps (activation solve) or update steps (dictionary update) taken.
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
}

/// Result of a dictionary update, with the per-step objective trace.
#[derive(Debug, Clone)]
pub struct DictionaryUpdate {
    pub dictionary: Dictionary,
    pub report: SolveReport,
    /// Reconstruction objective before the first step and after each
    /// accepted step; non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

/// The penalty term on a full activation matrix.
pub fn penalty_value(a: &ArrayView2<f64>, lambda: f64, mode: PenaltyMode) -> f64 {
    match mode {
        PenaltyMode::L1 => lambda * a.sum(),
        PenaltyMode::SquaredFrobenius => lambda * a.iter().map(|v| v * v).sum::<f64>(),
    }
}

/// Full objective: `0.5 ||X - B A||_F^2 + penalty(A)`.
pub fn objective(
    x: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    a: &ArrayView2<f64>,
    lambda: f64,
    mode: PenaltyMode,
) -> f64 {
    let resid = x - &b.dot(a);
    0.5 * resid.iter().map(|v| v * v).sum::<f64>() + penalty_value(a, lambda, mode)
}

fn validate_solve_inputs(
    x: &Array2<f64>,
    dict: &Dictionary,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<()> {
    check_finite(&x.view())?;
    for ((row, col), &v) in x.indexed_iter() {
        if v < 0.0 {
            return Err(DdscError::NegativeEntry { row, col, value: v });
        }
    }
    if dict.window_len() != x.nrows() {
        return Err(DdscError::DimensionMismatch(format!(
            "signal has {} rows but dictionary has {}",
            x.nrows(),
            dict.window_len()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(DdscError::InvalidConfig(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if max_iters == 0 {
        return Err(DdscError::InvalidConfig("max_iters must be positive".into()));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(DdscError::InvalidConfig(format!(
            "tol must be finite and positive, got {tol}"
        )));
    }
    Ok(())
}

/// Solves for non-negative activations of `x` against the dictionary.
///
/// Columns are solved independently (and in parallel); the result is
/// identical to solving each column on its own.
pub fn solve_activations(
    x: &Array2<f64>,
    dict: &Dictionary,
    lambda: f64,
    mode: PenaltyMode,
    max_iters: usize,
    tol: f64,
) -> Result<(Activations, SolveReport)> {
    solve_activations_impl(x, dict, lambda, mode, max_iters, tol, None)
}

/// Same solve warm-started from a previous activation matrix. Starting from
/// a feasible point never increases the objective, which the alternating
/// trainer relies on for its monotone trace.
pub(crate) fn solve_activations_warm(
    x: &Array2<f64>,
    dict: &Dictionary,
    lambda: f64,
    mode: PenaltyMode,
    max_iters: usize,
    tol: f64,
    warm: &Activations,
) -> Result<(Activations, SolveReport)> {
    solve_activations_impl(x, dict, lambda, mode, max_iters, tol, Some(warm))
}

fn solve_activations_impl(
    x: &Array2<f64>,
    dict: &Dictionary,
    lambda: f64,
    mode: PenaltyMode,
    max_iters: usize,
    tol: f64,
    warm: Option<&Activations>,
) -> Result<(Activations, SolveReport)> {
    validate_solve_inputs(x, dict, lambda, max_iters, tol)?;
    let b = dict.values();
    let n = b.ncols();
    let m = x.ncols();
    if let Some(w) = warm {
        if w.num_bases() != n || w.num_columns() != m {
            return Err(DdscError::DimensionMismatch(format!(
                "warm start is {}x{}, expected {n}x{m}",
                w.num_bases(),
                w.num_columns()
            )));
        }
    }
    let gram = b.t().dot(b);
    let diag: Vec<f64> = gram.diag().to_vec();

    let columns: Vec<(Array1<f64>, usize, bool)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let warm_col = warm.map(|w| w.values().column(j));
            solve_column(&b.view(), &diag, x.column(j), warm_col, lambda, mode, max_iters, tol)
        })
        .collect();

    let mut values = Array2::<f64>::zeros((n, m));
    let mut iterations = 0;
    let mut converged = true;
    for (j, (col, iters, ok)) in columns.into_iter().enumerate() {
        values.column_mut(j).assign(&col);
        iterations = iterations.max(iters);
        converged &= ok;
    }
    let final_objective = objective(&x.view(), &b.view(), &values.view(), lambda, mode);
    let activations = Activations::new(values)?;
    Ok((
        activations,
        SolveReport {
            iterations,
            final_objective,
            converged,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn solve_column(
    b: &ArrayView2<f64>,
    diag: &[f64],
    x: ArrayView1<f64>,
    warm: Option<ArrayView1<f64>>,
    lambda: f64,
    mode: PenaltyMode,
    max_iters: usize,
    tol: f64,
) -> (Array1<f64>, usize, bool) {
    let n = b.ncols();
    let mut a = match warm {
        Some(w) => w.to_owned(),
        None => Array1::zeros(n),
    };
    let mut resid = &x - &b.dot(&a);
    let mut iterations = 0;
    let mut converged = false;

    for sweep in 1..=max_iters {
        iterations = sweep;
        if sweep % RESIDUAL_REFRESH_SWEEPS == 0 {
            resid = &x - &b.dot(&a);
        }
        for j in 0..n {
            let d = diag[j];
            let old = a[j];
            let new = if d > 0.0 {
                let rho = b.column(j).dot(&resid) + d * old;
                match mode {
                    PenaltyMode::L1 => ((rho - lambda) / d).max(0.0),
                    PenaltyMode::SquaredFrobenius => (rho / (d + 2.0 * lambda)).max(0.0),
                }
            } else {
                // zero basis column: the data term ignores this coordinate
                // and the penalty is minimized at zero
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                let bj = b.column(j);
                resid.zip_mut_with(&bj, |r, &v| *r -= delta * v);
                a[j] = new;
            }
        }
        // per-coordinate optimality violation
        let mut worst = 0.0f64;
        for j in 0..n {
            let grad = -b.column(j).dot(&resid)
                + match mode {
                    PenaltyMode::L1 => lambda,
                    PenaltyMode::SquaredFrobenius => 2.0 * lambda * a[j],
                };
            let violation = if a[j] > 0.0 { grad.abs() } else { (-grad).max(0.0) };
            worst = worst.max(violation);
        }
        if worst <= tol {
            converged = true;
            break;
        }
    }
    (a, iterations, converged)
}

/// Clamps negatives to zero, rescales columns with l2 norm above 1 back to
/// exactly 1 and re-seeds all-zero columns with a fresh random non-negative
/// unit-norm column drawn from `rng`.
///
/// Columns that already satisfy the constraints are left untouched, so
/// projecting twice returns the first result bit-identically.
pub fn project_dictionary(raw: &Array2<f64>, rng: &mut ChaCha8Rng) -> Result<Dictionary> {
    check_finite(&raw.view())?;
    let mut values = raw.mapv(|v| v.max(0.0));
    for mut col in values.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            for v in col.iter_mut() {
                *v = 1.0 - rng.gen::<f64>(); // uniform (0, 1]
            }
            let fresh_norm = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / fresh_norm);
        } else if norm > 1.0 + NORM_SLACK {
            col.mapv_inplace(|v| v / norm);
        }
    }
    Dictionary::new(values)
}

/// One block of alternating dictionary learning: with activations fixed,
/// improves the dictionary by the multiplicative rule
/// `B <- B .* (X A^T) ./ (B A A^T + eps)` followed by projection back onto
/// the constraint set. A step that fails to lower the reconstruction
/// objective is discarded and the update stops, so the recorded trace is
/// non-increasing and the returned dictionary is never worse than the input.
pub fn update_dictionary(
    x: &Array2<f64>,
    acts: &Activations,
    b_init: &Dictionary,
    max_iters: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DictionaryUpdate> {
    check_finite(&x.view())?;
    if max_iters == 0 {
        return Err(DdscError::InvalidConfig("max_iters must be positive".into()));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(DdscError::InvalidConfig(format!(
            "tol must be finite and positive, got {tol}"
        )));
    }
    let a = acts.values();
    if b_init.window_len() != x.nrows()
        || a.nrows() != b_init.num_bases()
        || a.ncols() != x.ncols()
    {
        return Err(DdscError::DimensionMismatch(format!(
            "X is {}x{}, B is {}x{}, A is {}x{}",
            x.nrows(),
            x.ncols(),
            b_init.window_len(),
            b_init.num_bases(),
            a.nrows(),
            a.ncols()
        )));
    }

    let recon_obj = |b: &Array2<f64>| -> f64 {
        let resid = x - &b.dot(a);
        0.5 * resid.iter().map(|v| v * v).sum::<f64>()
    };

    // With zero activations the objective does not depend on B at all.
    if a.iter().all(|&v| v == 0.0) {
        let obj = recon_obj(b_init.values());
        return Ok(DictionaryUpdate {
            dictionary: b_init.clone(),
            report: SolveReport {
                iterations: 1,
                final_objective: obj,
                converged: true,
            },
            objective_trace: vec![obj],
        });
    }

    let aat = a.dot(&a.t());
    let xat = x.dot(&a.t());
    let mut current = b_init.values().clone();
    let mut obj_prev = recon_obj(&current);
    let mut trace = vec![obj_prev];
    let mut iterations = 0;
    let mut converged = false;

    for _ in 1..=max_iters {
        iterations += 1;
        let denom = current.dot(&aat) + MULT_EPS;
        let mut stepped = current.clone();
        stepped.zip_mut_with(&xat, |b, &num| *b *= num);
        stepped.zip_mut_with(&denom, |b, &den| *b /= den);
        let projected = project_dictionary(&stepped, rng)?;
        let obj_new = recon_obj(projected.values());
        if obj_new > obj_prev {
            // projection pushed the step uphill; keep the previous iterate
            converged = true;
            break;
        }
        let max_change = projected
            .values()
            .iter()
            .zip(current.iter())
            .map(|(nv, ov)| (nv - ov).abs())
            .fold(0.0f64, f64::max);
        current = projected.values().clone();
        trace.push(obj_new);
        let rel_drop = (obj_prev - obj_new) / obj_prev.max(f64::MIN_POSITIVE);
        obj_prev = obj_new;
        if rel_drop < tol || max_change < tol {
            converged = true;
            break;
        }
    }

    Ok(DictionaryUpdate {
        dictionary: Dictionary::new(current)?,
        report: SolveReport {
            iterations,
            final_objective: obj_prev,
            converged,
        },
        objective_trace: trace,
    })
}
