//! Pre-training: per-appliance non-negative sparse coding.
//!
//! Alternates the activation solve (dictionary fixed) with the multiplicative
//! dictionary update (activations fixed). Both block steps are individually
//! non-increasing, so the recorded objective trace is monotone.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::solver::{
    objective, solve_activations, solve_activations_warm, update_dictionary,
};
use crate::types::{Activations, Dictionary, TrainConfig, UsageMatrix};

/// Multiplicative dictionary steps allowed per alternation round. The
/// activations move next round anyway, so deep inner convergence buys
/// nothing.
const DICT_STEPS_PER_ROUND: usize = 25;

/// Outcome of pre-training one appliance.
#[derive(Debug, Clone)]
pub struct NnscTraining {
    pub dictionary: Dictionary,
    pub activations: Activations,
    /// Full objective after initialization and after each alternation round.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Random dictionary start: entries uniform in (0, 1], columns normalized to
/// unit l2 norm.
pub fn random_dictionary(
    window_len: usize,
    n_bases: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dictionary> {
    let mut values = Array2::<f64>::zeros((window_len, n_bases));
    for j in 0..n_bases {
        for i in 0..window_len {
            values[[i, j]] = 1.0 - rng.gen::<f64>();
        }
        let norm = values.column(j).dot(&values.column(j)).sqrt();
        values.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Dictionary::new(values)
}

/// Learns a dictionary and activations for one appliance's usage matrix.
pub fn train_nnsc(
    usage: &UsageMatrix,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<NnscTraining> {
    config.validate()?;
    let x = usage.values();
    let mut dictionary = random_dictionary(usage.window_len(), config.n_bases, rng)?;
    let (mut activations, _) = solve_activations(
        x,
        &dictionary,
        config.lambda,
        config.penalty_mode,
        config.solver_max_iters,
        config.tol,
    )?;
    let mut obj = objective(
        &x.view(),
        &dictionary.values().view(),
        &activations.values().view(),
        config.lambda,
        config.penalty_mode,
    );
    let mut trace = vec![obj];
    let mut converged = false;

    for _ in 0..config.nnsc_max_iters {
        let update = update_dictionary(
            x,
            &activations,
            &dictionary,
            config.solver_max_iters.min(DICT_STEPS_PER_ROUND),
            config.tol,
            rng,
        )?;
        dictionary = update.dictionary;
        let (next, _) = solve_activations_warm(
            x,
            &dictionary,
            config.lambda,
            config.penalty_mode,
            config.solver_max_iters,
            config.tol,
            &activations,
        )?;
        activations = next;
        let next_obj = objective(
            &x.view(),
            &dictionary.values().view(),
            &activations.values().view(),
            config.lambda,
            config.penalty_mode,
        );
        trace.push(next_obj);
        let rel_drop = (obj - next_obj) / obj.max(f64::MIN_POSITIVE);
        obj = next_obj;
        if rel_drop.abs() < config.tol {
            converged = true;
            break;
        }
    }

    Ok(NnscTraining {
        dictionary,
        activations,
        objective_trace: trace,
        converged,
    })
}

/// Re-solves activations of an appliance's own readings against its trained
/// dictionary. These serve as the alignment target for discriminative
/// refinement.
pub fn compute_target_activations(
    usage: &UsageMatrix,
    dictionary: &Dictionary,
    config: &TrainConfig,
) -> Result<Activations> {
    let (activations, _) = solve_activations(
        usage.values(),
        dictionary,
        config.lambda,
        config.penalty_mode,
        config.solver_max_iters,
        config.tol,
    )?;
    Ok(activations)
}
