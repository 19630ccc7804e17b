//! End-to-end training: per-appliance pre-training, target activation
//! computation and discriminative refinement, producing a [`DisaggModel`].

use rayon::prelude::*;

use crate::ddsc::{train_ddsc, DdIterationRecord};
use crate::error::Result;
use crate::model::DisaggModel;
use crate::nnsc::{compute_target_activations, train_nnsc};
use crate::rng::{stream_rng, STREAM_NNSC};
use crate::types::{Activations, ApplianceDataset, Dictionary, TrainConfig};

/// A trained model together with its training telemetry.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: DisaggModel,
    /// One record per discriminative iteration; empty when refinement was
    /// skipped.
    pub dd_log: Vec<DdIterationRecord>,
    /// Pre-training objective traces, one per appliance.
    pub nnsc_traces: Vec<Vec<f64>>,
}

/// Trains the full pipeline on a labeled dataset. With `skip_dd` the
/// discriminative bases are a copy of the reconstruction bases, giving the
/// plain sparse-coding baseline.
pub fn train_model(
    train: &ApplianceDataset,
    config: &TrainConfig,
    skip_dd: bool,
) -> Result<TrainedModel> {
    config.validate()?;

    // appliances train independently, each on its own random stream
    let pretrained: Vec<_> = train
        .components()
        .par_iter()
        .enumerate()
        .map(|(k, component)| {
            let mut rng = stream_rng(config.seed, STREAM_NNSC + k as u64);
            train_nnsc(component, config, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let recon_bases: Vec<Dictionary> =
        pretrained.iter().map(|p| p.dictionary.clone()).collect();
    let nnsc_traces: Vec<Vec<f64>> =
        pretrained.iter().map(|p| p.objective_trace.clone()).collect();

    let targets: Vec<Activations> = train
        .components()
        .par_iter()
        .zip(&recon_bases)
        .map(|(component, basis)| compute_target_activations(component, basis, config))
        .collect::<Result<Vec<_>>>()?;

    let (disc_bases, dd_log) = if skip_dd {
        (recon_bases.clone(), Vec::new())
    } else {
        let out = train_ddsc(train, &recon_bases, &targets, config)?;
        (out.disc_bases, out.log)
    };

    let model = DisaggModel::new(
        train.labels().to_vec(),
        recon_bases,
        disc_bases,
        config.clone(),
        train.window_len(),
    )?;
    Ok(TrainedModel {
        model,
        dd_log,
        nnsc_traces,
    })
}
