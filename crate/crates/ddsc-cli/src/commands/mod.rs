//! Command implementations and shared plumbing.

pub mod disaggregate;
pub mod evaluate;
pub mod gridsearch;
pub mod ingest;
pub mod report;
pub mod synth;
pub mod train;

use std::path::Path;

use ddsc_core::{DisaggMode, PenaltyMode, TrainConfig};
use serde::Deserialize;

/// Command failure carrying its exit code class: usage/input errors exit 2,
/// numerical failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Numeric(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn inner(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Numeric(e) => e,
        }
    }
}

/// Wraps input-phase failures.
pub fn usage(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(err.into())
}

/// Wraps computation-phase failures.
pub fn numeric(err: impl Into<anyhow::Error>) -> CliError {
    CliError::Numeric(err.into())
}

pub fn parse_mode(text: &str) -> Result<DisaggMode, String> {
    match text.to_ascii_lowercase().as_str() {
        "nnsc" => Ok(DisaggMode::Nnsc),
        "ddsc" => Ok(DisaggMode::Ddsc),
        other => Err(format!("unknown mode {other:?}, expected nnsc or ddsc")),
    }
}

/// Partial training-config file; unset fields keep their defaults. The
/// optional `t` pins the expected window length of the data.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub n_bases: Option<usize>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub nnsc_max_iters: Option<usize>,
    pub dd_max_iters: Option<usize>,
    pub solver_max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub penalty_mode: Option<PenaltyMode>,
    pub t: Option<usize>,
}

impl ConfigOverrides {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(usage)?;
                serde_json::from_str(&text).map_err(usage)
            }
        }
    }

    /// Applies the overrides onto the defaults, returning the full config
    /// and the optional window-length pin.
    pub fn resolve(&self, seed_flag: Option<u64>) -> (TrainConfig, Option<usize>) {
        let mut config = TrainConfig::default();
        if let Some(v) = self.n_bases {
            config.n_bases = v;
        }
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.nnsc_max_iters {
            config.nnsc_max_iters = v;
        }
        if let Some(v) = self.dd_max_iters {
            config.dd_max_iters = v;
        }
        if let Some(v) = self.solver_max_iters {
            config.solver_max_iters = v;
        }
        if let Some(v) = self.tol {
            config.tol = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.penalty_mode {
            config.penalty_mode = v;
        }
        if let Some(v) = seed_flag {
            config.seed = v;
        }
        (config, self.t)
    }
}
