//! Energy disaggregation by discriminative sparse coding.
//!
//! The pipeline learns a non-negative dictionary per appliance category from
//! labeled usage matrices, refines the dictionaries with structured
//! perceptron updates so that activations inferred from a whole-home
//! aggregate align with the per-appliance targets, and then splits unseen
//! aggregate signals into per-appliance estimates scored by MAE, SAE and
//! NDE.
//!
//! Modules:
//! - [`types`]: validated matrix and config types shared everywhere.
//! - [`solver`]: the inner activation solve and dictionary update.
//! - [`nnsc`]: per-appliance dictionary pre-training.
//! - [`ddsc`]: discriminative refinement of the disaggregation bases.
//! - [`disagg`]: prediction and metrics.
//! - [`dataio`]: meter CSV ingestion, resampling, windowing and bundles.
//! - [`synth`]: deterministic synthetic households and a brute-force oracle.
//! - [`pipeline`]: end-to-end training producing a [`DisaggModel`].

pub mod dataio;
pub mod ddsc;
pub mod disagg;
pub mod error;
pub mod model;
pub mod nnsc;
pub mod pipeline;
pub mod rng;
pub mod solver;
pub mod synth;
pub mod types;

pub use error::{DdscError, Result};
pub use model::{DisaggModel, MODEL_FORMAT_VERSION};
pub use types::{
    Activations, ApplianceDataset, Dictionary, PenaltyMode, TrainConfig, UsageMatrix,
};
pub use disagg::{DisaggMode, MetricsReport};
pub use solver::SolveReport;
