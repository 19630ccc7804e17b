//! `ddsc synth`: generate a synthetic dataset bundle.

use std::path::Path;

use anyhow::Context;
use ddsc_core::dataio::write_bundle;
use ddsc_core::synth::{bundle_from_spec, ProfileSpec};

use super::{numeric, usage, CliError};

pub fn run(spec_path: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))
        .map_err(usage)?;
    let spec: ProfileSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", spec_path.display()))
        .map_err(usage)?;
    spec.validate().map_err(usage)?;
    let bundle = bundle_from_spec(&spec, seed).map_err(numeric)?;
    write_bundle(out, &bundle).map_err(numeric)?;
    println!(
        "wrote bundle to {}: {} train and {} test columns over {} categories",
        out.display(),
        bundle.train.dataset.num_columns(),
        bundle.test.dataset.num_columns(),
        bundle.labels.len()
    );
    Ok(())
}
