//! `ddsc train`: pre-train per-appliance dictionaries, refine them
//! discriminatively and write the model file.

use std::io::Write;
use std::path::Path;

use anyhow::anyhow;
use ddsc_core::dataio::read_bundle;
use ddsc_core::pipeline::train_model;

use super::{numeric, usage, CliError, ConfigOverrides};

pub fn run(
    data_dir: &Path,
    config_path: Option<&Path>,
    out_model: &Path,
    skip_dd: bool,
    log_path: Option<&Path>,
    seed_flag: Option<u64>,
) -> Result<(), CliError> {
    let overrides = ConfigOverrides::load(config_path)?;
    let (config, expected_t) = overrides.resolve(seed_flag);
    config.validate().map_err(usage)?;
    let bundle = read_bundle(data_dir).map_err(usage)?;

    if let Some(t) = expected_t {
        if t != bundle.train.dataset.window_len() {
            return Err(numeric(anyhow!(
                "config pins window length {t} but the data has {}",
                bundle.train.dataset.window_len()
            )));
        }
    }

    let trained = train_model(&bundle.train.dataset, &config, skip_dd).map_err(numeric)?;

    if let Some(path) = log_path {
        let mut file = std::fs::File::create(path).map_err(usage)?;
        for record in &trained.dd_log {
            let line = serde_json::to_string(record).map_err(numeric)?;
            writeln!(file, "{line}").map_err(usage)?;
        }
    }

    trained.model.save(out_model).map_err(numeric)?;
    println!(
        "trained {} appliances on {} columns (T={}), model written to {}",
        trained.model.num_appliances(),
        bundle.train.dataset.num_columns(),
        trained.model.window_len(),
        out_model.display()
    );
    Ok(())
}
