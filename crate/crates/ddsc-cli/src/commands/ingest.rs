//! `ddsc ingest`: build a dataset bundle from raw meter CSVs.

use std::path::Path;

use anyhow::{anyhow, Context};
use chrono::Weekday;
use ddsc_core::dataio::{build_dataset, read_house, write_bundle, CategoryMap, RawReadingsTable};

use super::{numeric, usage, CliError};

fn parse_weekday(text: &str) -> Result<Weekday, CliError> {
    text.parse::<Weekday>()
        .map_err(|_| usage(anyhow!("unknown weekday {text:?}")))
}

pub fn run(
    raw_dir: &Path,
    map_path: &Path,
    out: &Path,
    week_start: &str,
    ratio: f64,
    seed: u64,
) -> Result<(), CliError> {
    let week_start = parse_weekday(week_start)?;
    let map_text = std::fs::read_to_string(map_path)
        .with_context(|| format!("reading {}", map_path.display()))
        .map_err(usage)?;
    let map: CategoryMap = serde_json::from_str(&map_text).map_err(usage)?;
    map.validate().map_err(usage)?;

    let mut house_ids = Vec::new();
    for entry in std::fs::read_dir(raw_dir).map_err(usage)? {
        let entry = entry.map_err(usage)?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(id) = name.strip_suffix(".csv") {
            house_ids.push(id.to_string());
        }
    }
    house_ids.sort();
    if house_ids.is_empty() {
        return Err(usage(anyhow!("no house CSVs under {}", raw_dir.display())));
    }

    let houses: Vec<RawReadingsTable> = house_ids
        .iter()
        .map(|id| read_house(raw_dir, id))
        .collect::<ddsc_core::Result<_>>()
        .map_err(usage)?;
    let bundle = build_dataset(&houses, &map, week_start, ratio, seed).map_err(numeric)?;
    write_bundle(out, &bundle).map_err(numeric)?;
    println!(
        "ingested {} houses into {}: {} train and {} test columns",
        houses.len(),
        out.display(),
        bundle.train.dataset.num_columns(),
        bundle.test.dataset.num_columns()
    );
    Ok(())
}
