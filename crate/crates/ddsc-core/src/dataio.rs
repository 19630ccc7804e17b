//! Raw meter ingestion, hourly resampling, weekly windowing, house-level
//! train/test splitting and the on-disk dataset bundle.
//!
//! Raw input layout: one long-format CSV per house named `<house_id>.csv`
//! with header `timestamp,channel,value` (ISO-8601 UTC timestamps), plus a
//! `meta.json` sidecar per house declaring the reading unit:
//!
//! ```json
//! { "house_id": "h001", "unit": "kW" }
//! ```
//!
//! Bundle layout (version "ddsc-data/1"): `index.json` plus one headerless
//! numeric CSV per matrix under `train/` and `test/`, rows = time steps,
//! columns = house-weeks.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, TimeZone, Timelike, Utc, Weekday};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};
use crate::rng::{stream_rng, STREAM_HOUSE_SPLIT};
use crate::types::{ApplianceDataset, UsageMatrix};

/// Version tag written into every bundle index.
pub const DATA_FORMAT_VERSION: &str = "ddsc-data/1";

/// Fraction of an interval that must be covered by readings for the interval
/// to count; anything below is marked missing.
pub const COVERAGE_THRESHOLD: f64 = 0.9;

/// Declared unit of raw readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "kW")]
    Kw,
    #[serde(rename = "kWh")]
    Kwh,
}

/// Raw readings of one house: aligned channels over strictly increasing
/// timestamps, all sharing one declared unit.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReadingsTable {
    pub house_id: String,
    pub timestamps: Vec<i64>,
    pub channels: Vec<(String, Vec<f64>)>,
    pub unit: EnergyUnit,
}

impl RawReadingsTable {
    pub fn new(
        house_id: String,
        timestamps: Vec<i64>,
        channels: Vec<(String, Vec<f64>)>,
        unit: EnergyUnit,
    ) -> Result<Self> {
        if timestamps.is_empty() || channels.is_empty() {
            return Err(DdscError::EmptyInput(format!(
                "house {house_id} has no readings"
            )));
        }
        for (i, pair) in timestamps.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(DdscError::TimestampsNotIncreasing(i + 1));
            }
        }
        for (name, values) in &channels {
            if values.len() != timestamps.len() {
                return Err(DdscError::BadFormat(format!(
                    "channel {name} of house {house_id} has {} values for {} timestamps",
                    values.len(),
                    timestamps.len()
                )));
            }
            for (i, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DdscError::NonFiniteInput { row: i, col: 0 });
                }
                if v < 0.0 {
                    return Err(DdscError::NegativeEntry {
                        row: i,
                        col: 0,
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            house_id,
            timestamps,
            channels,
            unit,
        })
    }
}

/// Routes raw channel names into ordered category labels, an ignore set and
/// an optional whole-home aggregate channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub labels: Vec<String>,
    pub categories: BTreeMap<String, String>,
    pub ignore: Vec<String>,
    pub aggregate_channel: Option<String>,
}

impl CategoryMap {
    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(DdscError::InvalidConfig("category map has no labels".into()));
        }
        for (channel, label) in &self.categories {
            if !self.labels.contains(label) {
                return Err(DdscError::InvalidConfig(format!(
                    "channel {channel} maps to unknown label {label}"
                )));
            }
            if self.ignore.contains(channel) {
                return Err(DdscError::InvalidConfig(format!(
                    "channel {channel} is both mapped and ignored"
                )));
            }
        }
        if let Some(agg) = &self.aggregate_channel {
            if self.categories.contains_key(agg) || self.ignore.contains(agg) {
                return Err(DdscError::InvalidConfig(format!(
                    "aggregate channel {agg} must not be mapped or ignored"
                )));
            }
        }
        Ok(())
    }
}

/// One house resampled to a fixed interval grid; `None` marks intervals with
/// insufficient coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledHouse {
    pub house_id: String,
    pub start_epoch: i64,
    pub interval_seconds: u32,
    pub channels: Vec<(String, Vec<Option<f64>>)>,
}

/// Resamples raw readings to kWh per interval. kW readings contribute
/// `value * duration / 3600`, kWh readings contribute directly; a reading's
/// duration is the gap to the next reading capped at the file's nominal
/// cadence (the median gap), so data holes reduce coverage instead of being
/// carried forward.
pub fn resample(raw: &RawReadingsTable, interval_seconds: u32) -> Result<ResampledHouse> {
    if interval_seconds == 0 {
        return Err(DdscError::InvalidConfig("interval_seconds must be positive".into()));
    }
    if raw.timestamps.is_empty() || raw.channels.is_empty() {
        return Err(DdscError::EmptyInput(format!(
            "house {} has no readings",
            raw.house_id
        )));
    }
    let ivl = interval_seconds as i64;
    let mut gaps: Vec<i64> = raw.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    let nominal = if gaps.is_empty() {
        ivl
    } else {
        gaps.sort_unstable();
        gaps[gaps.len() / 2]
    };

    let start_epoch = raw.timestamps[0].div_euclid(ivl) * ivl;
    let last_bin = raw.timestamps[raw.timestamps.len() - 1].div_euclid(ivl) * ivl;
    let bins = ((last_bin - start_epoch) / ivl) as usize + 1;

    let durations: Vec<i64> = raw
        .timestamps
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i + 1 < raw.timestamps.len() {
                (raw.timestamps[i + 1] - t).min(nominal)
            } else {
                nominal
            }
        })
        .collect();

    let mut coverage = vec![0.0f64; bins];
    for (i, &t) in raw.timestamps.iter().enumerate() {
        let bin = ((t - start_epoch) / ivl) as usize;
        coverage[bin] += durations[i] as f64;
    }

    let mut channels = Vec::with_capacity(raw.channels.len());
    for (name, values) in &raw.channels {
        let mut sums = vec![0.0f64; bins];
        for (i, &t) in raw.timestamps.iter().enumerate() {
            let bin = ((t - start_epoch) / ivl) as usize;
            let energy = match raw.unit {
                EnergyUnit::Kw => values[i] * durations[i] as f64 / 3600.0,
                EnergyUnit::Kwh => values[i],
            };
            sums[bin] += energy;
        }
        let series: Vec<Option<f64>> = sums
            .into_iter()
            .zip(&coverage)
            .map(|(kwh, &cov)| {
                if cov >= COVERAGE_THRESHOLD * ivl as f64 {
                    Some(kwh)
                } else {
                    None
                }
            })
            .collect();
        channels.push((name.clone(), series));
    }

    Ok(ResampledHouse {
        house_id: raw.house_id.clone(),
        start_epoch,
        interval_seconds,
        channels,
    })
}

/// Shuffles house ids by seed and partitions them by house, never by week:
/// `floor(ratio * H)` houses go to the train side, the rest to test.
pub fn split_houses(ids: &[String], ratio: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    split_houses_with_stream(ids, ratio, seed, STREAM_HOUSE_SPLIT)
}

/// House split drawing from an explicit random stream, so independent
/// splits (train/test vs validation carves) never share draws.
pub fn split_houses_with_stream(
    ids: &[String],
    ratio: f64,
    seed: u64,
    stream: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if ids.len() < 2 {
        return Err(DdscError::InsufficientHouses(ids.len()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DdscError::InvalidConfig(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut shuffled: Vec<String> = {
        let mut sorted = ids.to_vec();
        sorted.sort();
        sorted
    };
    let mut rng = stream_rng(seed, stream);
    // Fisher-Yates
    use rand::Rng;
    for i in (1..shuffled.len()).rev() {
        let j = rng.gen_range(0..=i);
        shuffled.swap(i, j);
    }
    let n_train = (ratio * shuffled.len() as f64).floor() as usize;
    if n_train == 0 || n_train == shuffled.len() {
        return Err(DdscError::InsufficientHouses(shuffled.len()));
    }
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

/// One side of a train/test partition, with per-column house provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub dataset: ApplianceDataset,
    pub house_ids: Vec<String>,
    pub house_of_column: Vec<String>,
}

/// A full dataset bundle as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub labels: Vec<String>,
    pub interval_seconds: u32,
    pub train: SplitData,
    pub test: SplitData,
}

struct HouseWeeks {
    house_id: String,
    // per label, one Vec<f64> of window_len values per complete week
    category_weeks: Vec<Vec<Vec<f64>>>,
    aggregate_weeks: Vec<Vec<f64>>,
}

fn epoch_weekday_hour(epoch: i64) -> Option<(Weekday, u32, u32, u32)> {
    let dt: DateTime<Utc> = Utc.timestamp_opt(epoch, 0).single()?;
    Some((dt.weekday(), dt.hour(), dt.minute(), dt.second()))
}

fn extract_weeks(
    house: &ResampledHouse,
    map: &CategoryMap,
    week_start: Weekday,
    window_len: usize,
) -> Result<HouseWeeks> {
    let k = map.labels.len();
    let bins = house
        .channels
        .first()
        .map(|(_, v)| v.len())
        .ok_or_else(|| DdscError::EmptyInput(format!("house {} has no channels", house.house_id)))?;

    // category series: sum of mapped channels, missing if any contributor is
    let mut categories: Vec<Vec<Option<f64>>> = vec![vec![Some(0.0); bins]; k];
    let mut aggregate_channel: Option<Vec<Option<f64>>> = None;
    for (name, series) in &house.channels {
        if map.ignore.contains(name) {
            continue;
        }
        if map.aggregate_channel.as_deref() == Some(name.as_str()) {
            aggregate_channel = Some(series.clone());
            continue;
        }
        let label = map.categories.get(name).ok_or_else(|| DdscError::UnmappedChannel {
            house: house.house_id.clone(),
            channel: name.clone(),
        })?;
        let idx = map.labels.iter().position(|l| l == label).expect("validated");
        for (slot, v) in categories[idx].iter_mut().zip(series) {
            *slot = match (slot.as_ref(), v) {
                (Some(acc), Some(add)) => Some(acc + add),
                _ => None,
            };
        }
    }
    let aggregate: Vec<Option<f64>> = match aggregate_channel {
        Some(series) => series,
        None => (0..bins)
            .map(|i| {
                categories
                    .iter()
                    .try_fold(0.0, |acc, cat| cat[i].map(|v| acc + v))
            })
            .collect(),
    };

    // first bin on the requested weekday at 00:00 UTC
    let ivl = house.interval_seconds as i64;
    let mut first = None;
    for bin in 0..bins {
        let epoch = house.start_epoch + bin as i64 * ivl;
        if let Some((weekday, hour, minute, second)) = epoch_weekday_hour(epoch) {
            if weekday == week_start && hour == 0 && minute == 0 && second == 0 {
                first = Some(bin);
                break;
            }
        }
    }

    let mut category_weeks: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    let mut aggregate_weeks: Vec<Vec<f64>> = Vec::new();
    if let Some(first) = first {
        let mut start = first;
        while start + window_len <= bins {
            let complete = (start..start + window_len).all(|i| {
                aggregate[i].is_some() && categories.iter().all(|cat| cat[i].is_some())
            });
            if complete {
                for (idx, cat) in categories.iter().enumerate() {
                    category_weeks[idx].push(
                        (start..start + window_len)
                            .map(|i| cat[i].unwrap())
                            .collect(),
                    );
                }
                aggregate_weeks.push(
                    (start..start + window_len)
                        .map(|i| aggregate[i].unwrap())
                        .collect(),
                );
            }
            start += window_len;
        }
    }

    Ok(HouseWeeks {
        house_id: house.house_id.clone(),
        category_weeks,
        aggregate_weeks,
    })
}

fn assemble_split(
    split_ids: &[String],
    weeks_by_house: &BTreeMap<String, HouseWeeks>,
    map: &CategoryMap,
    interval_seconds: u32,
    window_len: usize,
    name: &str,
) -> Result<SplitData> {
    let k = map.labels.len();
    let mut columns: Vec<(&HouseWeeks, usize)> = Vec::new();
    for id in split_ids {
        let hw = &weeks_by_house[id];
        for w in 0..hw.aggregate_weeks.len() {
            columns.push((hw, w));
        }
    }
    if columns.is_empty() {
        return Err(DdscError::NoCompleteWeeks(name.to_string()));
    }
    let m = columns.len();
    let mut component_values: Vec<Array2<f64>> =
        (0..k).map(|_| Array2::zeros((window_len, m))).collect();
    let mut aggregate_values = Array2::<f64>::zeros((window_len, m));
    let mut house_of_column = Vec::with_capacity(m);
    for (col, (hw, w)) in columns.iter().enumerate() {
        house_of_column.push(hw.house_id.clone());
        for (idx, matrix) in component_values.iter_mut().enumerate() {
            for (t, &v) in hw.category_weeks[idx][*w].iter().enumerate() {
                matrix[[t, col]] = v;
            }
        }
        for (t, &v) in hw.aggregate_weeks[*w].iter().enumerate() {
            aggregate_values[[t, col]] = v;
        }
    }
    let components = component_values
        .into_iter()
        .map(|v| UsageMatrix::new(v, interval_seconds, None))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = UsageMatrix::new(aggregate_values, interval_seconds, None)?;
    let dataset = ApplianceDataset::new(map.labels.clone(), components, Some(aggregate))?;
    Ok(SplitData {
        dataset,
        house_ids: split_ids.to_vec(),
        house_of_column,
    })
}

/// Resamples each house, maps channels to categories, cuts complete weekly
/// windows aligned to `week_start` 00:00 UTC and splits by house.
pub fn build_dataset(
    houses: &[RawReadingsTable],
    map: &CategoryMap,
    week_start: Weekday,
    split_ratio: f64,
    seed: u64,
) -> Result<DataBundle> {
    map.validate()?;
    if houses.len() < 2 {
        return Err(DdscError::InsufficientHouses(houses.len()));
    }
    let interval_seconds = 3600u32;
    let window_len = 7 * 24 * 3600 / interval_seconds as usize;

    let mut weeks_by_house = BTreeMap::new();
    for raw in houses {
        let resampled = resample(raw, interval_seconds)?;
        let weeks = extract_weeks(&resampled, map, week_start, window_len)?;
        weeks_by_house.insert(raw.house_id.clone(), weeks);
    }

    let ids: Vec<String> = houses.iter().map(|h| h.house_id.clone()).collect();
    let (train_ids, test_ids) = split_houses(&ids, split_ratio, seed)?;

    let train = assemble_split(&train_ids, &weeks_by_house, map, interval_seconds, window_len, "train")?;
    let test = assemble_split(&test_ids, &weeks_by_house, map, interval_seconds, window_len, "test")?;
    Ok(DataBundle {
        labels: map.labels.clone(),
        interval_seconds,
        train,
        test,
    })
}

#[derive(Serialize, Deserialize)]
struct HouseMeta {
    house_id: String,
    unit: EnergyUnit,
}

/// Reads `<house_id>.csv` plus its `meta.json` sidecar from a directory.
pub fn read_house(dir: &Path, house_id: &str) -> Result<RawReadingsTable> {
    let meta_path = dir.join(format!("{house_id}.meta.json"));
    let meta_text = fs::read_to_string(&meta_path)
        .map_err(|_| DdscError::UnitUndeclared(house_id.to_string()))?;
    let meta: HouseMeta = serde_json::from_str(&meta_text)
        .map_err(|_| DdscError::UnitUndeclared(house_id.to_string()))?;

    let csv_path = dir.join(format!("{house_id}.csv"));
    let mut reader = csv::Reader::from_path(&csv_path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "channel", "value"] {
        return Err(DdscError::BadFormat(format!(
            "{} must start with header timestamp,channel,value",
            csv_path.display()
        )));
    }

    let mut per_channel: BTreeMap<String, BTreeMap<i64, f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let ts_text = record.get(0).unwrap_or_default();
        let epoch = DateTime::parse_from_rfc3339(ts_text)
            .map_err(|e| DdscError::BadFormat(format!("bad timestamp {ts_text:?}: {e}")))?
            .timestamp();
        let channel = record.get(1).unwrap_or_default().to_string();
        let value: f64 = record
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|e| DdscError::BadFormat(format!("bad value in {channel}: {e}")))?;
        per_channel.entry(channel).or_default().insert(epoch, value);
    }
    if per_channel.is_empty() {
        return Err(DdscError::EmptyInput(format!("{} has no rows", csv_path.display())));
    }

    let timestamps: Vec<i64> = per_channel
        .values()
        .next()
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default();
    let mut channels = Vec::with_capacity(per_channel.len());
    for (name, readings) in &per_channel {
        if readings.len() != timestamps.len()
            || !readings.keys().copied().eq(timestamps.iter().copied())
        {
            return Err(DdscError::BadFormat(format!(
                "channel {name} of house {house_id} does not cover every timestamp"
            )));
        }
        channels.push((name.clone(), readings.values().copied().collect()));
    }
    RawReadingsTable::new(meta.house_id, timestamps, channels, meta.unit)
}

/// Writes a headerless numeric matrix CSV; values use the shortest
/// round-trip decimal form, so reading the file back is bit-exact.
pub fn write_matrix_csv(path: &Path, values: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in values.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a headerless numeric matrix CSV as written by the bundle writer.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.parse::<f64>().map_err(|e| {
                    DdscError::BadFormat(format!("{}:{}: {e}", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    crate::types::rows_to_matrix(rows)
}

#[derive(Serialize, Deserialize)]
struct SplitMeta {
    house_ids: Vec<String>,
    house_of_column: Vec<String>,
    columns: usize,
}

#[derive(Serialize, Deserialize)]
struct BundleIndex {
    version: String,
    labels: Vec<String>,
    window_len: usize,
    interval_seconds: u32,
    train: SplitMeta,
    test: SplitMeta,
}

/// Writes a bundle: `index.json` plus per-matrix CSVs under `train/` and
/// `test/`.
pub fn write_bundle(dir: &Path, bundle: &DataBundle) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, split) in [("train", &bundle.train), ("test", &bundle.test)] {
        let split_dir = dir.join(name);
        fs::create_dir_all(&split_dir)?;
        write_matrix_csv(&split_dir.join("aggregate.csv"), split.dataset.aggregate().values())?;
        for (label, component) in bundle.labels.iter().zip(split.dataset.components()) {
            write_matrix_csv(&split_dir.join(format!("{label}.csv")), component.values())?;
        }
    }
    let index = BundleIndex {
        version: DATA_FORMAT_VERSION.to_string(),
        labels: bundle.labels.clone(),
        window_len: bundle.train.dataset.window_len(),
        interval_seconds: bundle.interval_seconds,
        train: SplitMeta {
            house_ids: bundle.train.house_ids.clone(),
            house_of_column: bundle.train.house_of_column.clone(),
            columns: bundle.train.dataset.num_columns(),
        },
        test: SplitMeta {
            house_ids: bundle.test.house_ids.clone(),
            house_of_column: bundle.test.house_of_column.clone(),
            columns: bundle.test.dataset.num_columns(),
        },
    };
    fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(())
}

fn read_split(
    dir: &Path,
    name: &str,
    labels: &[String],
    interval_seconds: u32,
    window_len: usize,
    meta: SplitMeta,
) -> Result<SplitData> {
    let split_dir = dir.join(name);
    let aggregate = UsageMatrix::new(
        read_matrix_csv(&split_dir.join("aggregate.csv"))?,
        interval_seconds,
        None,
    )?;
    let mut components = Vec::with_capacity(labels.len());
    for label in labels {
        let values = read_matrix_csv(&split_dir.join(format!("{label}.csv")))?;
        components.push(UsageMatrix::new(values, interval_seconds, None)?);
    }
    let dataset = ApplianceDataset::new(labels.to_vec(), components, Some(aggregate))?;
    if dataset.window_len() != window_len || dataset.num_columns() != meta.columns {
        return Err(DdscError::BadFormat(format!(
            "{name} split is {}x{}, index declares {}x{}",
            dataset.window_len(),
            dataset.num_columns(),
            window_len,
            meta.columns
        )));
    }
    if meta.house_of_column.len() != meta.columns {
        return Err(DdscError::BadFormat(format!(
            "{name} split declares {} columns but {} per-column house ids",
            meta.columns,
            meta.house_of_column.len()
        )));
    }
    Ok(SplitData {
        dataset,
        house_ids: meta.house_ids,
        house_of_column: meta.house_of_column,
    })
}

/// Loads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<DataBundle> {
    let index_text = fs::read_to_string(dir.join("index.json"))?;
    let index: BundleIndex = serde_json::from_str(&index_text)?;
    if index.version != DATA_FORMAT_VERSION {
        return Err(DdscError::BadFormat(format!(
            "unsupported bundle version {:?}, expected {DATA_FORMAT_VERSION:?}",
            index.version
        )));
    }
    let train = read_split(
        dir,
        "train",
        &index.labels,
        index.interval_seconds,
        index.window_len,
        index.train,
    )?;
    let test = read_split(
        dir,
        "test",
        &index.labels,
        index.interval_seconds,
        index.window_len,
        index.test,
    )?;
    Ok(DataBundle {
        labels: index.labels,
        interval_seconds: index.interval_seconds,
        train,
        test,
    })
}
