//! Deterministic synthetic household generator and a brute-force solver
//! oracle for desk-scale verification.
//!
//! The generator emits five appliance categories with structurally distinct
//! signatures (duty cycles, sparse spikes, seasonally gated blocks, a noise
//! floor). It targets separability structure, not statistical realism.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{split_houses, DataBundle, SplitData};
use crate::error::{DdscError, Result};
use crate::rng::{stream_rng, STREAM_SYNTH_HOUSE};
use crate::types::{Activations, ApplianceDataset, PenaltyMode, UsageMatrix};

/// Hours per weekly window.
pub const HOURS_PER_WEEK: usize = 168;

/// Canonical category order used by generated datasets and reports.
pub const CATEGORY_LABELS: [&str; 5] = ["air", "furnace", "dishwasher", "refrigerator", "other"];

/// Periodic duty-cycle appliance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FridgeProfile {
    /// Full on/off cycle length in hours.
    pub period_hours: usize,
    /// kWh drawn during an on-hour.
    pub amplitude_kwh: f64,
    /// Relative amplitude jitter in [0, 1].
    pub jitter: f64,
}

/// Sparse random spikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DishwasherProfile {
    pub min_spikes_per_day: usize,
    pub max_spikes_per_day: usize,
    pub spike_kwh: f64,
}

/// Diurnally gated blocks with a seasonal scale. Air runs when the diurnal
/// level is above its threshold (afternoons), furnace when below its own
/// (nights and mornings); the two seasonal scales swing in opposition with a
/// floor keeping every house-week's usage away from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBlockProfile {
    pub peak_kwh: f64,
    /// Diurnal sine level the gate compares against.
    pub gate_threshold: f64,
    pub season_period_weeks: f64,
    /// Lower bound on the seasonal scale, in [0, 1].
    pub season_floor: f64,
}

/// Smoothed noise floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloorProfile {
    pub floor_kwh: f64,
    pub noise_kwh: f64,
    pub smooth_window: usize,
}

/// Declarative generator spec; serialized as JSON so tests and the CLI can
/// pin exact scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub houses: usize,
    pub weeks: usize,
    pub split_ratio: f64,
    pub interval_seconds: u32,
    pub refrigerator: FridgeProfile,
    pub dishwasher: DishwasherProfile,
    pub air: SeasonalBlockProfile,
    pub furnace: SeasonalBlockProfile,
    pub other: NoiseFloorProfile,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            houses: 10,
            weeks: 2,
            split_ratio: 0.7,
            interval_seconds: 3600,
            refrigerator: FridgeProfile {
                period_hours: 2,
                amplitude_kwh: 0.12,
                jitter: 0.15,
            },
            dishwasher: DishwasherProfile {
                min_spikes_per_day: 1,
                max_spikes_per_day: 2,
                spike_kwh: 1.2,
            },
            air: SeasonalBlockProfile {
                peak_kwh: 1.6,
                gate_threshold: 0.2,
                season_period_weeks: 26.0,
                season_floor: 0.25,
            },
            furnace: SeasonalBlockProfile {
                peak_kwh: 1.1,
                gate_threshold: 0.2,
                season_period_weeks: 26.0,
                season_floor: 0.25,
            },
            other: NoiseFloorProfile {
                floor_kwh: 0.2,
                noise_kwh: 0.3,
                smooth_window: 5,
            },
        }
    }
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<()> {
        if self.houses < 2 {
            return Err(DdscError::InvalidSpec(format!(
                "need at least 2 houses, got {}",
                self.houses
            )));
        }
        if self.weeks == 0 {
            return Err(DdscError::InvalidSpec("weeks must be positive".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(DdscError::InvalidSpec(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.interval_seconds == 0 {
            return Err(DdscError::InvalidSpec("interval_seconds must be positive".into()));
        }
        if self.refrigerator.period_hours == 0 {
            return Err(DdscError::InvalidSpec("refrigerator period must be positive".into()));
        }
        if self.dishwasher.min_spikes_per_day > self.dishwasher.max_spikes_per_day
            || self.dishwasher.max_spikes_per_day > 24
        {
            return Err(DdscError::InvalidSpec(
                "dishwasher spike counts must satisfy min <= max <= 24".into(),
            ));
        }
        if self.other.smooth_window == 0 {
            return Err(DdscError::InvalidSpec("smooth window must be positive".into()));
        }
        let amplitudes = [
            self.refrigerator.amplitude_kwh,
            self.refrigerator.jitter,
            self.dishwasher.spike_kwh,
            self.air.peak_kwh,
            self.furnace.peak_kwh,
            self.other.floor_kwh,
            self.other.noise_kwh,
        ];
        if amplitudes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DdscError::InvalidSpec(
                "all amplitudes must be finite and non-negative".into(),
            ));
        }
        if self.refrigerator.jitter > 1.0 {
            return Err(DdscError::InvalidSpec("jitter must be at most 1".into()));
        }
        for (name, p) in [("air", &self.air), ("furnace", &self.furnace)] {
            if !p.gate_threshold.is_finite()
                || !p.season_period_weeks.is_finite()
                || p.season_period_weeks <= 0.0
                || !(0.0..=1.0).contains(&p.season_floor)
            {
                return Err(DdscError::InvalidSpec(format!(
                    "{name} profile has invalid gate or season settings"
                )));
            }
        }
        Ok(())
    }
}

/// Synthetic house ids, in column-group order.
pub fn house_ids(houses: usize) -> Vec<String> {
    (0..houses).map(|h| format!("h{h:03}")).collect()
}

fn diurnal_level(hour_in_week: usize) -> f64 {
    let hour_of_day = (hour_in_week % 24) as f64;
    ((hour_of_day - 9.0) * 2.0 * PI / 24.0).sin()
}

struct HouseSignals {
    // label order follows CATEGORY_LABELS
    categories: Vec<Vec<f64>>,
}

fn generate_house(spec: &ProfileSpec, weeks: usize, rng: &mut ChaCha8Rng) -> HouseSignals {
    let hours = weeks * HOURS_PER_WEEK;
    let season_phase: f64 = rng.gen::<f64>() * spec.air.season_period_weeks;
    let fridge_phase: usize = rng.gen_range(0..spec.refrigerator.period_hours);
    let air_scale = 0.8 + 0.4 * rng.gen::<f64>();
    let furnace_scale = 0.8 + 0.4 * rng.gen::<f64>();

    let mut air = vec![0.0; hours];
    let mut furnace = vec![0.0; hours];
    let mut dishwasher = vec![0.0; hours];
    let mut refrigerator = vec![0.0; hours];
    let mut other = vec![0.0; hours];

    let fridge = &spec.refrigerator;
    let on_hours = fridge.period_hours.div_ceil(2);
    for (t, value) in refrigerator.iter_mut().enumerate() {
        if (t + fridge_phase) % fridge.period_hours < on_hours {
            let jitter = fridge.jitter * (2.0 * rng.gen::<f64>() - 1.0);
            *value = (fridge.amplitude_kwh * (1.0 + jitter)).max(0.0);
        }
    }

    for day in 0..hours / 24 {
        let spikes = rng.gen_range(
            spec.dishwasher.min_spikes_per_day..=spec.dishwasher.max_spikes_per_day,
        );
        for _ in 0..spikes {
            let hour = rng.gen_range(0..24);
            dishwasher[day * 24 + hour] += spec.dishwasher.spike_kwh * (0.8 + 0.4 * rng.gen::<f64>());
        }
    }

    // opposing seasonal scales with a floor, on complementary diurnal gates:
    // air fills afternoons, furnace nights and mornings, and shoulder weeks
    // carry both at similar levels
    for t in 0..hours {
        let week = (t / HOURS_PER_WEEK) as f64;
        let season =
            0.5 * (1.0 + ((week + season_phase) * 2.0 * PI / spec.air.season_period_weeks).sin());
        let air_season = spec.air.season_floor + (1.0 - spec.air.season_floor) * season;
        let furnace_season =
            spec.furnace.season_floor + (1.0 - spec.furnace.season_floor) * (1.0 - season);
        let level = diurnal_level(t);
        if level > spec.air.gate_threshold {
            air[t] = spec.air.peak_kwh * air_scale * air_season * (0.7 + 0.3 * rng.gen::<f64>());
        }
        if level < spec.furnace.gate_threshold {
            furnace[t] = spec.furnace.peak_kwh
                * furnace_scale
                * furnace_season
                * (0.7 + 0.3 * rng.gen::<f64>());
        }
    }

    let raw: Vec<f64> = (0..hours).map(|_| rng.gen::<f64>()).collect();
    let window = spec.other.smooth_window;
    for (t, value) in other.iter_mut().enumerate() {
        let lo = t.saturating_sub(window - 1);
        let mean = raw[lo..=t].iter().sum::<f64>() / (t - lo + 1) as f64;
        *value = spec.other.floor_kwh + spec.other.noise_kwh * mean;
    }

    HouseSignals {
        categories: vec![air, furnace, dishwasher, refrigerator, other],
    }
}

/// Generates a labeled dataset of `houses * weeks` weekly columns, grouped
/// by house in id order with weeks in chronological order. Deterministic per
/// seed: every house draws from its own stream.
pub fn generate(spec: &ProfileSpec, houses: usize, weeks: usize, seed: u64) -> Result<ApplianceDataset> {
    spec.validate()?;
    if houses < 2 {
        return Err(DdscError::InvalidSpec(format!(
            "need at least 2 houses, got {houses}"
        )));
    }
    if weeks == 0 {
        return Err(DdscError::InvalidSpec("weeks must be positive".into()));
    }
    let columns = houses * weeks;
    let mut matrices: Vec<Array2<f64>> = (0..CATEGORY_LABELS.len())
        .map(|_| Array2::zeros((HOURS_PER_WEEK, columns)))
        .collect();

    for house in 0..houses {
        let mut rng = stream_rng(seed, STREAM_SYNTH_HOUSE + house as u64);
        let signals = generate_house(spec, weeks, &mut rng);
        for (k, series) in signals.categories.iter().enumerate() {
            for week in 0..weeks {
                let col = house * weeks + week;
                for t in 0..HOURS_PER_WEEK {
                    matrices[k][[t, col]] = series[week * HOURS_PER_WEEK + t];
                }
            }
        }
    }

    let components = matrices
        .into_iter()
        .map(|m| UsageMatrix::new(m, spec.interval_seconds, None))
        .collect::<Result<Vec<_>>>()?;
    ApplianceDataset::new(
        CATEGORY_LABELS.iter().map(|s| s.to_string()).collect(),
        components,
        None,
    )
}

/// Generates a dataset and partitions it into a train/test bundle by house.
/// Columns stay grouped by house, so the house split never cuts a week loose
/// from its house.
pub fn bundle_from_spec(spec: &ProfileSpec, seed: u64) -> Result<DataBundle> {
    let dataset = generate(spec, spec.houses, spec.weeks, seed)?;
    let ids = house_ids(spec.houses);
    let (train_ids, test_ids) = split_houses(&ids, spec.split_ratio, seed)?;

    let split = |split_ids: &[String]| -> Result<SplitData> {
        let mut columns = Vec::new();
        let mut house_of_column = Vec::new();
        for id in split_ids {
            let house = ids.iter().position(|h| h == id).expect("generated id");
            for week in 0..spec.weeks {
                columns.push(house * spec.weeks + week);
                house_of_column.push(id.clone());
            }
        }
        Ok(SplitData {
            dataset: dataset.select_columns(&columns)?,
            house_ids: split_ids.to_vec(),
            house_of_column,
        })
    };

    Ok(DataBundle {
        labels: dataset.labels().to_vec(),
        interval_seconds: spec.interval_seconds,
        train: split(&train_ids)?,
        test: split(&test_ids)?,
    })
}

/// Size guardrails for the brute-force oracle.
const ORACLE_MAX_ROWS: usize = 8;
const ORACLE_MAX_COLS: usize = 8;
const ORACLE_MAX_BASES: usize = 12;
const ORACLE_ITERS: usize = 100_000;

/// Reference activation solve by projected gradient descent with a
/// diminishing step, on the same objective as the production solver but
/// sharing none of its code: plain nested loops over `Vec<f64>` buffers.
/// Intentionally slow and simple; capped to desk-scale instances.
pub fn oracle_solve(
    x: &Array2<f64>,
    b: &Array2<f64>,
    lambda: f64,
    mode: PenaltyMode,
) -> Result<Activations> {
    let (t, m) = x.dim();
    let n = b.ncols();
    if t > ORACLE_MAX_ROWS || m > ORACLE_MAX_COLS || n > ORACLE_MAX_BASES {
        return Err(DdscError::DimensionTooLarge(format!(
            "got {t}x{m} signal with {n} bases, cap is {ORACLE_MAX_ROWS}x{ORACLE_MAX_COLS} \
             with {ORACLE_MAX_BASES} bases"
        )));
    }
    if b.nrows() != t {
        return Err(DdscError::DimensionMismatch(format!(
            "signal has {t} rows but the dictionary has {}",
            b.nrows()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(DdscError::InvalidConfig(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }

    let bm: Vec<Vec<f64>> = (0..t).map(|i| (0..n).map(|j| b[[i, j]]).collect()).collect();

    // Lipschitz bound via the max absolute row sum of B^T B.
    let mut gram = vec![vec![0.0; n]; n];
    for (p, row) in gram.iter_mut().enumerate() {
        for (q, cell) in row.iter_mut().enumerate() {
            let mut dot = 0.0;
            for bi in &bm {
                dot += bi[p] * bi[q];
            }
            *cell = dot;
        }
    }
    let mut lipschitz = 0.0f64;
    for row in &gram {
        lipschitz = lipschitz.max(row.iter().map(|v| v.abs()).sum());
    }
    if let PenaltyMode::SquaredFrobenius = mode {
        lipschitz += 2.0 * lambda;
    }
    if lipschitz <= 0.0 {
        // all-zero dictionary: only the penalty acts, zero is optimal
        return Activations::new(Array2::zeros((n, m)));
    }

    let mut out = Array2::<f64>::zeros((n, m));
    for col in 0..m {
        let xc: Vec<f64> = (0..t).map(|i| x[[i, col]]).collect();
        let mut a = vec![0.0; n];
        let mut recon = vec![0.0; t];
        for step in 0..ORACLE_ITERS {
            for (i, r) in recon.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, &aj) in a.iter().enumerate() {
                    acc += bm[i][j] * aj;
                }
                *r = acc;
            }
            let eta = 1.0 / (lipschitz * (1.0 + step as f64 / 20_000.0));
            for (j, aj) in a.iter_mut().enumerate() {
                let mut grad = 0.0;
                for i in 0..t {
                    grad += bm[i][j] * (recon[i] - xc[i]);
                }
                grad += match mode {
                    PenaltyMode::L1 => lambda,
                    PenaltyMode::SquaredFrobenius => 2.0 * lambda * *aj,
                };
                *aj = (*aj - eta * grad).max(0.0);
            }
        }
        for (j, &aj) in a.iter().enumerate() {
            out[[j, col]] = aj;
        }
    }
    Activations::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{objective, solve_activations};
    use crate::types::Dictionary;
    use ndarray::array;

    #[test]
    fn generation_is_deterministic() {
        let spec = ProfileSpec::default();
        let a = generate(&spec, 4, 2, 99).unwrap();
        let b = generate(&spec, 4, 2, 99).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, 4, 2, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn aggregate_is_exact_component_sum() {
        let ds = generate(&ProfileSpec::default(), 3, 1, 5).unwrap();
        let mut sum = Array2::<f64>::zeros(ds.aggregate().values().dim());
        for c in ds.components() {
            sum += c.values();
        }
        assert_eq!(&sum, ds.aggregate().values());
    }

    #[test]
    fn refrigerator_peaks_at_its_duty_period() {
        let ds = generate(&ProfileSpec::default(), 3, 2, 11).unwrap();
        let idx = CATEGORY_LABELS.iter().position(|l| *l == "refrigerator").unwrap();
        let col = ds.component(idx).values().column(0).to_vec();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let autocorr = |lag: usize| -> f64 {
            (0..col.len() - lag)
                .map(|t| (col[t] - mean) * (col[t + lag] - mean))
                .sum::<f64>()
                / (col.len() - lag) as f64
        };
        assert!(autocorr(2) > autocorr(1));
        assert!(autocorr(2) > autocorr(3));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let spec = ProfileSpec { houses: 1, ..ProfileSpec::default() };
        assert!(matches!(spec.validate(), Err(DdscError::InvalidSpec(_))));
        let mut spec = ProfileSpec::default();
        spec.dishwasher.min_spikes_per_day = 3;
        spec.dishwasher.max_spikes_per_day = 2;
        assert!(spec.validate().is_err());
        assert!(matches!(
            generate(&ProfileSpec::default(), 1, 1, 0),
            Err(DdscError::InvalidSpec(_))
        ));
    }

    #[test]
    fn oracle_matches_clamped_least_squares_on_identity() {
        let b = array![[1.0, 0.0], [0.0, 1.0]];
        let x = array![[2.0], [0.5]];
        let a = oracle_solve(&x, &b, 0.0, PenaltyMode::L1).unwrap();
        assert!((a.values()[[0, 0]] - 2.0).abs() <= 1e-9);
        assert!((a.values()[[1, 0]] - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn oracle_and_solver_agree_with_huge_lambda() {
        let b = array![[0.6, 0.3], [0.8, 0.4]];
        let x = array![[1.0], [1.0]];
        let a = oracle_solve(&x, &b, 100.0, PenaltyMode::L1).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
        let dict = Dictionary::new(b.clone()).unwrap();
        let (s, _) = solve_activations(&x, &dict, 100.0, PenaltyMode::L1, 100, 1e-10).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oracle_agrees_with_solver_on_a_seeded_instance() {
        let x = array![
            [0.9, 0.1, 0.7],
            [0.2, 0.8, 0.3],
            [0.5, 0.5, 0.0],
            [0.4, 0.2, 0.9],
            [0.1, 0.6, 0.4]
        ];
        let raw = Array2::from_shape_fn((5, 8), |(i, j)| ((i * 13 + j * 7) % 11) as f64 / 11.0 + 0.05);
        let mut normalized = raw.clone();
        for j in 0..8 {
            let norm = normalized.column(j).dot(&normalized.column(j)).sqrt();
            normalized.column_mut(j).mapv_inplace(|v| v / norm);
        }
        let dict = Dictionary::new(normalized.clone()).unwrap();
        let (cd, _) = solve_activations(&x, &dict, 0.1, PenaltyMode::L1, 5000, 1e-12).unwrap();
        let pg = oracle_solve(&x, &normalized, 0.1, PenaltyMode::L1).unwrap();
        for (a, b) in cd.values().iter().zip(pg.values()) {
            assert!((a - b).abs() <= 1e-6, "entry mismatch {a} vs {b}");
        }
        let obj_cd = objective(&x.view(), &normalized.view(), &cd.values().view(), 0.1, PenaltyMode::L1);
        let obj_pg = objective(&x.view(), &normalized.view(), &pg.values().view(), 0.1, PenaltyMode::L1);
        assert!((obj_cd - obj_pg).abs() <= 1e-8);
        assert!(obj_pg >= obj_cd - 1e-8);
    }

    #[test]
    fn oracle_guardrail_rejects_large_instances() {
        let x = Array2::zeros((9, 2));
        let b = Array2::zeros((9, 4));
        assert!(matches!(
            oracle_solve(&x, &b, 0.0, PenaltyMode::L1),
            Err(DdscError::DimensionTooLarge(_))
        ));
    }
}
