//! Trained disaggregation model and its on-disk JSON format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};
use crate::types::{matrix_to_rows, rows_to_matrix, Dictionary, TrainConfig};

/// Version tag written into every model file.
pub const MODEL_FORMAT_VERSION: &str = "ddsc-model/1";

/// A trained model: per-appliance reconstruction bases plus the
/// discriminatively refined bases used to infer activations from an
/// aggregate signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DisaggModel {
    labels: Vec<String>,
    recon_bases: Vec<Dictionary>,
    disc_bases: Vec<Dictionary>,
    config: TrainConfig,
    window_len: usize,
}

impl DisaggModel {
    pub fn new(
        labels: Vec<String>,
        recon_bases: Vec<Dictionary>,
        disc_bases: Vec<Dictionary>,
        config: TrainConfig,
        window_len: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(DdscError::ShapeMismatch("model needs at least one appliance".into()));
        }
        if recon_bases.len() != labels.len() || disc_bases.len() != labels.len() {
            return Err(DdscError::ShapeMismatch(format!(
                "{} labels, {} reconstruction and {} discriminative bases",
                labels.len(),
                recon_bases.len(),
                disc_bases.len()
            )));
        }
        for (k, (r, d)) in recon_bases.iter().zip(&disc_bases).enumerate() {
            if r.window_len() != window_len || d.window_len() != window_len {
                return Err(DdscError::ShapeMismatch(format!(
                    "bases for appliance {k} have {} and {} rows, expected {window_len}",
                    r.window_len(),
                    d.window_len()
                )));
            }
            if r.num_bases() != d.num_bases() {
                return Err(DdscError::ShapeMismatch(format!(
                    "appliance {k} has {} reconstruction but {} discriminative bases",
                    r.num_bases(),
                    d.num_bases()
                )));
            }
        }
        config.validate()?;
        Ok(Self {
            labels,
            recon_bases,
            disc_bases,
            config,
            window_len,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn recon_bases(&self) -> &[Dictionary] {
        &self.recon_bases
    }

    pub fn disc_bases(&self) -> &[Dictionary] {
        &self.disc_bases
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn num_appliances(&self) -> usize {
        self.labels.len()
    }

    /// Basis count per appliance, in label order.
    pub fn n_bases(&self) -> Vec<usize> {
        self.recon_bases.iter().map(|b| b.num_bases()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION.to_string(),
            labels: self.labels.clone(),
            t: self.window_len,
            n_bases: self.n_bases(),
            config: self.config.clone(),
            recon_bases: self.recon_bases.iter().map(|b| matrix_to_rows(b.values())).collect(),
            disc_bases: self.disc_bases.iter().map(|b| matrix_to_rows(b.values())).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(DdscError::BadFormat(format!(
                "unsupported model version {:?}, expected {MODEL_FORMAT_VERSION:?}",
                file.version
            )));
        }
        let parse_bases = |nested: Vec<Vec<Vec<f64>>>| -> Result<Vec<Dictionary>> {
            nested
                .into_iter()
                .map(|rows| Dictionary::new(rows_to_matrix(rows)?))
                .collect()
        };
        let recon = parse_bases(file.recon_bases)?;
        let disc = parse_bases(file.disc_bases)?;
        let model = Self::new(file.labels, recon, disc, file.config, file.t)?;
        if model.n_bases() != file.n_bases {
            return Err(DdscError::BadFormat(
                "n_bases field disagrees with stored matrices".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    labels: Vec<String>,
    t: usize,
    n_bases: Vec<usize>,
    config: TrainConfig,
    recon_bases: Vec<Vec<Vec<f64>>>,
    disc_bases: Vec<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_model() -> DisaggModel {
        let b1 = Dictionary::new(array![[0.6, 0.0], [0.8, 1.0]]).unwrap();
        let b2 = Dictionary::new(array![[1.0, 0.5], [0.0, 0.5]]).unwrap();
        DisaggModel::new(
            vec!["air".into(), "other".into()],
            vec![b1.clone(), b2.clone()],
            vec![b1, b2],
            TrainConfig::default(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let model = tiny_model();
        let text = model.to_json().unwrap();
        let back = DisaggModel::from_json(&text).unwrap();
        assert_eq!(model, back);
        // serializing again reproduces the same bytes
        assert_eq!(text, back.to_json().unwrap());
    }

    #[test]
    fn rejects_wrong_version() {
        let text = tiny_model().to_json().unwrap().replace("ddsc-model/1", "ddsc-model/9");
        assert!(matches!(
            DisaggModel::from_json(&text),
            Err(DdscError::BadFormat(_))
        ));
    }

    #[test]
    fn rejects_mismatched_base_counts() {
        let b1 = Dictionary::new(array![[0.6], [0.8]]).unwrap();
        let b2 = Dictionary::new(array![[1.0, 0.5], [0.0, 0.5]]).unwrap();
        let err = DisaggModel::new(
            vec!["air".into()],
            vec![b1],
            vec![b2],
            TrainConfig::default(),
            2,
        )
        .unwrap_err();
        assert!(matches!(err, DdscError::ShapeMismatch(_)));
    }
}
