//! On-disk layout of a run directory.
//!
//! ```text
//! config.toml             effective configuration
//! preprocessing.toml      selected feature columns and min-max bounds
//! splits/{train,calibration,test}.csv   raw rows, all source columns
//! model/                  checkpoint
//! loss_history.csv
//! threshold.toml          written by `calibrate`
//! calibration_scores.csv  written by `calibrate`
//! scores.csv              written by `evaluate`
//! metrics.toml            written by `evaluate`
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use qanogan::anogan::ScoredSample;
use qanogan::data::{load_csv, select_features, Dataset, Normalization};
use qanogan::eval::ConfusionCounts;
use qanogan::gan::{load_model, GanModel, LossRecord};

use crate::config::{config_from_table, load_table, RunConfig};

pub const SPLITS: [&str; 3] = ["train", "calibration", "test"];

/// Maps raw source rows to model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// Feature columns of the source data, in file order.
    pub source_features: Vec<String>,
    /// Indices into `source_features` fed to the model, in model order.
    pub features: Vec<usize>,
    pub normalization: Normalization,
}

impl Preprocessing {
    /// Fits the bounds on `train` after selecting `features` (all when `None`).
    pub fn fit(train: &Dataset, features: Option<&[usize]>) -> Result<Self> {
        let features = match features {
            Some(f) => f.to_vec(),
            None => (0..train.dim()).collect(),
        };
        let selected = select_features(train, &features).context("data.features")?;
        Ok(Self {
            source_features: train.feature_names.clone(),
            normalization: Normalization::fit(&selected)?,
            features,
        })
    }

    pub fn model_dim(&self) -> usize {
        self.features.len()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        ensure!(
            data.feature_names == self.source_features,
            "data columns do not match the columns the run was trained on"
        );
        Ok(self.normalization.apply(&select_features(data, &self.features)?)?)
    }

    pub fn apply_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            raw.len() == self.source_features.len(),
            "row has {} values, expected {} ({})",
            raw.len(),
            self.source_features.len(),
            self.source_features.join(",")
        );
        let x: Vec<f64> = self.features.iter().map(|&i| raw[i]).collect();
        Ok(self.normalization.apply_row(&x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub threshold: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: String,
    pub seed: u64,
    pub iterations: u64,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn id(&self) -> String {
        self.root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.root.display().to_string())
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn preprocessing_path(&self) -> PathBuf {
        self.root.join("preprocessing.toml")
    }
    pub fn split_path(&self, split: &str) -> PathBuf {
        self.root.join("splits").join(format!("{split}.csv"))
    }
    pub fn model_dir(&self) -> PathBuf {
        self.root.join("model")
    }
    pub fn loss_history_path(&self) -> PathBuf {
        self.root.join("loss_history.csv")
    }
    pub fn threshold_path(&self) -> PathBuf {
        self.root.join("threshold.toml")
    }
    pub fn calibration_scores_path(&self) -> PathBuf {
        self.root.join("calibration_scores.csv")
    }
    pub fn scores_path(&self) -> PathBuf {
        self.root.join("scores.csv")
    }
    pub fn metrics_path(&self) -> PathBuf {
        self.root.join("metrics.toml")
    }

    /// Stored config with `overrides` applied on top.
    pub fn config(&self, overrides: &[String]) -> Result<RunConfig> {
        let table = load_table(&self.config_path())?;
        config_from_table(table, overrides).with_context(|| format!("run {}", self.root.display()))
    }

    pub fn preprocessing(&self) -> Result<Preprocessing> {
        read_toml(&self.preprocessing_path())
    }

    pub fn model(&self) -> Result<GanModel> {
        let dir = self.model_dir();
        load_model(&dir).with_context(|| format!("loading checkpoint {}", dir.display()))
    }

    /// A stored split, preprocessed for the model.
    pub fn split(&self, split: &str) -> Result<Dataset> {
        ensure!(SPLITS.contains(&split), "unknown split {split:?}; expected one of {SPLITS:?}");
        let path = self.split_path(split);
        let raw = load_csv(&path).with_context(|| format!("reading {}", path.display()))?;
        self.preprocessing()?.apply(&raw)
    }

    pub fn threshold(&self) -> Result<ThresholdFile> {
        let path = self.threshold_path();
        if !path.exists() {
            bail!("{} not found; run `qanogan calibrate` first or pass --threshold", path.display());
        }
        read_toml(&path)
    }
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, toml::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn write_loss_history(path: &Path, history: &[LossRecord]) -> qanogan::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in history {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `id, residual_loss, discrimination_loss, score, predicted, label`; ids
/// are row positions within the split file.
pub fn write_scores(path: &Path, ids: &[u64], samples: &[ScoredSample]) -> Result<()> {
    let flag = |b: Option<bool>| match b {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    };
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["id", "residual_loss", "discrimination_loss", "score", "predicted", "label"])?;
    for (id, s) in ids.iter().zip(samples) {
        w.write_record([
            id.to_string(),
            s.residual_loss.to_string(),
            s.discrimination_loss.to_string(),
            s.score.to_string(),
            flag(s.predicted).to_string(),
            flag(s.label).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
