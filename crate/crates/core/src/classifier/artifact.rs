//! On-disk model layout: a directory holding an opaque weights blob, a
//! `config.json` snapshot and a `training_summary.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierConfig, ClassifierError};
use crate::evaluation::Metrics;
use crate::Label;

pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "training_summary.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Baseline,
    Transformer,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Baseline => "baseline",
            Backend::Transformer => "transformer",
        }
    }
}

/// Contents of `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub format_version: u32,
    pub backend: Backend,
    /// File name of the weights blob inside the artifact directory.
    pub weights: String,
    pub config: ClassifierConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Class-weighted cross-entropy over the train set.
    pub train_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub backend: Backend,
    pub seed: u64,
    pub train_size: usize,
    pub class_counts: BTreeMap<Label, usize>,
    pub class_weights: BTreeMap<Label, f64>,
    pub epochs: Vec<EpochMetrics>,
    pub final_loss: f64,
    /// Metrics on the held-out part of the split, when it was non-empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout: Option<Metrics>,
}

fn artifact_err(dir: &Path, what: impl std::fmt::Display) -> ClassifierError {
    ClassifierError::Artifact(format!("{}: {what}", dir.display()))
}

/// Creates the artifact directory and writes both JSON files. Fails if the
/// directory already holds a config snapshot.
pub fn write_meta(dir: &Path, meta: &ArtifactMeta, summary: &TrainingSummary) -> Result<(), ClassifierError> {
    fs::create_dir_all(dir)?;
    let config_path = dir.join(CONFIG_FILE);
    if config_path.exists() {
        return Err(artifact_err(dir, "artifact already exists"));
    }
    fs::write(dir.join(SUMMARY_FILE), to_json(dir, summary)?)?;
    fs::write(config_path, to_json(dir, meta)?)?;
    Ok(())
}

fn to_json<T: Serialize>(dir: &Path, value: &T) -> Result<String, ClassifierError> {
    serde_json::to_string_pretty(value).map_err(|e| artifact_err(dir, e))
}

pub fn read_meta(dir: &Path) -> Result<(ArtifactMeta, TrainingSummary), ClassifierError> {
    let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| artifact_err(dir, format!("{name}: {e}")));
    let meta: ArtifactMeta =
        serde_json::from_str(&read(CONFIG_FILE)?).map_err(|e| artifact_err(dir, format!("{CONFIG_FILE}: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(artifact_err(dir, format!("unsupported format version {}", meta.format_version)));
    }
    meta.config.validate()?;
    let summary =
        serde_json::from_str(&read(SUMMARY_FILE)?).map_err(|e| artifact_err(dir, format!("{SUMMARY_FILE}: {e}")))?;
    Ok((meta, summary))
}
