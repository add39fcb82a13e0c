//! Binary sexist / not-sexist classification.
//!
//! Training data is split with [`stratified_split`], class imbalance is
//! countered with [`compute_class_weights`], and any trained model is used
//! through the [`TextClassifier`] trait. The [`baseline`] module ships a
//! dependency-free linear model; transformer fine-tuning lives in its own
//! crate and plugs in through the same trait and the same [`artifact`]
//! directory layout.

pub mod artifact;
pub mod baseline;
mod config;
mod split;
mod weights;

pub use artifact::{ArtifactMeta, Backend, EpochMetrics, TrainingSummary};
pub use baseline::{fine_tune_baseline, BaselineModel};
pub use config::{BaselineParams, ClassWeightMode, ClassifierConfig, DEFAULT_BASE_MODEL};
pub use split::{stratified_split, DataSplit, DEFAULT_SPLIT_RATIO};
pub use weights::compute_class_weights;


use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::TrainingExample;
use crate::evaluation::{evaluate, Metrics};
use crate::Label;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("class `{label}` has {count} examples, need at least 2")]
    ClassTooSmall { label: Label, count: usize },
    #[error("class `{0}` has no examples")]
    ZeroCountClass(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains only `{0}` examples")]
    SingleClassTrainingSet(Label),
    #[error("text is empty")]
    EmptyText,
    #[error("cannot fetch base model `{model}`: {reason}")]
    ModelFetch { model: String, reason: String },
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error("model backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw model output for one text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// Probability of the sexist class.
    pub probability: f64,
    /// The text was longer than the model's maximum sequence length.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
    #[serde(default)]
    pub truncated: bool,
}

impl Prediction {
    pub fn from_score(score: Score, threshold: f64) -> Self {
        let label = if score.probability >= threshold { Label::Sexist } else { Label::NotSexist };
        Prediction { label, score: score.probability, truncated: score.truncated }
    }
}

/// A prediction tied to a stored comment, as written to prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(flatten)]
    pub prediction: Prediction,
}

/// A trained model. Implementations are immutable once built and safe to
/// share across threads.
pub trait TextClassifier: Send + Sync {
    fn config(&self) -> &ClassifierConfig;

    fn summary(&self) -> &TrainingSummary;

    fn backend(&self) -> Backend;

    /// Scores one non-empty text.
    fn score(&self, text: &str) -> Result<Score, ClassifierError>;

    /// Writes the model as an artifact directory.
    fn save(&self, dir: &Path) -> Result<(), ClassifierError>;
}

pub fn predict(model: &dyn TextClassifier, text: &str) -> Result<Prediction, ClassifierError> {
    if text.trim().is_empty() {
        return Err(ClassifierError::EmptyText);
    }
    let score = model.score(text)?;
    Ok(Prediction::from_score(score, model.config().decision_threshold))
}

/// Element-wise [`predict`], in input order. A bad item gets its own error
/// and never aborts the rest of the batch.
pub fn predict_batch<S: AsRef<str> + Sync>(
    model: &dyn TextClassifier,
    texts: &[S],
) -> Vec<Result<Prediction, ClassifierError>> {
    texts.par_iter().map(|t| predict(model, t.as_ref())).collect()
}

/// Predicts every example and scores the predictions against its label.
pub fn evaluate_model(model: &dyn TextClassifier, examples: &[TrainingExample]) -> Result<Metrics, ClassifierError> {
    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
    let mut preds = Vec::with_capacity(examples.len());
    for p in predict_batch(model, &texts) {
        preds.push(p?.label);
    }
    let golds: Vec<Label> = examples.iter().map(|e| e.label).collect();
    Ok(evaluate(&preds, &golds).expect("one prediction per example"))
}
