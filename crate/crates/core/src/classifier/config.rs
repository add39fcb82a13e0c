use serde::{Deserialize, Serialize};

use super::ClassifierError;

pub const DEFAULT_BASE_MODEL: &str = "Hate-speech-CNERG/dehatebert-mono-spanish";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightMode {
    None,
    InverseFrequency,
}

/// Settings specific to the linear baseline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    /// AdaGrad step size.
    pub learning_rate: f64,
    /// L2 penalty applied to the weights touched by each step.
    pub l2: f64,
    /// Features are hashed into `2^hash_bits` buckets.
    pub hash_bits: u32,
    pub bigrams: bool,
    /// Lower-cased tokens that force a sexist score of at least
    /// `lexicon_min_score`.
    pub lexicon: Vec<String>,
    pub lexicon_min_score: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            learning_rate: 0.5,
            l2: 0.0,
            hash_bits: 18,
            bigrams: true,
            lexicon: Vec::new(),
            lexicon_min_score: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub base_model_id: String,
    /// Maximum number of tokens fed to the model; longer texts are truncated.
    pub max_sequence_length: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub class_weight_mode: ClassWeightMode,
    pub decision_threshold: f64,
    /// Drives the data split, weight initialization and shuffling.
    pub seed: u64,
    pub baseline: BaselineParams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            base_model_id: DEFAULT_BASE_MODEL.to_string(),
            max_sequence_length: 128,
            epochs: 3,
            learning_rate: 2e-5,
            batch_size: 16,
            class_weight_mode: ClassWeightMode::InverseFrequency,
            decision_threshold: 0.5,
            seed: 42,
            baseline: BaselineParams::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision_threshold must lie in (0, 1)");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.max_sequence_length < 8 {
            return bad("max_sequence_length must be at least 8");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        let b = &self.baseline;
        if !(b.learning_rate > 0.0 && b.learning_rate.is_finite()) || !(b.l2 >= 0.0) {
            return bad("baseline learning_rate must be positive and l2 non-negative");
        }
        if !(1..=26).contains(&b.hash_bits) {
            return bad("baseline hash_bits must lie in 1..=26");
        }
        if !b.lexicon.is_empty() && !(b.lexicon_min_score > self.decision_threshold && b.lexicon_min_score <= 1.0) {
            return bad("lexicon_min_score must exceed the decision threshold");
        }
        Ok(())
    }
}
