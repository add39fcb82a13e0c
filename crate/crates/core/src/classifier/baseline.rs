//! Logistic regression over hashed unigram and bigram counts.
//!
//! Training is plain minibatch AdaGrad on the class-weighted cross-entropy,
//! starting from zero weights. Every step runs sequentially in a fixed
//! order, so a given config and training set always produce bit-identical
//! weights.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::artifact::{self, ArtifactMeta, Backend, EpochMetrics, TrainingSummary};
use super::{compute_class_weights, evaluate_model, ClassifierConfig, ClassifierError, DataSplit, Score, TextClassifier};

pub const WEIGHTS_FILE: &str = "weights.bin";
const MAGIC: &[u8; 8] = b"ASXLIN01";

/// Lower-cased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    h
}

struct Features {
    /// Sorted by bucket, buckets unique.
    counts: Vec<(usize, f64)>,
    truncated: bool,
    lexicon_hit: bool,
}

fn featurize(text: &str, config: &ClassifierConfig, lexicon: &HashSet<String>) -> Features {
    let mut tokens = tokenize(text);
    let truncated = tokens.len() > config.max_sequence_length;
    tokens.truncate(config.max_sequence_length);
    let mask = (1u64 << config.baseline.hash_bits) - 1;
    let mut map: BTreeMap<usize, f64> = BTreeMap::new();
    for t in &tokens {
        *map.entry((fnv1a(&["u", t]) & mask) as usize).or_default() += 1.0;
    }
    if config.baseline.bigrams {
        for w in tokens.windows(2) {
            *map.entry((fnv1a(&["b", &w[0], &w[1]]) & mask) as usize).or_default() += 1.0;
        }
    }
    let lexicon_hit = tokens.iter().any(|t| lexicon.contains(t));
    Features { counts: map.into_iter().collect(), truncated, lexicon_hit }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Cross-entropy of probability `p` against the binary target.
fn cross_entropy(p: f64, sexist: bool) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    if sexist { -p.ln() } else { -(1.0 - p).ln() }
}

#[derive(Debug, Clone)]
pub struct BaselineModel {
    config: ClassifierConfig,
    summary: TrainingSummary,
    lexicon: HashSet<String>,
    bias: f64,
    weights: Vec<f64>,
}

impl BaselineModel {
    fn logit(&self, f: &Features) -> f64 {
        f.counts.iter().fold(self.bias, |z, &(j, x)| z + self.weights[j] * x)
    }

    fn score_features(&self, f: &Features) -> f64 {
        let p = sigmoid(self.logit(f));
        if f.lexicon_hit { p.max(self.config.baseline.lexicon_min_score) } else { p }
    }

    pub fn load(dir: &Path) -> Result<Self, ClassifierError> {
        let (meta, summary) = artifact::read_meta(dir)?;
        if meta.backend != Backend::Baseline {
            return Err(ClassifierError::Artifact(format!(
                "{} holds a {} model, not a baseline",
                dir.display(),
                meta.backend.as_str()
            )));
        }
        let bytes = fs::read(dir.join(&meta.weights))?;
        let config = meta.config;
        let (bias, weights) = decode_weights(&bytes, config.baseline.hash_bits)
            .ok_or_else(|| ClassifierError::Artifact(format!("{}: corrupt weights blob", dir.display())))?;
        Ok(BaselineModel { lexicon: lexicon_set(&config), config, summary, bias, weights })
    }
}

fn lexicon_set(config: &ClassifierConfig) -> HashSet<String> {
    config.baseline.lexicon.iter().map(|t| t.to_lowercase()).collect()
}

fn encode_weights(bias: f64, weights: &[f64], hash_bits: u32) -> Vec<u8> {
    let nonzero: Vec<(usize, f64)> = weights.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect();
    let mut out = Vec::with_capacity(32 + nonzero.len() * 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&hash_bits.to_le_bytes());
    out.extend_from_slice(&bias.to_le_bytes());
    out.extend_from_slice(&(nonzero.len() as u64).to_le_bytes());
    for (j, w) in nonzero {
        out.extend_from_slice(&(j as u32).to_le_bytes());
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

fn decode_weights(bytes: &[u8], hash_bits: u32) -> Option<(f64, Vec<f64>)> {
    let rest = bytes.strip_prefix(MAGIC.as_slice())?;
    let (bits, rest) = rest.split_first_chunk::<4>()?;
    if u32::from_le_bytes(*bits) != hash_bits {
        return None;
    }
    let (bias, rest) = rest.split_first_chunk::<8>()?;
    let (n, mut rest) = rest.split_first_chunk::<8>()?;
    let mut weights = vec![0.0; 1 << hash_bits];
    for _ in 0..u64::from_le_bytes(*n) {
        let (j, r) = rest.split_first_chunk::<4>()?;
        let (w, r) = r.split_first_chunk::<8>()?;
        *weights.get_mut(u32::from_le_bytes(*j) as usize)? = f64::from_le_bytes(*w);
        rest = r;
    }
    rest.is_empty().then_some((f64::from_le_bytes(*bias), weights))
}

impl TextClassifier for BaselineModel {
    fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    fn backend(&self) -> Backend {
        Backend::Baseline
    }

    fn score(&self, text: &str) -> Result<Score, ClassifierError> {
        if text.trim().is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        let f = featurize(text, &self.config, &self.lexicon);
        Ok(Score { probability: self.score_features(&f), truncated: f.truncated })
    }

    fn save(&self, dir: &Path) -> Result<(), ClassifierError> {
        let meta = ArtifactMeta {
            format_version: artifact::FORMAT_VERSION,
            backend: Backend::Baseline,
            weights: WEIGHTS_FILE.to_string(),
            config: self.config.clone(),
        };
        artifact::write_meta(dir, &meta, &self.summary)?;
        fs::write(dir.join(WEIGHTS_FILE), encode_weights(self.bias, &self.weights, self.config.baseline.hash_bits))?;
        Ok(())
    }
}

/// Trains the baseline on `split.train` and, when `split.test` is non-empty,
/// records held-out metrics in the training summary.
pub fn fine_tune_baseline(split: &DataSplit, config: &ClassifierConfig) -> Result<BaselineModel, ClassifierError> {
    config.validate()?;
    let train = &split.train;
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let class_counts = DataSplit::class_counts(train);
    if let Some((&only, _)) = class_counts.iter().find(|(_, &n)| n == train.len()) {
        return Err(ClassifierError::SingleClassTrainingSet(only));
    }
    let class_weights = compute_class_weights(&class_counts, config.class_weight_mode)?;
    let lexicon = lexicon_set(config);
    let feats: Vec<Features> = train.iter().map(|e| featurize(&e.text, config, &lexicon)).collect();
    let targets: Vec<bool> = train.iter().map(|e| e.label.is_sexist()).collect();
    let cw: Vec<f64> = train.iter().map(|e| class_weights[&e.label]).collect();

    let dim = 1usize << config.baseline.hash_bits;
    let mut model = BaselineModel {
        config: config.clone(),
        summary: TrainingSummary {
            backend: Backend::Baseline,
            seed: config.seed,
            train_size: train.len(),
            class_counts,
            class_weights,
            epochs: Vec::new(),
            final_loss: 0.0,
            holdout: None,
        },
        lexicon,
        bias: 0.0,
        weights: vec![0.0; dim],
    };
    let (lr, l2) = (config.baseline.learning_rate, config.baseline.l2);
    let mut sq_grad = vec![0.0; dim];
    let mut sq_grad_bias = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let norm: f64 = batch.iter().map(|&i| cw[i]).sum();
            let mut grad: BTreeMap<usize, f64> = BTreeMap::new();
            let mut grad_bias = 0.0;
            for &i in batch {
                let p = sigmoid(model.logit(&feats[i]));
                let g = cw[i] * (p - if targets[i] { 1.0 } else { 0.0 }) / norm;
                grad_bias += g;
                for &(j, x) in &feats[i].counts {
                    *grad.entry(j).or_default() += g * x;
                }
            }
            for (j, g) in grad {
                let g = g + l2 * model.weights[j];
                sq_grad[j] += g * g;
                if sq_grad[j] > 0.0 {
                    model.weights[j] -= lr * g / sq_grad[j].sqrt();
                }
            }
            sq_grad_bias += grad_bias * grad_bias;
            if sq_grad_bias > 0.0 {
                model.bias -= lr * grad_bias / sq_grad_bias.sqrt();
            }
        }

        let (mut loss, mut weight_sum, mut correct) = (0.0, 0.0, 0usize);
        for i in 0..train.len() {
            let p = model.score_features(&feats[i]);
            loss += cw[i] * cross_entropy(p, targets[i]);
            weight_sum += cw[i];
            correct += usize::from((p >= config.decision_threshold) == targets[i]);
        }
        model.summary.epochs.push(EpochMetrics {
            epoch,
            train_loss: loss / weight_sum,
            train_accuracy: correct as f64 / train.len() as f64,
        });
    }
    model.summary.final_loss = model.summary.epochs.last().map_or(0.0, |e| e.train_loss);

    if !split.test.is_empty() {
        model.summary.holdout = Some(evaluate_model(&model, &split.test)?);
    }
    Ok(model)
}
