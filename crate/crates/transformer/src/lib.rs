//! Fine-tuning a pre-trained BERT hate-speech classifier on the exported
//! sexism training set.
//!
//! The base model is a BERT encoder plus the usual pooler (dense + tanh over
//! the `[CLS]` state) and a two-way linear head; output index 1 is the
//! sexist class. Weights come from `model.safetensors` or
//! `pytorch_model.bin`; parameters missing from the checkpoint (typically the
//! head) are drawn from a seeded normal distribution, so a given config always
//! starts from the same point. Training minimizes class-weighted
//! cross-entropy with AdamW on the CPU.

mod encoder;
pub mod hub;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use antisexism_core::classifier::artifact::{self, ArtifactMeta, Backend, EpochMetrics, TrainingSummary};
use antisexism_core::classifier::{
    compute_class_weights, evaluate_model, ClassifierConfig, ClassifierError, DataSplit, Score, TextClassifier,
};
use candle_core::{DType, Device, IndexOp, Tensor, D};
use candle_nn::{linear, Linear, Module, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use candle_transformers::models::bert::{BertModel, Config as BertConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use encoder::TextEncoder;
pub use hub::{BaseModelFiles, ModelSource, TokenizerFile};

pub const WEIGHTS_FILE: &str = "model.safetensors";
pub const BERT_CONFIG_FILE: &str = "bert_config.json";
pub const TOKENIZER_FILE: &str = "tokenizer.json";

fn backend(e: impl std::fmt::Display) -> ClassifierError {
    ClassifierError::Backend(e.to_string())
}

struct Network {
    bert: BertModel,
    pooler: Linear,
    classifier: Linear,
}

impl Network {
    fn build(vb: VarBuilder, cfg: &BertConfig) -> candle_core::Result<Self> {
        let h = cfg.hidden_size;
        Ok(Network {
            bert: BertModel::load(vb.pp("bert"), cfg)?,
            pooler: linear(h, h, vb.pp("bert.pooler.dense"))?,
            classifier: linear(h, 2, vb.pp("classifier"))?,
        })
    }

    fn logits(&self, batch: &encoder::Batch) -> candle_core::Result<Tensor> {
        let states = self.bert.forward(&batch.ids, &batch.type_ids, Some(&batch.mask))?;
        let pooled = self.pooler.forward(&states.i((.., 0))?)?.tanh()?;
        self.classifier.forward(&pooled)
    }
}

/// Checkpoint tensors under the names used by [`Network`].
fn read_checkpoint(path: &Path) -> Result<HashMap<String, Tensor>, ClassifierError> {
    let raw: Vec<(String, Tensor)> = if path.extension().is_some_and(|e| e == "safetensors") {
        candle_core::safetensors::load(path, &Device::Cpu).map_err(backend)?.into_iter().collect()
    } else {
        candle_core::pickle::read_all(path).map_err(backend)?
    };
    let bare = !raw.iter().any(|(k, _)| k.starts_with("bert."));
    Ok(raw
        .into_iter()
        .map(|(k, t)| {
            let k = k.replace("LayerNorm.gamma", "LayerNorm.weight").replace("LayerNorm.beta", "LayerNorm.bias");
            let k = if bare && !k.starts_with("classifier.") { format!("bert.{k}") } else { k };
            (k, t)
        })
        .collect())
}

/// Fills every variable of `varmap` from `checkpoint`, or from the seeded
/// initializer when the checkpoint lacks it. Only the pooler and the head may
/// be missing from a non-empty checkpoint.
fn initialize(
    varmap: &mut VarMap,
    checkpoint: &HashMap<String, Tensor>,
    seed: u64,
    init_range: f64,
) -> Result<(), ClassifierError> {
    let mut names: Vec<(String, Vec<usize>)> = {
        let data = varmap.data().lock().unwrap();
        data.iter().map(|(k, v)| (k.clone(), v.dims().to_vec())).collect()
    };
    names.sort();
    let missing: Vec<&str> = names
        .iter()
        .map(|(n, _)| n.as_str())
        .filter(|n| !checkpoint.contains_key(*n) && !n.starts_with("bert.pooler.") && !n.starts_with("classifier."))
        .collect();
    if !checkpoint.is_empty() && !missing.is_empty() {
        return Err(backend(format!(
            "checkpoint lacks {} parameters, e.g. {}",
            missing.len(),
            missing.iter().take(3).copied().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, init_range as f32).map_err(backend)?;
    for (name, dims) in names {
        let tensor = match checkpoint.get(&name) {
            Some(t) => {
                if t.dims() != dims.as_slice() {
                    return Err(backend(format!("{name}: checkpoint shape {:?}, model expects {dims:?}", t.dims())));
                }
                t.to_dtype(DType::F32).map_err(backend)?
            }
            None => {
                let n: usize = dims.iter().product();
                let values: Vec<f32> = if name.ends_with("LayerNorm.weight") {
                    vec![1.0; n]
                } else if name.ends_with(".bias") {
                    vec![0.0; n]
                } else {
                    (0..n).map(|_| normal.sample(&mut rng)).collect()
                };
                Tensor::from_vec(values, dims.as_slice(), &Device::Cpu).map_err(backend)?
            }
        };
        varmap.set_one(&name, &tensor).map_err(backend)?;
    }
    Ok(())
}

fn parse_bert_config(text: &str) -> Result<BertConfig, ClassifierError> {
    serde_json::from_str(text).map_err(|e| backend(format!("bert config: {e}")))
}

pub struct TransformerModel {
    config: ClassifierConfig,
    summary: TrainingSummary,
    bert_config_json: String,
    encoder: TextEncoder,
    varmap: VarMap,
    network: Network,
    device: Device,
}

fn build_network(bert_config: &BertConfig) -> Result<(VarMap, Network), ClassifierError> {
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
    let network = Network::build(vb, bert_config).map_err(backend)?;
    Ok((varmap, network))
}

impl TransformerModel {
    fn logits(&self, rows: &[&[u32]]) -> Result<Tensor, ClassifierError> {
        let batch = self.encoder.batch(rows, &self.device)?;
        self.network.logits(&batch).map_err(backend)
    }

    pub fn load(dir: &Path) -> Result<Self, ClassifierError> {
        let (meta, summary) = artifact::read_meta(dir)?;
        if meta.backend != Backend::Transformer {
            return Err(ClassifierError::Artifact(format!(
                "{} holds a {} model, not a transformer",
                dir.display(),
                meta.backend.as_str()
            )));
        }
        let bert_config_json = fs::read_to_string(dir.join(BERT_CONFIG_FILE))?;
        let bert_config = parse_bert_config(&bert_config_json)?;
        let encoder =
            TextEncoder::load(&TokenizerFile::Json(dir.join(TOKENIZER_FILE)), max_len(&meta.config, &bert_config))?;
        let (mut varmap, network) = build_network(&bert_config)?;
        varmap.load(dir.join(&meta.weights)).map_err(backend)?;
        Ok(TransformerModel {
            config: meta.config,
            summary,
            bert_config_json,
            encoder,
            varmap,
            network,
            device: Device::Cpu,
        })
    }
}

fn max_len(config: &ClassifierConfig, bert: &BertConfig) -> usize {
    config.max_sequence_length.min(bert.max_position_embeddings)
}

impl TextClassifier for TransformerModel {
    fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    fn backend(&self) -> Backend {
        Backend::Transformer
    }

    fn score(&self, text: &str) -> Result<Score, ClassifierError> {
        if text.trim().is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        let (ids, truncated) = self.encoder.encode(text)?;
        let logits = self.logits(&[&ids])?;
        let probs = candle_nn::ops::softmax(&logits, D::Minus1).map_err(backend)?;
        let p = probs.i((0, 1)).and_then(|t| t.to_scalar::<f32>()).map_err(backend)?;
        Ok(Score { probability: f64::from(p).clamp(0.0, 1.0), truncated })
    }

    fn save(&self, dir: &Path) -> Result<(), ClassifierError> {
        let meta = ArtifactMeta {
            format_version: artifact::FORMAT_VERSION,
            backend: Backend::Transformer,
            weights: WEIGHTS_FILE.to_string(),
            config: self.config.clone(),
        };
        artifact::write_meta(dir, &meta, &self.summary)?;
        self.varmap.save(dir.join(WEIGHTS_FILE)).map_err(backend)?;
        fs::write(dir.join(BERT_CONFIG_FILE), &self.bert_config_json)?;
        self.encoder.save(&dir.join(TOKENIZER_FILE))
    }
}

/// [`fine_tune_transformer_from`] with the model source taken from the
/// environment.
pub fn fine_tune_transformer(split: &DataSplit, config: &ClassifierConfig) -> Result<TransformerModel, ClassifierError> {
    fine_tune_transformer_from(&ModelSource::from_env(), split, config)
}

/// Fine-tunes `config.base_model_id` on `split.train`.
///
/// The per-epoch loss and accuracy in the summary are running values over the
/// epoch's minibatches, measured before each update. When `split.test` is
/// non-empty its metrics are recorded as well.
pub fn fine_tune_transformer_from(
    source: &ModelSource,
    split: &DataSplit,
    config: &ClassifierConfig,
) -> Result<TransformerModel, ClassifierError> {
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

    let files = source.resolve(&config.base_model_id)?;
    let bert_config_json = fs::read_to_string(&files.config)?;
    let bert_config = parse_bert_config(&bert_config_json)?;
    let encoder = TextEncoder::load(&files.tokenizer, max_len(config, &bert_config))?;
    let checkpoint = read_checkpoint(&files.weights)?;
    let (mut varmap, network) = build_network(&bert_config)?;
    initialize(&mut varmap, &checkpoint, config.seed, bert_config.initializer_range)?;
    drop(checkpoint);

    let mut model = TransformerModel {
        config: config.clone(),
        summary: TrainingSummary {
            backend: Backend::Transformer,
            seed: config.seed,
            train_size: train.len(),
            class_counts,
            class_weights: class_weights.clone(),
            epochs: Vec::new(),
            final_loss: 0.0,
            holdout: None,
        },
        bert_config_json,
        encoder,
        varmap,
        network,
        device: Device::Cpu,
    };

    let encoded: Vec<Vec<u32>> =
        train.iter().map(|e| model.encoder.encode(&e.text).map(|(ids, _)| ids)).collect::<Result<_, _>>()?;
    let targets: Vec<u32> = train.iter().map(|e| u32::from(e.label.is_sexist())).collect();
    let weights: Vec<f32> = train.iter().map(|e| class_weights[&e.label] as f32).collect();

    let params = ParamsAdamW { lr: config.learning_rate, ..Default::default() };
    let mut optimizer = candle_nn::AdamW::new(model.varmap.all_vars(), params).map_err(backend)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut weight_sum, mut correct) = (0.0f64, 0.0f64, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let rows: Vec<&[u32]> = chunk.iter().map(|&i| encoded[i].as_slice()).collect();
            let logits = model.logits(&rows)?;
            let y = Tensor::from_vec(chunk.iter().map(|&i| targets[i]).collect::<Vec<_>>(), chunk.len(), &model.device)
                .map_err(backend)?;
            let w: Vec<f32> = chunk.iter().map(|&i| weights[i]).collect();
            let batch_weight: f32 = w.iter().sum();
            let w = Tensor::from_vec(w, chunk.len(), &model.device).map_err(backend)?;
            let loss = weighted_cross_entropy(&logits, &y, &w, batch_weight).map_err(backend)?;

            let predicted: Vec<u32> = logits.argmax(D::Minus1).and_then(|t| t.to_vec1()).map_err(backend)?;
            correct += predicted.iter().zip(chunk).filter(|(p, &i)| **p == targets[i]).count();
            loss_sum += f64::from(loss.to_scalar::<f32>().map_err(backend)?) * f64::from(batch_weight);
            weight_sum += f64::from(batch_weight);
            optimizer.backward_step(&loss).map_err(backend)?;
        }
        model.summary.epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / weight_sum,
            train_accuracy: correct as f64 / train.len() as f64,
        });
    }
    model.summary.final_loss = model.summary.epochs.last().map_or(0.0, |e| e.train_loss);
    if !split.test.is_empty() {
        model.summary.holdout = Some(evaluate_model(&model, &split.test)?);
    }
    Ok(model)
}

/// `sum_i w_i * -log softmax(logits_i)[y_i] / sum_i w_i`.
fn weighted_cross_entropy(logits: &Tensor, targets: &Tensor, weights: &Tensor, weight_sum: f32) -> candle_core::Result<Tensor> {
    let log_probs = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    let picked = log_probs.gather(&targets.unsqueeze(1)?, 1)?.squeeze(1)?;
    (picked * weights)?.sum_all()?.neg()? / f64::from(weight_sum)
}

/// Writes a randomly initialized base model (`config.json`, `vocab.txt`,
/// `model.safetensors`) that [`ModelSource::resolve`] accepts as a local
/// directory. Meant for offline smoke runs and tests.
pub fn write_random_base_model(
    dir: &Path,
    bert_config_json: &str,
    vocab: &[&str],
    seed: u64,
) -> Result<(), ClassifierError> {
    let bert_config = parse_bert_config(bert_config_json)?;
    if vocab.len() != bert_config.vocab_size {
        return Err(backend(format!("vocabulary has {} entries, config says {}", vocab.len(), bert_config.vocab_size)));
    }
    let (mut varmap, _) = build_network(&bert_config)?;
    initialize(&mut varmap, &HashMap::new(), seed, bert_config.initializer_range)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), bert_config_json)?;
    fs::write(dir.join("vocab.txt"), vocab.join("\n") + "\n")?;
    varmap.save(dir.join(WEIGHTS_FILE)).map_err(backend)
}
