use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use antisexism_core::alerting::{aggregate_labels, color_agreement, render_alert_table, AlertRow, AlertThresholds, ColorAgreement};
use antisexism_core::annotation::{AnnotationVote, TrainingExample};
use antisexism_core::classifier::{
    predict, predict_batch, PredictionRecord, TextClassifier, DEFAULT_SPLIT_RATIO,
};
use antisexism_core::corpus::{load_source_registry, Comment, FixtureFetcher, SamplingTargets};
use antisexism_core::evaluation::{evaluate, normalized_confusion_matrix, Metrics};
use antisexism_core::{jsonl, Label};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::{App, ThresholdQuery};
use crate::models;
use crate::{ServiceConfig, ServiceError};

#[derive(Debug, Parser)]
#[command(name = "antisexism", version, about = "Sexist-comment detection and per-source traffic-light alerts")]
pub struct Cli {
    /// JSON service configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Model artifact directory, or a model id under `<data-dir>/models`.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Alert thresholds, e.g. `red=0.05,yellow=0.025,min=100`.
    #[arg(long, global = true)]
    pub thresholds: Option<AlertThresholds>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use the linear baseline classifier instead of the transformer.
    #[arg(long, global = true)]
    pub baseline: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Registers sources and stores comments and votes in the data directory.
    Ingest {
        /// Source registry (JSON Lines).
        #[arg(long)]
        sources: Option<PathBuf>,
        /// Comments as `{"id","source_id","text","fetched_at"}` lines.
        #[arg(long)]
        comments: Option<PathBuf>,
        /// Directory of `<source id>.jsonl` comment fixtures.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Annotation votes as JSON Lines.
        #[arg(long)]
        votes: Option<PathBuf>,
    },
    /// Draws the balanced annotation sample.
    Sample {
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        /// Allowed deviation per facet, in percentage points.
        #[arg(long, default_value_t = 5.0)]
        tolerance: f64,
    },
    /// Writes the binary training set built from the resolved labels.
    ExportTraining {
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tunes a classifier and writes its artifact directory.
    Train {
        /// Training examples; defaults to the resolved labels of the data directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Artifact directory; defaults to `<data-dir>/models/<model id>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
        ratio: f64,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Scores predictions against gold labels.
    Evaluate {
        #[arg(long, requires = "pred")]
        gold: Option<PathBuf>,
        #[arg(long, requires = "gold")]
        pred: Option<PathBuf>,
        /// Labeled examples to run the `--model` on.
        #[arg(long, conflicts_with_all = ["gold", "pred"])]
        data: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Classifies one text or a file of comments.
    Classify {
        #[arg(long, conflicts_with = "input")]
        text: Option<String>,
        /// `{"id","text"}` lines, optionally with `source_id`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Prediction file; defaults to standard output.
        #[arg(long, requires = "input")]
        out: Option<PathBuf>,
    },
    /// Per-source traffic-light report.
    Alert {
        #[arg(long)]
        sources: Option<PathBuf>,
        /// Prediction file; without it the data directory and model are used.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Manual labels, shown next to the predictions with the agreement score.
        #[arg(long, requires = "predictions")]
        gold: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Corpus, labeling and latest evaluation summary of the data directory.
    Report {
        #[arg(long)]
        json: bool,
    },
    /// Runs the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

/// A labeled comment: `{"id", "label"}` with an optional `source_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub label: Label,
}

#[derive(Debug, Clone, Deserialize)]
struct InputText {
    id: String,
    text: String,
    #[serde(default)]
    source_id: Option<String>,
}

pub fn load_config(cli: &Cli) -> Result<ServiceConfig, ServiceError> {
    let mut config = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    if let Some(d) = &cli.data_dir {
        config.data_dir = d.clone();
    }
    if let Some(m) = &cli.model {
        config.model = Some(m.clone());
    }
    if let Some(t) = cli.thresholds {
        config.thresholds = t;
    }
    if let Some(s) = cli.seed {
        config.classifier.seed = s;
    }
    if cli.baseline {
        config.baseline = true;
    }
    config.validate()?;
    Ok(config)
}

fn require_model(config: &ServiceConfig) -> Result<Arc<models::LoadedModel>, ServiceError> {
    let dir = config.model_path().ok_or(ServiceError::NoModel)?;
    models::load_model(&dir)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output")
}

fn metrics_text(metrics: &Metrics, preds: &[Label], golds: &[Label]) -> String {
    let mut out = metrics.to_table();
    out.push_str("\nnormalized confusion matrix\n");
    out.push_str(&normalized_confusion_matrix(preds, golds).expect("equal lengths").to_table());
    out
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, ServiceError> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Ingest { sources, comments, fixtures, votes } => {
            let app = App::open(config)?;
            let mut out = String::new();
            if let Some(path) = sources {
                let n = app.add_sources(load_source_registry(&path)?)?;
                let _ = writeln!(out, "sources added: {n}");
            }
            let mut reports = BTreeMap::new();
            if let Some(path) = comments {
                reports.extend(app.ingest_comments(jsonl::read_file::<Comment>(&path)?)?);
            }
            if let Some(dir) = fixtures {
                reports.extend(app.fetch_all(&FixtureFetcher::new(dir))?);
            }
            for (id, r) in &reports {
                let _ = writeln!(
                    out,
                    "{id}: ingested {}, duplicates {}, rejected {}",
                    r.ingested,
                    r.duplicates.len(),
                    r.rejected.len()
                );
                for rej in &r.rejected {
                    let _ = writeln!(out, "  rejected #{} `{}`: {}", rej.index, rej.id, rej.reason);
                }
            }
            if let Some(path) = votes {
                let n = app.import_votes(jsonl::read_file::<AnnotationVote>(&path)?)?;
                let _ = writeln!(out, "votes recorded: {n}");
            }
            Ok(out)
        }
        Command::Sample { fraction, tolerance } => {
            let seed = config.classifier.seed;
            let app = App::open(config)?;
            let targets = SamplingTargets { sample_fraction: fraction, tolerance_pp: tolerance, ..Default::default() };
            let sample = app.sample(&targets, seed)?;
            let mut out = format!("sampled {} comments\n", sample.comments.len());
            out.push_str(&sample.stats.to_table());
            for d in &sample.deviations {
                let _ = writeln!(
                    out,
                    "deviation: {} {} target {:.1}% achieved {:.1}%",
                    d.facet,
                    d.category,
                    d.target * 100.0,
                    d.achieved * 100.0
                );
            }
            Ok(out)
        }
        Command::ExportTraining { out } => {
            let app = App::open(config)?;
            let set = app.training_set()?;
            jsonl::write_file(&out, &set)?;
            let sexist = set.iter().filter(|e| e.label.is_sexist()).count();
            Ok(format!("exported {} examples ({} sexist, {} not sexist) to {}\n", set.len(), sexist, set.len() - sexist, out.display()))
        }
        Command::Train { data, out, ratio, epochs } => {
            let mut classifier = config.classifier.clone();
            if let Some(e) = epochs {
                classifier.epochs = e;
            }
            let examples: Vec<TrainingExample> = match &data {
                Some(path) => jsonl::read_file(path)?,
                None => App::open(config.clone())?.training_set()?,
            };
            let trained = models::train(&examples, ratio, &classifier, config.baseline)?;
            let loaded = match out {
                Some(dir) => {
                    trained.save(&dir)?;
                    models::load_model(&dir)?
                }
                None => models::store_model(&config.data_dir.join(crate::store::MODELS_DIR), trained.as_ref())?,
            };
            let summary = loaded.model.summary();
            let mut text = format!(
                "model {} ({}) written to {}\ntrain size {}, final loss {:.4}\n",
                loaded.id,
                summary.backend.as_str(),
                loaded.dir.display(),
                summary.train_size,
                summary.final_loss
            );
            if let Some(h) = &summary.holdout {
                text.push_str("holdout\n");
                text.push_str(&h.to_table());
            }
            Ok(text)
        }
        Command::Evaluate { gold, pred, data, json } => {
            let (preds, golds) = match (gold, pred, data) {
                (Some(gold), Some(pred), _) => {
                    let gold: Vec<GoldRecord> = jsonl::read_file(&gold)?;
                    let pred: Vec<PredictionRecord> = jsonl::read_file(&pred)?;
                    let by_id: BTreeMap<&str, Label> = pred.iter().map(|p| (p.id.as_str(), p.prediction.label)).collect();
                    let mut preds = Vec::with_capacity(gold.len());
                    for g in &gold {
                        let p = by_id
                            .get(g.id.as_str())
                            .ok_or_else(|| ServiceError::BadRequest(format!("no prediction for `{}`", g.id)))?;
                        preds.push(*p);
                    }
                    (preds, gold.iter().map(|g| g.label).collect::<Vec<_>>())
                }
                (_, _, Some(data)) => {
                    let model = require_model(&config)?;
                    let examples: Vec<TrainingExample> = jsonl::read_file(&data)?;
                    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
                    let mut preds = Vec::with_capacity(texts.len());
                    for p in predict_batch(model.model.as_ref(), &texts) {
                        preds.push(p?.label);
                    }
                    (preds, examples.iter().map(|e| e.label).collect())
                }
                _ => return Err(ServiceError::BadRequest("evaluate needs --gold and --pred, or --data".into())),
            };
            let metrics = evaluate(&preds, &golds)?;
            if json {
                let cm = normalized_confusion_matrix(&preds, &golds)?;
                Ok(to_json(&json!({ "metrics": metrics, "confusion": cm })) + "\n")
            } else {
                Ok(metrics_text(&metrics, &preds, &golds))
            }
        }
        Command::Classify { text, input, out } => {
            let model = require_model(&config)?;
            if let Some(text) = text {
                return Ok(serde_json::to_string(&predict(model.model.as_ref(), &text)?).expect("serializable") + "\n");
            }
            let Some(input) = input else {
                return Err(ServiceError::BadRequest("classify needs --text or --input".into()));
            };
            let rows: Vec<InputText> = jsonl::read_file(&input)?;
            let records = classify_rows(model.model.as_ref(), rows)?;
            match out {
                Some(path) => {
                    jsonl::write_file(&path, &records)?;
                    Ok(format!("classified {} comments with model {} into {}\n", records.len(), model.id, path.display()))
                }
                None => {
                    let mut buf = Vec::new();
                    jsonl::write_records(&mut buf, &records)?;
                    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
                }
            }
        }
        Command::Alert { sources, predictions, gold, json } => {
            let thresholds = config.thresholds;
            let report = match predictions {
                Some(pred) => alert_from_files(sources.as_deref(), &pred, gold.as_deref(), &thresholds)?,
                None => {
                    let app = App::open(config)?;
                    let rows = app
                        .alerts(&ThresholdQuery::default())?
                        .into_iter()
                        .map(|a| AlertRow { source_id: a.source_id.clone(), manual: None, predicted: a })
                        .collect();
                    AlertReport { rows, agreement: None }
                }
            };
            if json {
                Ok(to_json(&report) + "\n")
            } else {
                Ok(report.to_text())
            }
        }
        Command::Report { json } => {
            let report = App::open(config)?.report();
            if json {
                Ok(to_json(&report) + "\n")
            } else {
                Ok(report.to_text())
            }
        }
        Command::Serve { listen } => {
            let listen = listen.unwrap_or_else(|| config.listen.clone());
            let app = Arc::new(App::open(config)?);
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(crate::http::serve(app, &listen))?;
            Ok(String::new())
        }
    }
}

fn classify_rows(model: &dyn TextClassifier, rows: Vec<InputText>) -> Result<Vec<PredictionRecord>, ServiceError> {
    let texts: Vec<&str> = rows.iter().map(|r| r.text.as_str()).collect();
    let preds = predict_batch(model, &texts);
    let mut records = Vec::with_capacity(rows.len());
    for (row, p) in rows.iter().zip(preds) {
        let prediction = p.map_err(|e| ServiceError::BadRequest(format!("comment `{}`: {e}", row.id)))?;
        records.push(PredictionRecord { id: row.id.clone(), source_id: row.source_id.clone(), prediction });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlertReport {
    pub rows: Vec<AlertRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<ColorAgreement>,
}

impl AlertReport {
    pub fn to_text(&self) -> String {
        let mut out = render_alert_table(&self.rows, false);
        if let Some(a) = &self.agreement {
            let ids = |v: &[antisexism_core::alerting::ColorMismatch]| {
                if v.is_empty() {
                    "none".to_string()
                } else {
                    v.iter().map(|m| m.source_id.as_str()).collect::<Vec<_>>().join(", ")
                }
            };
            let _ = writeln!(
                out,
                "agreement: {}/{} ({:.1}%), mismatches: {}, severe: {}",
                a.matches,
                a.total,
                a.fraction * 100.0,
                ids(&a.mismatches),
                ids(&a.severe_mismatches)
            );
        }
        out
    }
}

/// Alert table from a prediction file. Every prediction must name its
/// source. Gold labels without a `source_id` take the source of the
/// prediction with the same id. Sources come from the registry when given,
/// otherwise from the files.
pub fn alert_from_files(
    registry: Option<&Path>,
    predictions: &Path,
    gold: Option<&Path>,
    thresholds: &AlertThresholds,
) -> Result<AlertReport, ServiceError> {
    let preds: Vec<PredictionRecord> = jsonl::read_file(predictions)?;
    let mut source_of = BTreeMap::new();
    let mut predicted: BTreeMap<String, Vec<Label>> = BTreeMap::new();
    for p in &preds {
        let source = p
            .source_id
            .clone()
            .ok_or_else(|| ServiceError::BadRequest(format!("prediction `{}` has no source_id", p.id)))?;
        source_of.insert(p.id.clone(), source.clone());
        predicted.entry(source).or_default().push(p.prediction.label);
    }
    let mut ids: BTreeSet<String> = predicted.keys().cloned().collect();
    if let Some(path) = registry {
        let registered: BTreeSet<String> = load_source_registry(path)?.into_iter().map(|s| s.id).collect();
        if let Some(unknown) = ids.difference(&registered).next() {
            return Err(ServiceError::NotFound(format!("unknown source `{unknown}`")));
        }
        ids = registered;
    }
    let manual = match gold {
        Some(path) => {
            let mut manual: BTreeMap<String, Vec<Label>> = BTreeMap::new();
            for g in jsonl::read_file::<GoldRecord>(path)? {
                let source = g
                    .source_id
                    .or_else(|| source_of.get(&g.id).cloned())
                    .ok_or_else(|| ServiceError::BadRequest(format!("gold label `{}` has no source", g.id)))?;
                if !ids.contains(&source) {
                    return Err(ServiceError::NotFound(format!("unknown source `{source}`")));
                }
                manual.entry(source).or_default().push(g.label);
            }
            Some(manual)
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(ids.len());
    for id in &ids {
        let labels = predicted.get(id).cloned().unwrap_or_default();
        let predicted = aggregate_labels(id, labels, thresholds)?;
        let manual = match &manual {
            Some(m) => Some(aggregate_labels(id, m.get(id).cloned().unwrap_or_default(), thresholds)?),
            None => None,
        };
        rows.push(AlertRow { source_id: id.clone(), manual, predicted });
    }
    let agreement = match &manual {
        Some(_) => {
            let colored: Vec<&AlertRow> = rows
                .iter()
                .filter(|r| r.predicted.color.color().is_some() && r.manual.as_ref().and_then(|m| m.color.color()).is_some())
                .collect();
            let m = colored.iter().map(|r| (r.source_id.clone(), r.manual.as_ref().unwrap().color.color().unwrap())).collect();
            let p = colored.iter().map(|r| (r.source_id.clone(), r.predicted.color.color().unwrap())).collect();
            Some(color_agreement(&m, &p)?)
        }
        None => None,
    };
    Ok(AlertReport { rows, agreement })
}
