//! Operations behind every endpoint and stateful command. HTTP handlers and
//! CLI commands only decode their input, call one of these and encode the
//! result.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use antisexism_core::alerting::{aggregate_labels, AlertThresholds, SourceAlert};
use antisexism_core::annotation::{labeling_report, AnnotationVote, FinalLabel, LabelCategory, LabelingReport, TrainingExample, VoteAck};
use antisexism_core::classifier::{evaluate_model, predict, predict_batch, Prediction, PredictionRecord, DEFAULT_SPLIT_RATIO};
use antisexism_core::corpus::{
    corpus_stats, select_balanced_sample, BalancedSample, Comment, CommentRecord, ContentSource, CorpusStats, Fetcher,
    IngestReport, SamplingTargets,
};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::models::{self, LoadedModel};
use crate::store::{DataStore, MetricsRecord};
use crate::{ErrorBody, ServiceConfig, ServiceError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkComment {
    pub id: String,
    pub text: String,
    /// Defaults to the time of ingestion.
    #[serde(default)]
    pub fetched_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkRequest {
    pub source_id: String,
    pub comments: Vec<BulkComment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceInfo {
    #[serde(flatten)]
    pub source: ContentSource,
    pub n_comments: usize,
}

/// What-if overrides of the configured thresholds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub red: Option<f64>,
    pub yellow: Option<f64>,
    pub min: Option<usize>,
}

impl ThresholdQuery {
    pub fn apply(&self, base: AlertThresholds) -> Result<AlertThresholds, ServiceError> {
        let t = AlertThresholds {
            red_min: self.red.unwrap_or(base.red_min),
            yellow_min: self.yellow.unwrap_or(base.yellow_min),
            min_comments: self.min.unwrap_or(base.min_comments),
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRequest {
    pub comment_id: String,
    pub category: LabelCategory,
    #[serde(default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteResponse {
    #[serde(flatten)]
    pub ack: VoteAck,
    /// Present once the vote completed the panel.
    pub final_label: Option<FinalLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NextComment {
    pub comment_id: String,
    pub text: String,
    /// Comments of the queue this annotator has voted on.
    pub voted: usize,
    pub queue_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<ContentSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelState {
    pub comment_id: String,
    pub votes_cast: usize,
    pub panel_size: usize,
    pub frozen: bool,
    pub final_label: Option<FinalLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    FineTune,
    Evaluate,
    BulkClassify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobStatus {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub submitted_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub summary: Option<Value>,
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRequest {
    /// Train the linear baseline instead of the transformer. Defaults to the
    /// service setting.
    pub baseline: Option<bool>,
    pub ratio: Option<f64>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub corpus: CorpusStats,
    pub labels: LabelingReport,
    pub latest_metrics: Option<MetricsRecord>,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = self.corpus.to_table();
        out.push('\n');
        out.push_str(&self.labels.to_table());
        if let Some(m) = &self.latest_metrics {
            out.push_str(&format!("\nlatest metrics: model {} on {} ({})\n", m.model, m.dataset, m.recorded_at));
            out.push_str(&m.metrics.to_table());
        }
        out
    }
}

pub struct App {
    config: ServiceConfig,
    store: Mutex<DataStore>,
    model: RwLock<Option<Arc<LoadedModel>>>,
    jobs: Mutex<BTreeMap<String, JobStatus>>,
    next_job: AtomicU64,
    train_lock: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl App {
    /// Opens the data directory and loads the configured model, if any.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let mut store = DataStore::open(&config.data_dir, config.panel_size)?;
        for a in &config.annotators {
            store.register_annotator(&a.annotator_id);
        }
        let model = match config.model_path() {
            Some(dir) => Some(models::load_model(&dir)?),
            None => None,
        };
        Ok(App {
            config,
            store: Mutex::new(store),
            model: RwLock::new(model),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
            train_lock: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn model(&self) -> Option<Arc<LoadedModel>> {
        self.model.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn require_model(&self) -> Result<Arc<LoadedModel>, ServiceError> {
        self.model().ok_or(ServiceError::NoModel)
    }

    pub fn set_model(&self, model: Option<Arc<LoadedModel>>) {
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = model;
    }

    fn store(&self) -> MutexGuard<'_, DataStore> {
        lock(&self.store)
    }

    pub fn classify(&self, req: &ClassifyRequest) -> Result<Prediction, ServiceError> {
        if req.text.trim().is_empty() {
            return Err(ServiceError::BadRequest("text is empty".into()));
        }
        let model = self.require_model()?;
        Ok(predict(model.model.as_ref(), &req.text)?)
    }

    pub fn add_sources(&self, sources: Vec<ContentSource>) -> Result<usize, ServiceError> {
        self.store().add_sources(sources)
    }

    pub fn bulk_ingest(&self, req: BulkRequest) -> Result<IngestReport, ServiceError> {
        let now = Utc::now();
        let records = req
            .comments
            .into_iter()
            .map(|c| CommentRecord { id: c.id, text: c.text, fetched_at: c.fetched_at.unwrap_or(now) })
            .collect();
        self.store().ingest(&req.source_id, records)
    }

    /// Ingests full comment rows, grouped by source in id order.
    pub fn ingest_comments(&self, comments: Vec<Comment>) -> Result<BTreeMap<String, IngestReport>, ServiceError> {
        let mut grouped: BTreeMap<String, Vec<CommentRecord>> = BTreeMap::new();
        for c in comments {
            grouped.entry(c.source_id.clone()).or_default().push(c.into());
        }
        let mut store = self.store();
        for id in grouped.keys() {
            if store.corpus().source(id).is_none() {
                return Err(ServiceError::NotFound(format!("unknown source `{id}`")));
            }
        }
        let mut reports = BTreeMap::new();
        for (id, records) in grouped {
            let report = store.ingest(&id, records)?;
            reports.insert(id, report);
        }
        Ok(reports)
    }

    /// Pulls the comments of every registered source through `fetcher`.
    pub fn fetch_all(&self, fetcher: &dyn Fetcher) -> Result<BTreeMap<String, IngestReport>, ServiceError> {
        let sources: Vec<ContentSource> = self.store().corpus().sources().cloned().collect();
        let mut reports = BTreeMap::new();
        for source in sources {
            let records = fetcher.fetch(&source).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            reports.insert(source.id.clone(), self.store().ingest(&source.id, records)?);
        }
        Ok(reports)
    }

    pub fn list_sources(&self) -> Vec<SourceInfo> {
        let store = self.store();
        store
            .corpus()
            .sources()
            .map(|s| SourceInfo { source: s.clone(), n_comments: store.corpus().comments_of(&s.id).count() })
            .collect()
    }

    /// Predicts every comment of `source_id` (all when `None`) still missing
    /// a prediction under the active model. Returns how many were added.
    fn ensure_predictions(&self, model: &LoadedModel, source_id: Option<&str>) -> Result<usize, ServiceError> {
        let pending = self.store().unpredicted(&model.id, source_id);
        if pending.is_empty() {
            return Ok(0);
        }
        let texts: Vec<&str> = pending.iter().map(|c| c.text.as_str()).collect();
        let mut records = Vec::with_capacity(pending.len());
        for (c, p) in pending.iter().zip(predict_batch(model.model.as_ref(), &texts)) {
            records.push(PredictionRecord { id: c.id.clone(), source_id: Some(c.source_id.clone()), prediction: p? });
        }
        let n = records.len();
        self.store().add_predictions(&model.id, records)?;
        Ok(n)
    }

    /// Alert of one source from the stored predictions of the active model,
    /// predicting whatever is still missing first.
    fn alert_for(&self, model: &LoadedModel, source_id: &str, t: &AlertThresholds) -> Result<SourceAlert, ServiceError> {
        loop {
            self.ensure_predictions(model, Some(source_id))?;
            let store = self.store();
            let labels: Option<Vec<_>> = store
                .corpus()
                .comments_of(source_id)
                .map(|c| store.prediction(&model.id, &c.id).map(|p| p.label))
                .collect();
            if let Some(labels) = labels {
                return Ok(aggregate_labels(source_id, labels, t)?);
            }
        }
    }

    pub fn source_alert(&self, source_id: &str, q: &ThresholdQuery) -> Result<SourceAlert, ServiceError> {
        let t = q.apply(self.config.thresholds)?;
        if self.store().corpus().source(source_id).is_none() {
            return Err(ServiceError::NotFound(format!("unknown source `{source_id}`")));
        }
        let model = self.require_model()?;
        self.alert_for(&model, source_id, &t)
    }

    /// Alert of every registered source, in id order.
    pub fn alerts(&self, q: &ThresholdQuery) -> Result<Vec<SourceAlert>, ServiceError> {
        let t = q.apply(self.config.thresholds)?;
        let model = self.require_model()?;
        self.ensure_predictions(&model, None)?;
        let ids: Vec<String> = self.store().corpus().sources().map(|s| s.id.clone()).collect();
        ids.iter().map(|id| self.alert_for(&model, id, &t)).collect()
    }

    fn annotator(&self, token: Option<&str>) -> Result<String, ServiceError> {
        token
            .and_then(|t| self.config.annotator_for(t))
            .map(str::to_string)
            .ok_or(ServiceError::Unauthorized)
    }

    pub fn vote(&self, token: Option<&str>, req: VoteRequest) -> Result<VoteResponse, ServiceError> {
        let annotator_id = self.annotator(token)?;
        let vote = AnnotationVote {
            comment_id: req.comment_id,
            annotator_id,
            category: req.category,
            cast_at: Utc::now(),
            reason: req.reason,
        };
        let (ack, final_label) = self.store().vote(vote)?;
        Ok(VoteResponse { ack, final_label })
    }

    /// Records votes from a file. Annotators are taken from the votes.
    pub fn import_votes(&self, votes: Vec<AnnotationVote>) -> Result<usize, ServiceError> {
        let mut store = self.store();
        let n = votes.len();
        for v in votes {
            store.vote(v)?;
        }
        Ok(n)
    }

    pub fn next_comment(&self, token: Option<&str>) -> Result<Option<NextComment>, ServiceError> {
        let annotator_id = self.annotator(token)?;
        let store = self.store();
        let queue = store.annotation_queue();
        let voted = queue.iter().filter(|c| store.book().has_voted(c, &annotator_id)).count();
        let Some(id) = store.book().next_in(&annotator_id, queue.iter().copied()) else {
            return Ok(None);
        };
        let comment = store.corpus().comment(id).expect("queued comments are stored");
        let source = if self.config.show_source_metadata { store.corpus().source(&comment.source_id).cloned() } else { None };
        Ok(Some(NextComment { comment_id: id.to_string(), text: comment.text.clone(), voted, queue_size: queue.len(), source }))
    }

    pub fn comment_label(&self, comment_id: &str) -> Result<LabelState, ServiceError> {
        let store = self.store();
        if store.corpus().comment(comment_id).is_none() {
            return Err(ServiceError::NotFound(format!("unknown comment `{comment_id}`")));
        }
        let book = store.book();
        Ok(LabelState {
            comment_id: comment_id.to_string(),
            votes_cast: book.vote_count(comment_id),
            panel_size: book.panel_size(),
            frozen: book.is_frozen(comment_id),
            final_label: book.final_label(comment_id).cloned(),
        })
    }

    pub fn sample(&self, targets: &SamplingTargets, seed: u64) -> Result<BalancedSample, ServiceError> {
        let mut store = self.store();
        let sample = select_balanced_sample(store.corpus(), targets, seed)?;
        store.set_sample(sample.comments.iter().map(|c| c.id.clone()).collect())?;
        Ok(sample)
    }

    pub fn training_set(&self) -> Result<Vec<TrainingExample>, ServiceError> {
        self.store().training_set()
    }

    pub fn latest_metrics(&self) -> Result<MetricsRecord, ServiceError> {
        self.store().latest_metrics().cloned().ok_or_else(|| ServiceError::NotFound("no metrics recorded".into()))
    }

    pub fn report(&self) -> Report {
        let store = self.store();
        Report {
            corpus: corpus_stats(store.corpus()),
            labels: labeling_report(store.book().final_labels(), store.corpus()),
            latest_metrics: store.latest_metrics().cloned(),
        }
    }

    /// Trains on the resolved labels, stores the artifact and makes it the
    /// active model. Only one training runs at a time.
    pub fn train(&self, req: &TrainRequest) -> Result<Value, ServiceError> {
        let _guard = lock(&self.train_lock);
        let mut config = self.config.classifier.clone();
        if let Some(e) = req.epochs {
            config.epochs = e;
        }
        let ratio = req.ratio.unwrap_or(DEFAULT_SPLIT_RATIO);
        let examples = self.training_set()?;
        let trained = models::train(&examples, ratio, &config, req.baseline.unwrap_or(self.config.baseline))?;
        let models_dir = self.store().models_dir();
        let loaded = models::store_model(&models_dir, trained.as_ref())?;
        let summary = loaded.model.summary().clone();
        if let Some(m) = &summary.holdout {
            self.store().add_metrics(MetricsRecord {
                model: loaded.id.clone(),
                recorded_at: Utc::now(),
                dataset: "holdout".into(),
                metrics: m.clone(),
            })?;
        }
        let id = loaded.id.clone();
        self.set_model(Some(loaded));
        Ok(json!({ "model_id": id, "training": summary }))
    }

    /// Scores the active model against every resolved label.
    pub fn evaluate_labeled(&self) -> Result<MetricsRecord, ServiceError> {
        let model = self.require_model()?;
        let examples = self.training_set()?;
        let metrics = evaluate_model(model.model.as_ref(), &examples)?;
        let record = MetricsRecord { model: model.id.clone(), recorded_at: Utc::now(), dataset: "labeled_set".into(), metrics };
        self.store().add_metrics(record.clone())?;
        Ok(record)
    }

    pub fn classify_all(&self) -> Result<Value, ServiceError> {
        let model = self.require_model()?;
        let n = self.ensure_predictions(&model, None)?;
        Ok(json!({ "model_id": model.id, "classified": n }))
    }

    pub fn submit_job(self: &Arc<Self>, kind: JobKind, req: TrainRequest) -> Result<JobStatus, ServiceError> {
        if kind != JobKind::FineTune {
            self.require_model()?;
        }
        let id = format!("job-{}", self.next_job.fetch_add(1, Ordering::Relaxed));
        let status = JobStatus {
            id: id.clone(),
            kind,
            state: JobState::Queued,
            submitted_at: Utc::now(),
            finished_at: None,
            summary: None,
            error: None,
        };
        lock(&self.jobs).insert(id.clone(), status.clone());
        let app = Arc::clone(self);
        std::thread::spawn(move || {
            app.update_job(&id, JobState::Running, None, None);
            let result = match kind {
                JobKind::FineTune => app.train(&req),
                JobKind::Evaluate => app.evaluate_labeled().map(|r| json!(r)),
                JobKind::BulkClassify => app.classify_all(),
            };
            match result {
                Ok(summary) => app.update_job(&id, JobState::Done, Some(summary), None),
                Err(e) => app.update_job(&id, JobState::Failed, None, Some(e.body())),
            }
        });
        Ok(status)
    }

    fn update_job(&self, id: &str, state: JobState, summary: Option<Value>, error: Option<ErrorBody>) {
        let mut jobs = lock(&self.jobs);
        let Some(job) = jobs.get_mut(id) else { return };
        if job.state.is_terminal() {
            return;
        }
        job.state = state;
        if state.is_terminal() {
            job.finished_at = Some(Utc::now());
            job.summary = summary;
            job.error = error;
        }
    }

    pub fn job(&self, id: &str) -> Result<JobStatus, ServiceError> {
        lock(&self.jobs).get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("unknown job `{id}`")))
    }
}
