//! File-backed state of a deployment.
//!
//! Every entity type lives in its own append-only JSON Lines file inside the
//! data directory. Opening a [`DataStore`] replays the files into memory;
//! every mutation validates against the in-memory state first and is only
//! appended to disk once it has been accepted.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use antisexism_core::annotation::{AnnotationBook, AnnotationVote, FinalLabel, TrainingExample, VoteAck};
use antisexism_core::classifier::{Prediction, PredictionRecord};
use antisexism_core::corpus::{Comment, CommentRecord, ContentSource, Corpus, CorpusError, IngestReport};
use antisexism_core::evaluation::Metrics;
use antisexism_core::{annotation, jsonl};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const SOURCES_FILE: &str = "sources.jsonl";
pub const COMMENTS_FILE: &str = "comments.jsonl";
pub const VOTES_FILE: &str = "votes.jsonl";
pub const SAMPLE_FILE: &str = "sample.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const MODELS_DIR: &str = "models";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredPrediction {
    model: String,
    #[serde(flatten)]
    record: PredictionRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SampleEntry {
    id: String,
}

/// Evaluation result of one model, as kept in `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model: String,
    pub recorded_at: DateTime<Utc>,
    /// What was evaluated, e.g. `holdout` or `labeled_set`.
    pub dataset: String,
    pub metrics: Metrics,
}

#[derive(Debug)]
pub struct DataStore {
    dir: PathBuf,
    corpus: Corpus,
    book: AnnotationBook,
    sample: Vec<String>,
    predictions: BTreeMap<String, BTreeMap<String, Prediction>>,
    metrics: Vec<MetricsRecord>,
}

fn read_if_exists<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ServiceError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(jsonl::read_file(path)?)
}

fn append<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ServiceError> {
    if records.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| ServiceError::Io(e.into()))?;
        buf.push(b'\n');
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(&buf)?;
    file.sync_data()?;
    Ok(())
}

impl DataStore {
    /// Opens (creating if needed) the data directory and replays its files.
    pub fn open(dir: &Path, panel_size: usize) -> Result<Self, ServiceError> {
        fs::create_dir_all(dir.join(MODELS_DIR))?;
        let probe = dir.join(".write-probe");
        File::create(&probe).map_err(|e| ServiceError::Config(format!("{} is not writable: {e}", dir.display())))?;
        fs::remove_file(&probe)?;

        let mut store = DataStore {
            dir: dir.to_path_buf(),
            corpus: Corpus::new(),
            book: AnnotationBook::new(panel_size)?,
            sample: Vec::new(),
            predictions: BTreeMap::new(),
            metrics: Vec::new(),
        };
        for source in read_if_exists::<ContentSource>(&dir.join(SOURCES_FILE))? {
            store.corpus.add_source(source)?;
        }
        let comments: Vec<Comment> = read_if_exists(&dir.join(COMMENTS_FILE))?;
        store.book.register_comments(comments.iter().map(|c| c.id.clone()));
        store.corpus.ingest_all(comments)?;
        for vote in read_if_exists::<AnnotationVote>(&dir.join(VOTES_FILE))? {
            store.apply_vote(vote)?;
        }
        store.sample = read_if_exists::<SampleEntry>(&dir.join(SAMPLE_FILE))?.into_iter().map(|e| e.id).collect();
        for p in read_if_exists::<StoredPrediction>(&dir.join(PREDICTIONS_FILE))? {
            store.predictions.entry(p.model).or_default().insert(p.record.id, p.record.prediction);
        }
        store.metrics = read_if_exists(&dir.join(METRICS_FILE))?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn models_dir(&self) -> PathBuf {
        self.dir.join(MODELS_DIR)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn book(&self) -> &AnnotationBook {
        &self.book
    }

    pub fn register_annotator(&mut self, id: &str) {
        self.book.register_annotator(id);
    }

    /// Registers new sources. A source already present with identical fields
    /// is skipped; one with different fields is an error.
    pub fn add_sources(&mut self, sources: Vec<ContentSource>) -> Result<usize, ServiceError> {
        let mut added = Vec::new();
        for source in sources {
            match self.corpus.source(&source.id) {
                Some(existing) if *existing == source => continue,
                Some(_) => {
                    return Err(ServiceError::Corpus(CorpusError::DuplicateSourceId { line: 0, id: source.id }));
                }
                None => {}
            }
            self.corpus.add_source(source.clone())?;
            added.push(source);
        }
        append(&self.dir.join(SOURCES_FILE), &added)?;
        Ok(added.len())
    }

    pub fn ingest(&mut self, source_id: &str, records: Vec<CommentRecord>) -> Result<IngestReport, ServiceError> {
        let fresh: Vec<String> = records
            .iter()
            .filter(|r| self.corpus.comment(&r.id).is_none())
            .map(|r| r.id.clone())
            .collect();
        let report = self.corpus.ingest_comments(source_id, records)?;
        let mut stored = Vec::new();
        for id in fresh {
            if let Some(c) = self.corpus.comment(&id) {
                if c.source_id == source_id && !stored.iter().any(|s: &Comment| s.id == id) {
                    stored.push(c.clone());
                }
            }
        }
        self.book.register_comments(stored.iter().map(|c| c.id.clone()));
        append(&self.dir.join(COMMENTS_FILE), &stored)?;
        Ok(report)
    }

    fn apply_vote(&mut self, vote: AnnotationVote) -> Result<(VoteAck, Option<FinalLabel>), ServiceError> {
        self.book.register_annotator(vote.annotator_id.clone());
        let comment_id = vote.comment_id.clone();
        let ack = self.book.record_vote(vote)?;
        let label = if ack.votes_cast >= ack.panel_size { Some(self.book.resolve_label(&comment_id)?) } else { None };
        Ok((ack, label))
    }

    /// Records a vote, resolving the comment once its panel is complete.
    pub fn vote(&mut self, vote: AnnotationVote) -> Result<(VoteAck, Option<FinalLabel>), ServiceError> {
        let out = self.apply_vote(vote.clone())?;
        append(&self.dir.join(VOTES_FILE), &[vote])?;
        Ok(out)
    }

    /// Comments offered to annotators, in order: the stored sample when one
    /// was drawn, otherwise every comment.
    pub fn annotation_queue(&self) -> Vec<&str> {
        if self.sample.is_empty() {
            self.corpus.comments().map(|c| c.id.as_str()).collect()
        } else {
            self.sample.iter().map(String::as_str).collect()
        }
    }

    pub fn sample(&self) -> &[String] {
        &self.sample
    }

    /// Replaces the stored sample.
    pub fn set_sample(&mut self, ids: Vec<String>) -> Result<(), ServiceError> {
        if let Some(bad) = ids.iter().find(|id| self.corpus.comment(id).is_none()) {
            return Err(ServiceError::NotFound(format!("unknown comment `{bad}`")));
        }
        let entries: Vec<SampleEntry> = ids.iter().map(|id| SampleEntry { id: id.clone() }).collect();
        let path = self.dir.join(SAMPLE_FILE);
        let tmp = self.dir.join(format!("{SAMPLE_FILE}.tmp"));
        jsonl::write_file(&tmp, &entries)?;
        fs::rename(&tmp, &path)?;
        self.sample = ids;
        Ok(())
    }

    pub fn training_set(&self) -> Result<Vec<TrainingExample>, ServiceError> {
        Ok(annotation::export_training_set(self.book.final_labels(), &self.corpus)?)
    }

    pub fn prediction(&self, model: &str, comment_id: &str) -> Option<&Prediction> {
        self.predictions.get(model)?.get(comment_id)
    }

    /// Comments of `source_id` (all sources when `None`) that have no
    /// prediction under `model`.
    pub fn unpredicted(&self, model: &str, source_id: Option<&str>) -> Vec<Comment> {
        let done = self.predictions.get(model);
        self.corpus
            .comments()
            .filter(|c| source_id.is_none_or(|s| c.source_id == s))
            .filter(|c| done.is_none_or(|d| !d.contains_key(&c.id)))
            .cloned()
            .collect()
    }

    pub fn add_predictions(&mut self, model: &str, records: Vec<PredictionRecord>) -> Result<(), ServiceError> {
        let table = self.predictions.entry(model.to_string()).or_default();
        let mut fresh = Vec::new();
        for r in records {
            if table.contains_key(&r.id) {
                continue;
            }
            table.insert(r.id.clone(), r.prediction);
            fresh.push(StoredPrediction { model: model.to_string(), record: r });
        }
        append(&self.dir.join(PREDICTIONS_FILE), &fresh)
    }

    pub fn add_metrics(&mut self, record: MetricsRecord) -> Result<(), ServiceError> {
        append(&self.dir.join(METRICS_FILE), std::slice::from_ref(&record))?;
        self.metrics.push(record);
        Ok(())
    }

    pub fn latest_metrics(&self) -> Option<&MetricsRecord> {
        self.metrics.last()
    }
}
