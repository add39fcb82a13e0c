use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{ContentSource, CorpusError};

/// A public comment attached to a content source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub source_id: String,
    pub text: String,
    pub fetched_at: DateTime<Utc>,
}

/// A comment as produced by a fetcher, before it is attached to a source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    pub text: String,
    pub fetched_at: DateTime<Utc>,
}

impl From<Comment> for CommentRecord {
    fn from(c: Comment) -> Self {
        CommentRecord { id: c.id, text: c.text, fetched_at: c.fetched_at }
    }
}

/// NFC-normalizes and trims a comment. Casing, emojis and misspellings are
/// kept as written.
pub fn normalize_text(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// Position of the record in the ingested batch (0-based).
    pub index: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub ingested: usize,
    pub duplicates: Vec<String>,
    pub rejected: Vec<Rejection>,
}

/// Comment-count bounds for accepting a source into the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeBounds {
    pub min: usize,
    pub max: usize,
}

impl Default for VolumeBounds {
    fn default() -> Self {
        VolumeBounds { min: 15, max: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeStatus {
    BelowMin,
    InRange,
    AboveMax,
}

impl VolumeBounds {
    /// Both bounds are inclusive.
    pub fn classify(&self, count: usize) -> VolumeStatus {
        if count < self.min {
            VolumeStatus::BelowMin
        } else if count > self.max {
            VolumeStatus::AboveMax
        } else {
            VolumeStatus::InRange
        }
    }
}

/// In-memory registry of sources and their comments.
///
/// Comments are keyed by id; iteration order is id order, which keeps every
/// derived computation independent of ingestion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    sources: BTreeMap<String, ContentSource>,
    comments: BTreeMap<String, Comment>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sources(sources: impl IntoIterator<Item = ContentSource>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for source in sources {
            corpus.add_source(source)?;
        }
        Ok(corpus)
    }

    pub fn add_source(&mut self, source: ContentSource) -> Result<(), CorpusError> {
        source
            .validate()
            .map_err(|message| CorpusError::MalformedRecord { line: 0, message })?;
        if self.sources.contains_key(&source.id) {
            return Err(CorpusError::DuplicateSourceId { line: 0, id: source.id });
        }
        self.sources.insert(source.id.clone(), source);
        Ok(())
    }

    pub fn source(&self, id: &str) -> Option<&ContentSource> {
        self.sources.get(id)
    }

    pub fn sources(&self) -> impl Iterator<Item = &ContentSource> {
        self.sources.values()
    }

    pub fn comment(&self, id: &str) -> Option<&Comment> {
        self.comments.get(id)
    }

    pub fn comments(&self) -> impl Iterator<Item = &Comment> {
        self.comments.values()
    }

    pub fn comments_of<'a>(&'a self, source_id: &'a str) -> impl Iterator<Item = &'a Comment> + 'a {
        self.comments.values().filter(move |c| c.source_id == source_id)
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    /// Stores the valid records of `records` under `source_id`.
    ///
    /// Records whose id is already stored (or repeated earlier in the batch)
    /// are skipped and listed as duplicates; records with blank text are
    /// rejected with their batch index. Neither aborts the batch.
    pub fn ingest_comments(
        &mut self,
        source_id: &str,
        records: impl IntoIterator<Item = CommentRecord>,
    ) -> Result<IngestReport, CorpusError> {
        if !self.sources.contains_key(source_id) {
            return Err(CorpusError::UnknownSource(source_id.to_string()));
        }
        let mut report = IngestReport::default();
        for (index, record) in records.into_iter().enumerate() {
            if record.id.trim().is_empty() {
                report.rejected.push(Rejection { index, id: record.id, reason: "empty id".into() });
                continue;
            }
            let text = normalize_text(&record.text);
            if text.is_empty() {
                report.rejected.push(Rejection { index, id: record.id, reason: "empty text".into() });
                continue;
            }
            if self.comments.contains_key(&record.id) {
                report.duplicates.push(record.id);
                continue;
            }
            self.comments.insert(
                record.id.clone(),
                Comment { id: record.id, source_id: source_id.to_string(), text, fetched_at: record.fetched_at },
            );
            report.ingested += 1;
        }
        Ok(report)
    }

    /// Ingests full comment records, grouping them by their `source_id`.
    /// Reports are returned per source in id order.
    pub fn ingest_all(
        &mut self,
        comments: impl IntoIterator<Item = Comment>,
    ) -> Result<BTreeMap<String, IngestReport>, CorpusError> {
        let mut grouped: BTreeMap<String, Vec<CommentRecord>> = BTreeMap::new();
        for comment in comments {
            if !self.sources.contains_key(&comment.source_id) {
                return Err(CorpusError::UnknownSource(comment.source_id));
            }
            grouped.entry(comment.source_id.clone()).or_default().push(comment.into());
        }
        let mut reports = BTreeMap::new();
        for (source_id, records) in grouped {
            let report = self.ingest_comments(&source_id, records)?;
            reports.insert(source_id, report);
        }
        Ok(reports)
    }

    pub fn comment_count(&self, source_id: &str) -> Result<usize, CorpusError> {
        if !self.sources.contains_key(source_id) {
            return Err(CorpusError::UnknownSource(source_id.to_string()));
        }
        Ok(self.comments_of(source_id).count())
    }

    pub fn check_source_volume(&self, source_id: &str, bounds: VolumeBounds) -> Result<VolumeStatus, CorpusError> {
        Ok(bounds.classify(self.comment_count(source_id)?))
    }
}
