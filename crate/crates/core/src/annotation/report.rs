use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AnnotationError, FinalLabel, LabelCategory};
use crate::corpus::{facet_from_counts, ContentSource, Corpus, Facet, Gender, MediaKind, ProtagonistCount, SourceContext};
use crate::Label;

/// One row of the exported training set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingExample {
    pub text: String,
    pub label: Label,
}

impl TrainingExample {
    pub fn new(text: impl Into<String>, label: Label) -> Self {
        TrainingExample { text: text.into(), label }
    }
}

/// Share of `Yes` labels among the resolved comments of one facet category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SexistRate {
    pub sexist: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SexistRates {
    pub media_kind: BTreeMap<MediaKind, SexistRate>,
    pub protagonist_gender: BTreeMap<Gender, SexistRate>,
    pub protagonist_count: BTreeMap<ProtagonistCount, SexistRate>,
    pub context: BTreeMap<SourceContext, SexistRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelingReport {
    pub total: usize,
    pub overall: Facet<LabelCategory>,
    pub sexist_rate: SexistRates,
}

fn rates<K: Ord + Copy>(
    all: &[K],
    rows: &[(&ContentSource, LabelCategory)],
    key: impl Fn(&ContentSource) -> K,
) -> BTreeMap<K, SexistRate> {
    all.iter()
        .map(|&k| {
            let cell: Vec<_> = rows.iter().filter(|(s, _)| key(s) == k).collect();
            let sexist = cell.iter().filter(|(_, c)| *c == LabelCategory::Yes).count();
            let total = cell.len();
            let rate = if total == 0 { 0.0 } else { sexist as f64 / total as f64 };
            (k, SexistRate { sexist, total, rate })
        })
        .collect()
}

/// Distribution of final labels, overall and as per-facet sexist rates.
/// Labels whose comment is not in `corpus` only count toward the overall
/// distribution.
pub fn labeling_report<'a>(labels: impl IntoIterator<Item = &'a FinalLabel>, corpus: &Corpus) -> LabelingReport {
    let labels: Vec<&FinalLabel> = labels.into_iter().collect();
    let mut counts = BTreeMap::new();
    for l in &labels {
        *counts.entry(l.category).or_insert(0) += 1;
    }
    let rows: Vec<(&ContentSource, LabelCategory)> = labels
        .iter()
        .filter_map(|l| {
            let comment = corpus.comment(&l.comment_id)?;
            Some((corpus.source(&comment.source_id)?, l.category))
        })
        .collect();
    LabelingReport {
        total: labels.len(),
        overall: facet_from_counts(LabelCategory::ALL, &counts),
        sexist_rate: SexistRates {
            media_kind: rates(MediaKind::ALL, &rows, |s| s.media_kind),
            protagonist_gender: rates(Gender::ALL, &rows, |s| s.protagonist_gender),
            protagonist_count: rates(ProtagonistCount::ALL, &rows, |s| s.protagonist_count),
            context: rates(SourceContext::ALL, &rows, |s| s.context),
        },
    }
}

impl LabelingReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "resolved comments: {}", self.total);
        for (c, e) in &self.overall {
            let _ = writeln!(out, "  {:<20} {:>8} {:>7.2}%", c.as_str(), e.count, e.proportion * 100.0);
        }
        let _ = writeln!(out, "sexist rate by facet");
        let mut row = |name: String, r: &SexistRate| {
            let _ = writeln!(out, "  {:<20} {:>6}/{:<6} {:>7.2}%", name, r.sexist, r.total, r.rate * 100.0);
        };
        for (k, r) in &self.sexist_rate.media_kind {
            row(k.to_string(), r);
        }
        for (k, r) in &self.sexist_rate.protagonist_gender {
            row(k.to_string(), r);
        }
        for (k, r) in &self.sexist_rate.protagonist_count {
            row(format!("{k} (count)"), r);
        }
        for (k, r) in &self.sexist_rate.context {
            row(format!("{k} (context)"), r);
        }
        out
    }
}

/// Binary training set: `Yes` becomes sexist, `No` not sexist; every other
/// category is left out. Examples come out in comment-id order.
pub fn export_training_set<'a>(
    labels: impl IntoIterator<Item = &'a FinalLabel>,
    corpus: &Corpus,
) -> Result<Vec<TrainingExample>, AnnotationError> {
    let mut labels: Vec<&FinalLabel> = labels.into_iter().collect();
    labels.sort_by(|a, b| a.comment_id.cmp(&b.comment_id));
    let mut out = Vec::new();
    for l in labels {
        let Some(label) = l.category.to_label() else { continue };
        let comment = corpus
            .comment(&l.comment_id)
            .ok_or_else(|| AnnotationError::UnknownComment(l.comment_id.clone()))?;
        out.push(TrainingExample { text: comment.text.clone(), label });
    }
    Ok(out)
}
