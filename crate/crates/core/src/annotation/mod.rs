//! Human labeling: per-annotator votes over four categories, majority-vote
//! resolution and export of the binary training set.

mod report;

pub use report::{export_training_set, labeling_report, LabelingReport, SexistRate, SexistRates, TrainingExample};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PANEL_SIZE: usize = 4;

/// Suggested reasons for discarding a comment.
pub const DISCARD_REASONS: &[&str] = &[
    "many spelling or grammatical errors",
    "mostly non-alphanumeric characters",
    "unclear intention or doubtful sarcasm",
    "unintelligible",
    "duplicate comment",
    "not in Spanish",
    "incomplete comment",
    "depends on other media such as images",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelCategory {
    /// The comment clearly has a sexist connotation.
    Yes,
    /// The comment clearly has no sexist connotation.
    No,
    /// The comment cannot be used (noise, other language, image-dependent...).
    Discard,
    /// Sexism cannot be decided without the surrounding conversation.
    DependsOnContext,
}

impl LabelCategory {
    pub const ALL: &'static [LabelCategory] =
        &[LabelCategory::Yes, LabelCategory::No, LabelCategory::Discard, LabelCategory::DependsOnContext];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelCategory::Yes => "yes",
            LabelCategory::No => "no",
            LabelCategory::Discard => "discard",
            LabelCategory::DependsOnContext => "depends_on_context",
        }
    }

    pub fn to_label(self) -> Option<crate::Label> {
        match self {
            LabelCategory::Yes => Some(crate::Label::Sexist),
            LabelCategory::No => Some(crate::Label::NotSexist),
            _ => None,
        }
    }
}

impl fmt::Display for LabelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelCategory::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationVote {
    pub comment_id: String,
    pub annotator_id: String,
    pub category: LabelCategory,
    pub cast_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedBy {
    StrictMajority,
    TieRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalLabel {
    pub comment_id: String,
    pub category: LabelCategory,
    pub vote_counts: BTreeMap<LabelCategory, usize>,
    pub resolved_by: ResolvedBy,
}

impl FinalLabel {
    pub fn total_votes(&self) -> usize {
        self.vote_counts.values().sum()
    }
}

/// Outcome of majority voting over one panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub category: LabelCategory,
    pub vote_counts: BTreeMap<LabelCategory, usize>,
    pub resolved_by: ResolvedBy,
}

/// Majority vote: the category with more than half of the votes wins;
/// without such a category the comment depends on the context.
pub fn resolve_votes(votes: impl IntoIterator<Item = LabelCategory>) -> Resolution {
    let mut vote_counts = BTreeMap::new();
    let mut total = 0;
    for v in votes {
        *vote_counts.entry(v).or_insert(0) += 1;
        total += 1;
    }
    match vote_counts.iter().find(|(_, &n)| 2 * n > total) {
        Some((&category, _)) => Resolution { category, vote_counts, resolved_by: ResolvedBy::StrictMajority },
        None => Resolution { category: LabelCategory::DependsOnContext, vote_counts, resolved_by: ResolvedBy::TieRule },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("unknown comment `{0}`")]
    UnknownComment(String),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("comment `{0}` is resolved and frozen")]
    Frozen(String),
    #[error("comment `{comment_id}` already has a full panel of {panel_size} votes")]
    PanelFull { comment_id: String, panel_size: usize },
    #[error("comment `{comment_id}` has {have} of {need} votes")]
    IncompletePanel { comment_id: String, have: usize, need: usize },
    #[error("panel size must be at least 1")]
    InvalidPanelSize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub vote: AnnotationVote,
    /// Category this submission replaced, if the annotator had voted before.
    pub replaced: Option<LabelCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteAck {
    pub comment_id: String,
    pub votes_cast: usize,
    pub panel_size: usize,
    pub replaced: bool,
}

/// Votes and final labels for a set of comments and a pre-registered panel of
/// annotators.
///
/// Annotators may change their vote until the comment is resolved. A resolved
/// comment is frozen until [`AnnotationBook::reopen`] is called.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationBook {
    panel_size: usize,
    annotators: BTreeSet<String>,
    comments: BTreeSet<String>,
    votes: BTreeMap<String, BTreeMap<String, AnnotationVote>>,
    audit: Vec<AuditEntry>,
    resolved: BTreeMap<String, FinalLabel>,
}

impl Default for AnnotationBook {
    fn default() -> Self {
        AnnotationBook::new(DEFAULT_PANEL_SIZE).expect("default panel size is valid")
    }
}

impl AnnotationBook {
    pub fn new(panel_size: usize) -> Result<Self, AnnotationError> {
        if panel_size == 0 {
            return Err(AnnotationError::InvalidPanelSize);
        }
        Ok(AnnotationBook {
            panel_size,
            annotators: BTreeSet::new(),
            comments: BTreeSet::new(),
            votes: BTreeMap::new(),
            audit: Vec::new(),
            resolved: BTreeMap::new(),
        })
    }

    pub fn panel_size(&self) -> usize {
        self.panel_size
    }

    pub fn register_annotator(&mut self, id: impl Into<String>) {
        self.annotators.insert(id.into());
    }

    pub fn register_comment(&mut self, id: impl Into<String>) {
        self.comments.insert(id.into());
    }

    pub fn register_comments<I, S>(&mut self, ids: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.comments.extend(ids.into_iter().map(Into::into));
    }

    pub fn comment_ids(&self) -> impl Iterator<Item = &str> {
        self.comments.iter().map(String::as_str)
    }

    pub fn has_comment(&self, id: &str) -> bool {
        self.comments.contains(id)
    }

    pub fn has_annotator(&self, id: &str) -> bool {
        self.annotators.contains(id)
    }

    pub fn votes_for(&self, comment_id: &str) -> impl Iterator<Item = &AnnotationVote> {
        self.votes.get(comment_id).into_iter().flat_map(|m| m.values())
    }

    pub fn vote_count(&self, comment_id: &str) -> usize {
        self.votes.get(comment_id).map_or(0, BTreeMap::len)
    }

    pub fn has_voted(&self, comment_id: &str, annotator_id: &str) -> bool {
        self.votes.get(comment_id).is_some_and(|m| m.contains_key(annotator_id))
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn audit_for<'a>(&'a self, comment_id: &'a str) -> impl Iterator<Item = &'a AuditEntry> + 'a {
        self.audit.iter().filter(move |e| e.vote.comment_id == comment_id)
    }

    pub fn is_frozen(&self, comment_id: &str) -> bool {
        self.resolved.contains_key(comment_id)
    }

    pub fn final_label(&self, comment_id: &str) -> Option<&FinalLabel> {
        self.resolved.get(comment_id)
    }

    pub fn final_labels(&self) -> impl Iterator<Item = &FinalLabel> {
        self.resolved.values()
    }

    /// Stores a vote. A second vote by the same annotator on the same comment
    /// replaces the first; both submissions stay in the audit log.
    pub fn record_vote(&mut self, vote: AnnotationVote) -> Result<VoteAck, AnnotationError> {
        if !self.comments.contains(&vote.comment_id) {
            return Err(AnnotationError::UnknownComment(vote.comment_id));
        }
        if !self.annotators.contains(&vote.annotator_id) {
            return Err(AnnotationError::UnknownAnnotator(vote.annotator_id));
        }
        if self.is_frozen(&vote.comment_id) {
            return Err(AnnotationError::Frozen(vote.comment_id));
        }
        let panel = self.votes.entry(vote.comment_id.clone()).or_default();
        let replaced = panel.get(&vote.annotator_id).map(|v| v.category);
        if replaced.is_none() && panel.len() >= self.panel_size {
            return Err(AnnotationError::PanelFull { comment_id: vote.comment_id, panel_size: self.panel_size });
        }
        panel.insert(vote.annotator_id.clone(), vote.clone());
        let ack = VoteAck {
            comment_id: vote.comment_id.clone(),
            votes_cast: panel.len(),
            panel_size: self.panel_size,
            replaced: replaced.is_some(),
        };
        self.audit.push(AuditEntry { vote, replaced });
        Ok(ack)
    }

    /// Resolves and freezes a comment once its panel is complete. Resolving
    /// an already frozen comment returns the stored label.
    pub fn resolve_label(&mut self, comment_id: &str) -> Result<FinalLabel, AnnotationError> {
        if let Some(label) = self.resolved.get(comment_id) {
            return Ok(label.clone());
        }
        if !self.comments.contains(comment_id) {
            return Err(AnnotationError::UnknownComment(comment_id.to_string()));
        }
        let have = self.vote_count(comment_id);
        if have < self.panel_size {
            return Err(AnnotationError::IncompletePanel {
                comment_id: comment_id.to_string(),
                have,
                need: self.panel_size,
            });
        }
        let resolution = resolve_votes(self.votes_for(comment_id).map(|v| v.category));
        let label = FinalLabel {
            comment_id: comment_id.to_string(),
            category: resolution.category,
            vote_counts: resolution.vote_counts,
            resolved_by: resolution.resolved_by,
        };
        self.resolved.insert(comment_id.to_string(), label.clone());
        Ok(label)
    }

    /// Resolves every comment with a complete panel. Returns how many new
    /// labels were produced.
    pub fn resolve_complete(&mut self) -> usize {
        let ready: Vec<String> = self
            .comments
            .iter()
            .filter(|c| !self.resolved.contains_key(*c) && self.vote_count(c) >= self.panel_size)
            .cloned()
            .collect();
        for id in &ready {
            self.resolve_label(id).expect("panel is complete");
        }
        ready.len()
    }

    /// Unfreezes a resolved comment so that votes can be changed again.
    pub fn reopen(&mut self, comment_id: &str) -> Option<FinalLabel> {
        self.resolved.remove(comment_id)
    }

    /// First comment, in id order, that `annotator_id` has not voted on and
    /// that still accepts votes.
    pub fn next_for(&self, annotator_id: &str) -> Option<&str> {
        self.next_in(annotator_id, self.comments.iter().map(String::as_str))
    }

    /// Like [`next_for`](Self::next_for) but restricted to `candidates`, in
    /// their given order.
    pub fn next_in<'a>(&self, annotator_id: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
        candidates.into_iter().find(|c| {
            self.comments.contains(*c)
                && !self.is_frozen(c)
                && !self.has_voted(c, annotator_id)
                && self.vote_count(c) < self.panel_size
        })
    }
}
