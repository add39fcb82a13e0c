use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

use super::{Comment, ContentSource, Corpus, Gender, MediaKind, ProtagonistCount, SourceContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FacetEntry {
    pub count: usize,
    /// Fraction of the facet total; 0 when the total is 0.
    pub proportion: f64,
}

/// Counts per category of one taxonomy facet. Every category is present,
/// including those with zero comments.
pub type Facet<K> = BTreeMap<K, FacetEntry>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total: usize,
    pub media_kind: Facet<MediaKind>,
    pub protagonist_gender: Facet<Gender>,
    pub protagonist_count: Facet<ProtagonistCount>,
    pub context: Facet<SourceContext>,
}

pub(crate) fn facet_from_counts<K: Ord + Copy>(all: &[K], counts: &BTreeMap<K, usize>) -> Facet<K> {
    let total: usize = counts.values().sum();
    all.iter()
        .map(|&k| {
            let count = counts.get(&k).copied().unwrap_or(0);
            let proportion = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            (k, FacetEntry { count, proportion })
        })
        .collect()
}

pub(crate) fn facet_of<'a, K: Ord + Copy>(
    all: &[K],
    items: impl Iterator<Item = &'a ContentSource>,
    key: impl Fn(&ContentSource) -> K,
) -> Facet<K> {
    let mut counts = BTreeMap::new();
    for source in items {
        *counts.entry(key(source)).or_insert(0) += 1;
    }
    facet_from_counts(all, &counts)
}

/// Facet statistics over an arbitrary set of comments of `corpus`.
/// Comments whose source is not registered are ignored.
pub fn stats_for<'a>(corpus: &'a Corpus, comments: impl Iterator<Item = &'a Comment>) -> CorpusStats {
    let sources: Vec<&ContentSource> = comments.filter_map(|c| corpus.source(&c.source_id)).collect();
    CorpusStats {
        total: sources.len(),
        media_kind: facet_of(MediaKind::ALL, sources.iter().copied(), |s| s.media_kind),
        protagonist_gender: facet_of(Gender::ALL, sources.iter().copied(), |s| s.protagonist_gender),
        protagonist_count: facet_of(ProtagonistCount::ALL, sources.iter().copied(), |s| s.protagonist_count),
        context: facet_of(SourceContext::ALL, sources.iter().copied(), |s| s.context),
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    stats_for(corpus, corpus.comments())
}

fn write_facet<K: fmt::Display>(out: &mut String, name: &str, facet: &Facet<K>) {
    let _ = writeln!(out, "{name}");
    for (k, e) in facet {
        let _ = writeln!(out, "  {:<16} {:>8} {:>7.2}%", k.to_string(), e.count, e.proportion * 100.0);
    }
}

impl CorpusStats {
    /// Plain-text table, one block per facet.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total comments: {}", self.total);
        write_facet(&mut out, "media kind", &self.media_kind);
        write_facet(&mut out, "protagonist gender", &self.protagonist_gender);
        write_facet(&mut out, "number of protagonists", &self.protagonist_count);
        write_facet(&mut out, "context", &self.context);
        out
    }
}
