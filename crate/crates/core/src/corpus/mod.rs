//! Content-source registry, comment store, descriptive statistics and
//! balanced sampling.

mod fetch;
mod sampling;
mod source;
mod stats;
mod store;

pub use fetch::{FetchError, Fetcher, FixtureFetcher, UnavailableFetcher};
pub use sampling::{select_balanced_sample, BalancedSample, FacetDeviation, SamplingTargets};
pub use source::{
    load_source_registry, parse_source_registry, ContentSource, Gender, MediaKind, ProtagonistCount, SourceContext,
};
pub use stats::{corpus_stats, stats_for, CorpusStats, Facet, FacetEntry};
pub(crate) use stats::facet_from_counts;
pub use store::{
    normalize_text, Comment, CommentRecord, Corpus, IngestReport, Rejection, VolumeBounds, VolumeStatus,
};

use crate::jsonl::JsonlError;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("line {line}: duplicate source id `{id}`")]
    DuplicateSourceId { line: usize, id: String },
    #[error("line {line}: unknown value `{value}` for `{field}`")]
    UnknownEnumValue { line: usize, field: &'static str, value: String },
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sample fraction yields an empty sample")]
    EmptySample,
    #[error("invalid sampling targets: {0}")]
    InvalidTargets(String),
}
