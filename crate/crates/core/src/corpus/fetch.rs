use std::path::PathBuf;

use super::{CommentRecord, ContentSource};
use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("no fetcher available for source {0}")]
    Unavailable(String),
    #[error("fixture for source {source_id}: {error}")]
    Fixture { source_id: String, error: JsonlError },
}

/// Produces the public comments attached to a content source.
pub trait Fetcher {
    fn fetch(&self, source: &ContentSource) -> Result<Vec<CommentRecord>, FetchError>;
}

/// Reads `<dir>/<source id>.jsonl`, one `{"id","text","fetched_at"}` object
/// per line.
#[derive(Debug, Clone)]
pub struct FixtureFetcher {
    dir: PathBuf,
}

impl FixtureFetcher {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureFetcher { dir: dir.into() }
    }
}

impl Fetcher for FixtureFetcher {
    fn fetch(&self, source: &ContentSource) -> Result<Vec<CommentRecord>, FetchError> {
        let path = self.dir.join(format!("{}.jsonl", source.id));
        jsonl::read_file(&path).map_err(|error| FetchError::Fixture { source_id: source.id.clone(), error })
    }
}

/// Stands in for live site scrapers, which are not shipped. Always fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableFetcher;

impl Fetcher for UnavailableFetcher {
    fn fetch(&self, source: &ContentSource) -> Result<Vec<CommentRecord>, FetchError> {
        Err(FetchError::Unavailable(source.id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Gender, MediaKind, ProtagonistCount, SourceContext};

    fn source() -> ContentSource {
        ContentSource {
            id: "Y5".into(),
            url: "https://www.youtube.com/watch?v=aQu81Wsar6Y".into(),
            media_kind: MediaKind::VideoPlatform,
            protagonist_gender: Gender::Female,
            protagonist_count: ProtagonistCount::Individual,
            context: SourceContext::Professional,
        }
    }

    #[test]
    fn fixture_reader() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("Y5.jsonl"),
            "{\"id\":\"y5-1\",\"text\":\"hola\",\"fetched_at\":\"2023-01-20T10:00:00Z\"}\n",
        )
        .unwrap();
        let records = FixtureFetcher::new(dir.path()).fetch(&source()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].text, "hola");
    }

    #[test]
    fn missing_fixture_and_stub_fail() {
        let dir = tempfile::tempdir().unwrap();
        assert!(FixtureFetcher::new(dir.path()).fetch(&source()).is_err());
        assert!(matches!(UnavailableFetcher.fetch(&source()), Err(FetchError::Unavailable(id)) if id == "Y5"));
    }
}
