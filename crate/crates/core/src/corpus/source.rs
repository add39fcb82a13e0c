use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::jsonl;

macro_rules! taxonomy_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }
    };
}

taxonomy_enum!(
    /// Kind of site a content source lives on.
    MediaKind {
        Newspaper => "newspaper",
        Microblog => "microblog",
        VideoPlatform => "video_platform",
    }
);

taxonomy_enum!(
    /// Gender of the main protagonist of a content source.
    Gender {
        Male => "male",
        Female => "female",
    }
);

taxonomy_enum!(
    /// Whether a source is about one person, a group or topic, or both.
    ProtagonistCount {
        Individual => "individual",
        Collective => "collective",
        Hybrid => "hybrid",
    }
);

taxonomy_enum!(
    /// Whether a source deals with professional life, private life, or both.
    SourceContext {
        Professional => "professional",
        Personal => "personal",
        Hybrid => "hybrid",
    }
);

impl MediaKind {
    /// Registry ids carry the site in their first letter: `E` (El Mundo) and
    /// `M` (Marca) are newspapers, `T` is Twitter, `Y` is YouTube.
    pub fn from_id_prefix(id: &str) -> Option<MediaKind> {
        match id.chars().next()? {
            'E' | 'M' => Some(MediaKind::Newspaper),
            'T' => Some(MediaKind::Microblog),
            'Y' => Some(MediaKind::VideoPlatform),
            _ => None,
        }
    }
}

/// A piece of news, post/hashtag or video whose comments are analysed as a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentSource {
    pub id: String,
    pub url: String,
    pub media_kind: MediaKind,
    pub protagonist_gender: Gender,
    pub protagonist_count: ProtagonistCount,
    pub context: SourceContext,
}

impl ContentSource {
    /// Checks the id against the media kind.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".to_string());
        }
        match MediaKind::from_id_prefix(&self.id) {
            Some(kind) if kind == self.media_kind => Ok(()),
            Some(kind) => Err(format!(
                "id `{}` denotes media_kind `{kind}` but record says `{}`",
                self.id, self.media_kind
            )),
            None => Err(format!("id `{}` must start with E, M, T or Y", self.id)),
        }
    }
}

#[derive(Deserialize)]
struct RawSource {
    id: Option<String>,
    url: Option<String>,
    media_kind: Option<String>,
    protagonist_gender: Option<String>,
    protagonist_count: Option<String>,
    context: Option<String>,
}

fn required(line: usize, field: &'static str, value: Option<String>) -> Result<String, CorpusError> {
    value.ok_or(CorpusError::MalformedRecord { line, message: format!("missing field `{field}`") })
}

fn parse_enum<T: FromStr>(line: usize, field: &'static str, value: Option<String>) -> Result<T, CorpusError> {
    let value = required(line, field, value)?;
    value.parse().map_err(|_| CorpusError::UnknownEnumValue { line, field, value })
}

fn parse_source_line(line: usize, text: &str) -> Result<ContentSource, CorpusError> {
    let raw: RawSource = serde_json::from_str(text)
        .map_err(|e| CorpusError::MalformedRecord { line, message: e.to_string() })?;
    let source = ContentSource {
        id: required(line, "id", raw.id)?,
        url: required(line, "url", raw.url)?,
        media_kind: parse_enum(line, "media_kind", raw.media_kind)?,
        protagonist_gender: parse_enum(line, "protagonist_gender", raw.protagonist_gender)?,
        protagonist_count: parse_enum(line, "protagonist_count", raw.protagonist_count)?,
        context: parse_enum(line, "context", raw.context)?,
    };
    source.validate().map_err(|message| CorpusError::MalformedRecord { line, message })?;
    Ok(source)
}

/// Parses a JSON Lines source registry. Any invalid record rejects the whole
/// input.
pub fn parse_source_registry<R: BufRead>(reader: R) -> Result<Vec<ContentSource>, CorpusError> {
    let mut seen = HashSet::new();
    let mut sources = Vec::new();
    for (line, text) in jsonl::read_lines(reader)? {
        let source = parse_source_line(line, &text)?;
        if !seen.insert(source.id.clone()) {
            return Err(CorpusError::DuplicateSourceId { line, id: source.id });
        }
        sources.push(source);
    }
    Ok(sources)
}

pub fn load_source_registry(path: &Path) -> Result<Vec<ContentSource>, CorpusError> {
    parse_source_registry(jsonl::open(path)?)
}
