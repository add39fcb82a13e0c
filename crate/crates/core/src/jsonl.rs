//! JSON Lines helpers shared by every on-disk format of the pipeline.
//!
//! Blank lines are skipped. Line numbers reported in errors are 1-based and
//! count blank lines, so they match what an editor shows.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("read error at line {line}: {source}")]
    Read { line: usize, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("write error: {0}")]
    Write(#[from] io::Error),
}

/// Reads every non-blank line of `reader` as raw text, paired with its line
/// number.
pub fn read_lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>, JsonlError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Read { line: idx + 1, source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((idx + 1, line));
    }
    Ok(out)
}

pub fn open(path: &Path) -> Result<BufReader<File>, JsonlError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| JsonlError::Open { path: path.to_path_buf(), source })
}

/// Parses every line of a reader into `T`, failing on the first bad line.
pub fn parse_reader<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, JsonlError> {
    read_lines(reader)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| JsonlError::Parse { line, message: e.to_string() })
        })
        .collect()
}

pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    parse_reader(open(path)?)
}

pub fn write_records<T: Serialize, W: Write>(writer: W, records: &[T]) -> Result<(), JsonlError> {
    let mut writer = BufWriter::new(writer);
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_file<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    let file = File::create(path)?;
    write_records(file, records)
}
