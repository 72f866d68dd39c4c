//! File access for the commands. Every output goes through a temp file in
//! the destination directory and is renamed into place.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use prmcs::embedcore::{manifest_path, EmbeddingMatrix};
use prmcs::metric::{read_scores_csv, ScoreRow};
use prmcs::textproc::{read_records, CaptionRecord};
use prmcs::{Encoder, Ratings};
use tempfile::NamedTempFile;

use crate::error::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_matrix(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), CliError> {
    write_atomic(path, &matrix.to_bytes())?;
    write_atomic(&manifest_path(path), &matrix.manifest_jsonl())
}

fn with_path<T>(path: &Path, r: prmcs::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Input {
        path: path.display().to_string(),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input {
            path: path.display().to_string(),
            source: e.into(),
        })
}

pub fn load_records(path: &Path) -> Result<Vec<CaptionRecord>, CliError> {
    with_path(path, read_records(open(path)?))
}

pub fn load_matrix(path: &Path) -> Result<EmbeddingMatrix, CliError> {
    with_path(path, EmbeddingMatrix::load(path))
}

pub fn load_encoder(path: &Path) -> Result<Encoder, CliError> {
    with_path(path, Encoder::load(path))
}

pub fn load_scores(path: &Path) -> Result<Vec<ScoreRow>, CliError> {
    with_path(path, read_scores_csv(open(path)?))
}

/// Two-column `x,y` CSV with a header row.
pub fn load_pairs(path: &Path) -> Result<Ratings, CliError> {
    let parsed = (|| -> prmcs::Result<Ratings> {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, header)) if header.trim() == "x,y" => {}
            _ => {
                return Err(prmcs::Error::Parse {
                    line: 1,
                    message: "expected header `x,y`".into(),
                })
            }
        }
        for (line, text) in lines {
            if text.trim().is_empty() {
                continue;
            }
            let bad = |message: String| prmcs::Error::Parse { line, message };
            let (a, b) = text
                .split_once(',')
                .ok_or_else(|| bad("expected two columns".into()))?;
            x.push(
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("x: {e}")))?,
            );
            y.push(
                b.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("y: {e}")))?,
            );
        }
        Ratings::new(x, y)
    })();
    with_path(path, parsed)
}

pub fn records_jsonl(records: &[CaptionRecord]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    prmcs::textproc::write_records(&mut buf, records)?;
    Ok(buf)
}
