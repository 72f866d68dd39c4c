//! Embedding matrices and the PRMC container.
//!
//! Layout (little-endian): `b"PRMC"`, u16 version, u32 rows, u32 dim, then
//! rows x dim f32 values row-major. Row ids live in a sibling JSON Lines
//! manifest, one `{"row","id","lang"}` object per line.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const PRMC_MAGIC: [u8; 4] = *b"PRMC";
pub const PRMC_VERSION: u16 = 1;
const PRMC_HEADER_LEN: usize = 4 + 2 + 4 + 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub row: usize,
    pub id: String,
    pub lang: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    manifest: Vec<ManifestEntry>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, manifest: Vec<ManifestEntry>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch(
                "embedding dim must be at least 1".into(),
            ));
        }
        if data.len() != manifest.len() * dim {
            return Err(Error::ManifestMismatch(format!(
                "{} manifest rows x dim {dim} != {} values",
                manifest.len(),
                data.len()
            )));
        }
        let mut index = HashMap::with_capacity(manifest.len());
        for (i, entry) in manifest.iter().enumerate() {
            if entry.row != i {
                return Err(Error::ManifestMismatch(format!(
                    "entry {i} names row {}",
                    entry.row
                )));
            }
            if index.insert(entry.id.clone(), i).is_some() {
                return Err(Error::ManifestMismatch(format!(
                    "duplicate id {:?}",
                    entry.id
                )));
            }
        }
        Ok(Self {
            dim,
            data,
            manifest,
            index,
        })
    }

    /// Builds a matrix from `(id, lang, vector)` rows, narrowing to f32.
    pub fn from_rows<T: Scalar>(
        dim: usize,
        rows: impl IntoIterator<Item = (String, String, Vec<T>)>,
    ) -> Result<Self> {
        let mut data = Vec::new();
        let mut manifest = Vec::new();
        for (row, (id, lang, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            data.extend(v.iter().map(|x| x.to_f32().unwrap_or(f32::NAN)));
            manifest.push(ManifestEntry { row, id, lang });
        }
        Self::new(dim, data, manifest)
    }

    pub fn rows(&self) -> usize {
        self.manifest.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Row `id` widened to the working scalar type.
    pub fn vector<T: Scalar>(&self, id: &str) -> Result<Vec<T>> {
        let i = self
            .row_index(id)
            .ok_or_else(|| Error::UnknownImageId(id.to_string()))?;
        Ok(self.row(i).iter().map(|&x| T::of(x as f64)).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PRMC_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&PRMC_MAGIC);
        out.extend_from_slice(&PRMC_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Parses the binary payload; returns `(rows, dim, data)`.
    pub fn parse_bytes(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
        if bytes.len() < PRMC_HEADER_LEN {
            let mut found = [0u8; 4];
            let n = bytes.len().min(4);
            found[..n].copy_from_slice(&bytes[..n]);
            if found != PRMC_MAGIC {
                return Err(Error::BadMagic {
                    expected: PRMC_MAGIC,
                    found,
                });
            }
            return Err(Error::TruncatedFile {
                expected: PRMC_HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != PRMC_MAGIC {
            return Err(Error::BadMagic {
                expected: PRMC_MAGIC,
                found: magic,
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != PRMC_VERSION {
            return Err(Error::VersionMismatch {
                expected: PRMC_VERSION,
                found: version,
            });
        }
        let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let payload = &bytes[PRMC_HEADER_LEN..];
        let expected = rows * dim * 4;
        if payload.len() < expected {
            return Err(Error::TruncatedFile {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::TrailingBytes {
                extra: payload.len() - expected,
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok((rows, dim, data))
    }

    /// The sibling manifest, one `{"row","id","lang"}` object per line.
    pub fn manifest_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for entry in &self.manifest {
            serde_json::to_writer(&mut out, entry).expect("manifest entries serialize");
            out.push(b'\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        fs::write(manifest_path(path), self.manifest_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (rows, dim, data) = Self::parse_bytes(&fs::read(path)?)?;
        let reader = BufReader::new(fs::File::open(manifest_path(path))?);
        let mut manifest = Vec::with_capacity(rows);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            manifest.push(entry);
        }
        if manifest.len() != rows {
            return Err(Error::ManifestMismatch(format!(
                "header has {rows} rows, manifest has {}",
                manifest.len()
            )));
        }
        Self::new(dim, data, manifest)
    }
}

/// `images.prmc` -> `images.manifest.jsonl`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.jsonl")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            3,
            vec![
                ("a".to_string(), "en".to_string(), vec![1.0f64, -2.5, 0.125]),
                (
                    "b".to_string(),
                    "ja".to_string(),
                    vec![f64::MIN_POSITIVE, 3.0e10, -0.0],
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"PRMC");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[2, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[3, 0, 0, 0]);
        assert_eq!(bytes.len(), 14 + 2 * 3 * 4);
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.prmc");
        let m = sample();
        m.save(&path).unwrap();
        let back = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(fs::read(&path).unwrap(), m.to_bytes());
        assert_eq!(back.row_index("b"), Some(1));
        assert_eq!(back.vector::<f64>("a").unwrap(), vec![1.0, -2.5, 0.125]);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingMatrix::parse_bytes(&bytes),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            EmbeddingMatrix::parse_bytes(b"no"),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 2;
        assert!(matches!(
            EmbeddingMatrix::parse_bytes(&bytes),
            Err(Error::VersionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = sample().to_bytes();
        bytes[6] = 9; // claim 9 rows
        assert!(matches!(
            EmbeddingMatrix::parse_bytes(&bytes),
            Err(Error::TruncatedFile { .. })
        ));
        assert!(matches!(
            EmbeddingMatrix::parse_bytes(&bytes[..8]),
            Err(Error::TruncatedFile { .. })
        ));
    }

    #[test]
    fn manifest_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.prmc");
        sample().save(&path).unwrap();
        fs::write(
            manifest_path(&path),
            "{\"row\":0,\"id\":\"a\",\"lang\":\"en\"}\n",
        )
        .unwrap();
        assert!(matches!(
            EmbeddingMatrix::load(&path),
            Err(Error::ManifestMismatch(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let rows = vec![
            ("a".to_string(), "en".to_string(), vec![1.0f64]),
            ("a".to_string(), "en".to_string(), vec![2.0f64]),
        ];
        assert!(matches!(
            EmbeddingMatrix::from_rows(1, rows),
            Err(Error::ManifestMismatch(_))
        ));
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(
            sample().vector::<f32>("zz"),
            Err(Error::UnknownImageId(_))
        ));
    }
}
