//! The caption score `w * max(0, cos(image, text))` and dataset scoring.
//!
//! With a fine-tuned encoder producing the text vector this is the
//! perturbation-robust variant; the formula is the same.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::embedcore::{cosine, EmbeddingMatrix, EncoderParams, MetricConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textproc::{tokenize, CaptionRecord};

pub const ORIGINAL_KIND: &str = "original";

pub fn mcs<T: Scalar>(image_vec: &[T], text_vec: &[T], cfg: &MetricConfig) -> Result<T> {
    Ok(T::of(cfg.w) * cosine(image_vec, text_vec)?.max(T::zero()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub lang: String,
    /// "original" or a perturbation name.
    pub kind: String,
    pub score: f64,
}

/// Scores every record against its image, preserving input order.
pub fn score_dataset<T: Scalar>(
    images: &EmbeddingMatrix,
    params: &EncoderParams<T>,
    records: &[CaptionRecord],
    cfg: &MetricConfig,
) -> Result<Vec<ScoreRow>> {
    if images.dim() != params.out_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.out_dim(),
            got: images.dim(),
        });
    }
    records
        .iter()
        .map(|rec| {
            let image = images.vector::<T>(&rec.image_id)?;
            let text = params.encode(&tokenize(&rec.caption, &rec.lang));
            Ok(ScoreRow {
                id: rec.id.clone(),
                lang: rec.lang.clone(),
                kind: rec.kind_label().to_string(),
                score: mcs(&image, &text, cfg)?.as_f64(),
            })
        })
        .collect()
}

/// Shortest decimal form of `x` rounded to six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_scores_csv<W: Write>(mut w: W, rows: &[ScoreRow]) -> std::io::Result<()> {
    writeln!(w, "id,lang,kind,score")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.id, r.lang, r.kind, format_sig6(r.score))?;
    }
    Ok(())
}

pub fn read_scores_csv<R: BufRead>(reader: R) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line_no == 1 {
            if line.trim() != "id,lang,kind,score" {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [id, lang, kind, score] = fields[..] else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        };
        let score: f64 = score.trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad score {score:?}: {e}"),
        })?;
        rows.push(ScoreRow {
            id: id.into(),
            lang: lang.into(),
            kind: kind.into(),
            score,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedcore::EncoderShape;

    #[test]
    fn mcs_examples() {
        let cfg = MetricConfig::default();
        assert_eq!(mcs(&[0.6, 0.8], &[0.6, 0.8], &cfg).unwrap(), 2.5);
        assert_eq!(mcs(&[1.0, 0.0], &[-1.0, 0.0], &cfg).unwrap(), 0.0);
        // cos 60 degrees = 0.5
        let half = mcs(&[1.0, 0.0], &[0.5, 0.75f64.sqrt()], &cfg).unwrap();
        assert!((half - 1.25).abs() < 1e-15);
        assert!(mcs(&[1.0], &[1.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn mcs_scale_invariant() {
        let cfg = MetricConfig::default();
        let a = mcs(&[0.3f64, 0.9, -0.1], &[0.2, 0.5, 0.5], &cfg).unwrap();
        let b = mcs(&[3.0, 9.0, -1.0], &[0.02, 0.05, 0.05], &cfg).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    fn fixture() -> (EmbeddingMatrix, EncoderParams<f64>) {
        let shape = EncoderShape {
            vocab: 64,
            hidden: 8,
            out_dim: 4,
        };
        let images = EmbeddingMatrix::from_rows(
            4,
            vec![
                (
                    "i1".to_string(),
                    "en".to_string(),
                    vec![0.1f64, 0.2, -0.3, 0.4],
                ),
                (
                    "i2".to_string(),
                    "en".to_string(),
                    vec![-0.5f64, 0.1, 0.0, 0.2],
                ),
            ],
        )
        .unwrap();
        (images, EncoderParams::init(shape, 0.5, 8))
    }

    #[test]
    fn score_dataset_behaviour() {
        let (images, params) = fixture();
        let cfg = MetricConfig::default();
        assert!(score_dataset(&images, &params, &[], &cfg)
            .unwrap()
            .is_empty());

        let rec = CaptionRecord::new("c1", "en", "a dog runs", vec![], "i1");
        let rows = score_dataset(&images, &params, &[rec.clone(), rec.clone()], &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], rows[1]);
        assert_eq!(rows[0].kind, "original");
        assert!((0.0..=2.5).contains(&rows[0].score));
        let again = score_dataset(&images, &params, &[rec], &cfg).unwrap();
        assert_eq!(again[0].score.to_bits(), rows[0].score.to_bits());

        let orphan = CaptionRecord::new("c2", "en", "a cat", vec![], "nope");
        assert!(matches!(
            score_dataset(&images, &params, &[orphan], &cfg),
            Err(Error::UnknownImageId(_))
        ));
    }

    #[test]
    fn score_dataset_dimension_mismatch() {
        let (images, _) = fixture();
        let params = EncoderParams::<f64>::init(
            EncoderShape {
                vocab: 8,
                hidden: 4,
                out_dim: 3,
            },
            0.5,
            1,
        );
        let rec = CaptionRecord::new("c1", "en", "x", vec![], "i1");
        assert!(matches!(
            score_dataset(&images, &params, &[rec], &MetricConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(1.4177), "1.4177");
        assert_eq!(format_sig6(0.299_64), "0.29964");
        assert_eq!(format_sig6(1.234_567_89), "1.23457");
        assert_eq!(format_sig6(2.5), "2.5");
        assert_eq!(format_sig6(0.0), "0");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ScoreRow {
                id: "a".into(),
                lang: "en".into(),
                kind: "original".into(),
                score: 1.4177,
            },
            ScoreRow {
                id: "a".into(),
                lang: "en".into(),
                kind: "jumble".into(),
                score: 0.123_456_7,
            },
        ];
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "id,lang,kind,score\na,en,original,1.4177\na,en,jumble,0.123457\n"
        );
        let back = read_scores_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1].score, 0.123457);
        assert!(matches!(
            read_scores_csv("x,y\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_scores_csv("id,lang,kind,score\na,en,original\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
