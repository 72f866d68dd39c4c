use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::perturb::{
    perturb_jumble, perturb_masking, perturb_removal, perturb_repetition, substitute_objects,
    ObjectOrder, PerturbationKind,
};
use super::rng::RngStream;
use super::tokenize::{detokenize, tokenize};
use crate::embedcore::fnv1a64;
use crate::error::{Error, Result};

/// One caption with its language, critical objects and image reference.
///
/// Perturbed copies carry `kind`, `seed` and `p` as provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub id: String,
    pub lang: String,
    pub caption: String,
    #[serde(default)]
    pub critical_objects: Vec<String>,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<PerturbationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl CaptionRecord {
    pub fn new(
        id: impl Into<String>,
        lang: impl Into<String>,
        caption: impl Into<String>,
        critical_objects: Vec<String>,
        image_id: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            lang: lang.into(),
            caption: caption.into(),
            critical_objects,
            image_id: image_id.into(),
            kind: None,
            seed: None,
            p: None,
        }
    }

    /// Checks that every critical object is a non-empty substring of the
    /// caption. Perturbed copies are exempt: their objects are provenance and
    /// may have been masked, removed or split by the perturbation.
    pub fn validate(&self) -> Result<()> {
        if self.kind.is_some() {
            return Ok(());
        }
        for obj in &self.critical_objects {
            if obj.is_empty() || !self.caption.contains(obj.as_str()) {
                return Err(Error::InvalidRecord {
                    id: self.id.clone(),
                    reason: format!("critical object {obj:?} is not a substring of the caption"),
                });
            }
        }
        Ok(())
    }

    /// "original" for unperturbed records, otherwise the perturbation name.
    pub fn kind_label(&self) -> &'static str {
        self.kind.map_or("original", PerturbationKind::as_str)
    }
}

/// Applies one perturbation to a record and tags the copy with its provenance.
///
/// Substitution works on the raw caption; every other kind goes through
/// tokenize / detokenize.
pub fn perturb_record(
    record: &CaptionRecord,
    kind: PerturbationKind,
    p: f64,
    rng: &mut RngStream,
) -> Result<CaptionRecord> {
    perturb_record_with(record, kind, p, rng, ObjectOrder::Random)
}

pub fn perturb_record_with(
    record: &CaptionRecord,
    kind: PerturbationKind,
    p: f64,
    rng: &mut RngStream,
    order: ObjectOrder<'_>,
) -> Result<CaptionRecord> {
    let seed = rng.state();
    let caption = match kind {
        PerturbationKind::Substitution => {
            substitute_objects(&record.caption, &record.critical_objects, order, rng).map_err(
                |e| match e {
                    Error::InvalidRecord { reason, .. } => Error::InvalidRecord {
                        id: record.id.clone(),
                        reason,
                    },
                    other => other,
                },
            )?
        }
        _ => {
            let tokens = tokenize(&record.caption, &record.lang);
            let out = match kind {
                PerturbationKind::Repetition => perturb_repetition(&tokens, p, rng),
                PerturbationKind::Removal => perturb_removal(&tokens, p, rng),
                PerturbationKind::Masking => perturb_masking(&tokens, p, rng),
                PerturbationKind::Jumble => perturb_jumble(&tokens, rng),
                PerturbationKind::Substitution => unreachable!(),
            };
            detokenize(&out, &record.lang)
        }
    };
    Ok(CaptionRecord {
        caption,
        kind: Some(kind),
        seed: Some(seed),
        p: Some(p),
        ..record.clone()
    })
}

/// The stream that perturbs record `id` with `kind` in a run seeded by `seed`.
///
/// Keyed by id rather than position, so a record perturbs identically
/// whatever file it sits in.
pub fn record_stream(seed: u64, id: &str, kind: PerturbationKind) -> RngStream {
    RngStream::new(seed).fork(fnv1a64(id)).fork(kind.tag())
}

/// Perturbs every record with every kind in `kinds`, record-major.
pub fn perturb_dataset(
    records: &[CaptionRecord],
    kinds: &[PerturbationKind],
    p: f64,
    seed: u64,
    order: ObjectOrder<'_>,
) -> Result<Vec<CaptionRecord>> {
    let mut out = Vec::with_capacity(records.len() * kinds.len());
    for record in records {
        for &kind in kinds {
            let mut rng = record_stream(seed, &record.id, kind);
            out.push(perturb_record_with(record, kind, p, &mut rng, order)?);
        }
    }
    Ok(out)
}

/// Reads a JSON Lines dataset, validating each record and id uniqueness.
/// Blank lines are skipped; errors carry 1-based line numbers.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<CaptionRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CaptionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        // perturbed files repeat ids once per kind
        if !seen.insert((record.id.clone(), record.kind)) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate record id {:?}", record.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_records<W: Write>(mut writer: W, records: &[CaptionRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golf_record() -> CaptionRecord {
        CaptionRecord::new(
            "golf",
            "en",
            "A man, wearing a white shirt and grey shorts, is playing golf on a green field with green trees and a blue sky in the background",
            ["white shirt", "grey shorts", "golf", "green field"].map(String::from).to_vec(),
            "img-golf",
        )
    }

    #[test]
    fn jumble_of_single_token_is_unchanged() {
        let rec = CaptionRecord::new("r", "en", "golf", vec![], "i");
        let out =
            perturb_record(&rec, PerturbationKind::Jumble, 0.4, &mut RngStream::new(5)).unwrap();
        assert_eq!(out.caption, "golf");
        assert_eq!(out.kind, Some(PerturbationKind::Jumble));
        assert_eq!(out.seed, Some(5));
    }

    #[test]
    fn masking_at_one_masks_everything() {
        let rec = CaptionRecord::new("r", "en", "A dog runs", vec![], "i");
        let out =
            perturb_record(&rec, PerturbationKind::Masking, 1.0, &mut RngStream::new(0)).unwrap();
        assert_eq!(out.caption, "[MASK] [MASK] [MASK]");
    }

    #[test]
    fn japanese_masking_concatenates() {
        let rec = CaptionRecord::new("r", "ja", "青い車", vec![], "i");
        let out =
            perturb_record(&rec, PerturbationKind::Masking, 1.0, &mut RngStream::new(0)).unwrap();
        assert_eq!(out.caption, "[MASK][MASK][MASK]");
    }

    #[test]
    fn forced_substitution_matches_golf_example() {
        let out = perturb_record_with(
            &golf_record(),
            PerturbationKind::Substitution,
            0.4,
            &mut RngStream::new(0),
            ObjectOrder::Forced(&[2, 3, 0, 1]),
        )
        .unwrap();
        assert_eq!(
            out.caption,
            "A man, wearing a golf and green field, is playing white shirt on a grey shorts with green trees and a blue sky in the background"
        );
    }

    #[test]
    fn invalid_record_reports_id() {
        let rec = CaptionRecord::new("bad", "en", "a cat", vec!["cat".into(), "dog".into()], "i");
        assert!(matches!(rec.validate(), Err(Error::InvalidRecord { ref id, .. }) if id == "bad"));
        match perturb_record(
            &rec,
            PerturbationKind::Substitution,
            0.4,
            &mut RngStream::new(0),
        ) {
            Err(Error::InvalidRecord { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip_and_line_numbers() {
        let recs = vec![
            golf_record(),
            CaptionRecord::new("b", "ja", "青い車", vec!["車".into()], "img-b"),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, recs);

        let text =
            "{\"id\":\"a\",\"lang\":\"en\",\"caption\":\"x\",\"image_id\":\"i\"}\n\nnot json\n";
        match read_records(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text =
            "{\"id\":\"a\",\"lang\":\"en\",\"caption\":\"x\",\"image_id\":\"i\"}\n".repeat(2);
        assert!(matches!(
            read_records(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
