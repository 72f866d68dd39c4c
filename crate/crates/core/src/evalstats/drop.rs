//! Score-drop reports: per-language mean scores of perturbed captions and
//! their percentage change against the original captions.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::embedcore::{EmbeddingMatrix, EncoderParams, MetricConfig};
use crate::error::{Error, Result};
use crate::metric::{format_sig6, score_dataset, ScoreRow, ORIGINAL_KIND};
use crate::scalar::Scalar;
use crate::textproc::{perturb_dataset, CaptionRecord, ObjectOrder, PerturbationKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindDrop {
    pub kind: String,
    pub n: usize,
    pub mean: f64,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangDrop {
    pub lang: String,
    pub n_original: usize,
    pub original_mean: f64,
    /// Mean over kinds of the per-kind means.
    pub perturbed_average: KindDrop,
    /// Sorted by kind name.
    pub kinds: Vec<KindDrop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    /// Sorted by language code.
    pub langs: Vec<LangDrop>,
}

/// `100 * (perturbed - original) / original`.
pub fn pct_change(original_mean: f64, perturbed_mean: f64) -> f64 {
    100.0 * (perturbed_mean - original_mean) / original_mean
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scores `records` and fresh perturbations of them, then reports the drops.
pub fn evaluate_drop<T: Scalar>(
    images: &EmbeddingMatrix,
    params: &EncoderParams<T>,
    records: &[CaptionRecord],
    kinds: &[PerturbationKind],
    p: f64,
    seed: u64,
    cfg: &MetricConfig,
) -> Result<DropReport> {
    let original = score_dataset(images, params, records, cfg)?;
    let perturbed = perturb_dataset(records, kinds, p, seed, ObjectOrder::Random)?;
    drop_report(&original, &score_dataset(images, params, &perturbed, cfg)?)
}

pub fn drop_report(original: &[ScoreRow], perturbed: &[ScoreRow]) -> Result<DropReport> {
    let mut orig_by_lang: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut orig_ids: HashMap<&str, &str> = HashMap::new();
    for row in original {
        if row.kind != ORIGINAL_KIND {
            return Err(Error::InvalidRecord {
                id: row.id.clone(),
                reason: format!(
                    "original score rows must have kind {ORIGINAL_KIND:?}, found {:?}",
                    row.kind
                ),
            });
        }
        orig_by_lang.entry(&row.lang).or_default().push(row.score);
        orig_ids.insert(&row.id, &row.lang);
    }

    let mut pert: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for row in perturbed {
        if !orig_ids.contains_key(row.id.as_str()) {
            return Err(Error::MissingOriginal {
                id: row.id.clone(),
                lang: row.lang.clone(),
            });
        }
        pert.entry(&row.lang)
            .or_default()
            .entry(&row.kind)
            .or_default()
            .push(row.score);
    }

    let mut langs = Vec::new();
    for (lang, kinds) in pert {
        let Some(orig) = orig_by_lang.get(lang) else {
            let id = perturbed
                .iter()
                .find(|r| r.lang == lang)
                .map(|r| r.id.clone())
                .unwrap_or_default();
            return Err(Error::MissingOriginal {
                id,
                lang: lang.to_string(),
            });
        };
        let original_mean = mean(orig);
        if original_mean == 0.0 {
            return Err(Error::ZeroOriginalMean(lang.to_string()));
        }
        let kinds: Vec<KindDrop> = kinds
            .into_iter()
            .map(|(kind, scores)| {
                let m = mean(&scores);
                KindDrop {
                    kind: kind.to_string(),
                    n: scores.len(),
                    mean: m,
                    pct: pct_change(original_mean, m),
                }
            })
            .collect();
        let avg = kinds.iter().map(|k| k.mean).sum::<f64>() / kinds.len() as f64;
        langs.push(LangDrop {
            lang: lang.to_string(),
            n_original: orig.len(),
            original_mean,
            perturbed_average: KindDrop {
                kind: "average".into(),
                n: kinds.iter().map(|k| k.n).sum(),
                mean: avg,
                pct: pct_change(original_mean, avg),
            },
            kinds,
        });
    }
    Ok(DropReport { langs })
}

impl DropReport {
    pub fn lang(&self, lang: &str) -> Option<&LangDrop> {
        self.langs.iter().find(|l| l.lang == lang)
    }
}

impl LangDrop {
    pub fn kind(&self, kind: &str) -> Option<&KindDrop> {
        self.kinds.iter().find(|k| k.kind == kind)
    }

    /// Mean of `|pct|` over the perturbation kinds present.
    pub fn mean_abs_drop(&self) -> f64 {
        self.kinds.iter().map(|k| k.pct.abs()).sum::<f64>() / self.kinds.len() as f64
    }
}

fn cell(k: &KindDrop) -> String {
    format!("{} ({:.2}%)", format_sig6(k.mean), k.pct)
}

/// Plain-text table: Lang, Original, Perturbed Average, then one column per
/// kind (the five perturbations first, in their canonical order).
pub fn render_table(report: &DropReport) -> String {
    let mut columns: Vec<String> = PerturbationKind::ALL
        .iter()
        .map(|k| k.as_str().to_string())
        .collect();
    for l in &report.langs {
        for k in &l.kinds {
            if !columns.contains(&k.kind) {
                columns.push(k.kind.clone());
            }
        }
    }
    columns.retain(|c| report.langs.iter().any(|l| l.kind(c).is_some()));

    let mut header = vec![
        "Lang".to_string(),
        "Original".into(),
        "Perturbed Average".into(),
    ];
    header.extend(columns.iter().map(|c| {
        let mut s = c.clone();
        s[..1].make_ascii_uppercase();
        s
    }));
    let mut rows = vec![header];
    for l in &report.langs {
        let mut row = vec![
            l.lang.clone(),
            format_sig6(l.original_mean),
            cell(&l.perturbed_average),
        ];
        row.extend(
            columns
                .iter()
                .map(|c| l.kind(c).map_or_else(|| "-".to_string(), cell)),
        );
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(
                out,
                "{}",
                "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
            );
        }
    }
    out
}
