//! Central-difference verification of analytic gradients.

use std::collections::BTreeSet;

use serde::Serialize;

use super::objective::{evaluate, grad_total, TripletBatch};
use super::terms::LossWeights;
use crate::embedcore::{hash_token, EncoderParams, ParamBlock};
use crate::error::Result;
use crate::textproc::RngStream;

/// Parameters whose clamp arguments sit this close to zero are skipped.
pub const KINK_MARGIN: f64 = 1e-6;

const SAMPLE_SEED: u64 = 0x0067_7261_6463_686b;

/// Per-block sample sizes; at least 200 parameters over every block.
const SAMPLE_PLAN: [(ParamBlock, usize); 6] = [
    (ParamBlock::Embed, 80),
    (ParamBlock::W1, 40),
    (ParamBlock::B1, 20),
    (ParamBlock::W2, 40),
    (ParamBlock::B2, 20),
    (ParamBlock::TempLogit, 1),
];

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub skipped_at_kink: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Deterministic parameter sample. Embedding entries are drawn only from
/// rows the batch actually touches; other rows have exactly zero gradient.
pub fn gradcheck_sample(
    batch: &TripletBatch<f64>,
    params: &EncoderParams<f64>,
) -> Vec<(ParamBlock, usize)> {
    let shape = params.shape();
    let rows: Vec<usize> = batch
        .originals
        .iter()
        .chain(&batch.perturbed)
        .flat_map(|t| t.iter().map(|tok| hash_token(tok, shape.vocab)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = RngStream::new(SAMPLE_SEED);
    let mut sample = Vec::new();
    for (block, count) in SAMPLE_PLAN {
        let len = params.block(block).len();
        let mut chosen = BTreeSet::new();
        let want = count.min(if block == ParamBlock::Embed {
            rows.len() * shape.hidden
        } else {
            len
        });
        while chosen.len() < want {
            let idx = if block == ParamBlock::Embed {
                rows[rng.below(rows.len())] * shape.hidden + rng.below(shape.hidden)
            } else {
                rng.below(len)
            };
            chosen.insert(idx);
        }
        sample.extend(chosen.into_iter().map(|i| (block, i)));
    }
    sample
}

/// Compares `analytic` against central differences of `objective` on `sample`.
///
/// `objective` returns the loss and the arguments of any clamps it applies;
/// a parameter is skipped when a clamp argument changes sign across the
/// stencil or lies within [`KINK_MARGIN`] of zero.
pub fn compare_gradients<F>(
    params: &EncoderParams<f64>,
    analytic: &EncoderParams<f64>,
    sample: &[(ParamBlock, usize)],
    h: f64,
    mut objective: F,
) -> GradCheckReport
where
    F: FnMut(&EncoderParams<f64>) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped_at_kink: 0,
    };
    let (_, base_kinks) = objective(params);
    let mut probe = params.clone();
    for &(block, idx) in sample {
        let original = probe.block(block)[idx];
        probe.block_mut(block)[idx] = original + h;
        let (up, up_kinks) = objective(&probe);
        probe.block_mut(block)[idx] = original - h;
        let (dn, dn_kinks) = objective(&probe);
        probe.block_mut(block)[idx] = original;

        let near_kink = base_kinks
            .iter()
            .zip(&up_kinks)
            .zip(&dn_kinks)
            .any(|((&b, &u), &d)| b.abs() < KINK_MARGIN || (u > 0.0) != (d > 0.0));
        if near_kink {
            report.skipped_at_kink += 1;
            continue;
        }
        let numeric = (up - dn) / (2.0 * h);
        let err = relative_error(analytic.block(block)[idx], numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((block.name().to_string(), idx));
        }
    }
    report
}

/// Finite-difference check of [`grad_total`] on one batch.
pub fn finite_diff_check(
    batch: &TripletBatch<f64>,
    params: &EncoderParams<f64>,
    weights: &LossWeights,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = grad_total(batch, params, weights)?;
    let sample = gradcheck_sample(batch, params);
    // validated above; evaluation on perturbed params cannot change shapes
    Ok(compare_gradients(params, &analytic, &sample, h, |p| {
        let (loss, kinks) = evaluate(batch, p, weights).expect("batch validated");
        (loss.total, kinks)
    }))
}
