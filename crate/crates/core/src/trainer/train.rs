use std::io::Write;

use serde::Serialize;

use super::adamw::{adamw_step, OptimizerState};
use super::config::TrainConfig;
use crate::embedcore::{check_dims, fnv1a64, EmbeddingMatrix, EncoderParams};
use crate::error::{Error, Result};
use crate::losses::{grad_total, loss_distill_mse_batch, LossBreakdown, TripletBatch};
use crate::scalar::Scalar;
use crate::textproc::{perturb_record, tokenize, CaptionRecord, RngStream, TokenSequence};

/// Largest few-shot adaptation set.
pub const FEW_SHOT_CAP: usize = 300;
pub const FEW_SHOT_MIN_RECORDS: usize = 10;

/// One row of a loss trace: `step,total,l_clip,l1,l2,l3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub total: f64,
    pub clip: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl TraceRow {
    fn from_breakdown<T: Scalar>(step: usize, b: &LossBreakdown<T>) -> Self {
        Self {
            step,
            total: b.total.as_f64(),
            clip: b.clip.as_f64(),
            l1: b.l1.as_f64(),
            l2: b.l2.as_f64(),
            l3: b.l3.as_f64(),
        }
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceRow]) -> std::io::Result<()> {
    writeln!(w, "step,total,l_clip,l1,l2,l3")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step, r.total, r.clip, r.l1, r.l2, r.l3
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: EncoderParams<T>,
    pub trace: Vec<TraceRow>,
}

/// Per-step stream: independent of how many draws earlier steps consumed.
pub fn step_stream(seed: u64, step: usize) -> RngStream {
    RngStream::new(seed).fork(step as u64)
}

/// `b` distinct indices from `0..n` (all of them, in order, when `b >= n`).
pub fn sample_batch(n: usize, b: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if b >= n {
        return idx;
    }
    for i in 0..b {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(b);
    idx
}

fn lookup_rows<T: Scalar>(
    matrix: &EmbeddingMatrix,
    ids: impl Iterator<Item = String>,
) -> Result<Vec<Vec<T>>> {
    ids.map(|id| matrix.vector::<T>(&id)).collect()
}

/// Teacher learning: regress encoder outputs onto teacher rows under MSE.
///
/// Teacher rows are matched to captions by record id.
pub fn train_distill<T: Scalar>(
    teacher: &EmbeddingMatrix,
    captions: &[CaptionRecord],
    params: &EncoderParams<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    params.validate()?;
    check_dims(params.out_dim(), teacher.dim())?;
    let targets: Vec<Vec<T>> = lookup_rows(teacher, captions.iter().map(|r| r.id.clone()))
        .map_err(|e| match e {
            Error::UnknownImageId(id) => {
                Error::ManifestMismatch(format!("no teacher row for caption {id:?}"))
            }
            other => other,
        })?;
    let tokens: Vec<TokenSequence> = captions
        .iter()
        .map(|r| tokenize(&r.caption, &r.lang))
        .collect();

    let mut params = params.clone();
    let mut state = OptimizerState::new(&params);
    let opt = cfg.optimizer();
    let mut trace = Vec::with_capacity(cfg.steps);
    if captions.is_empty() {
        return Ok(TrainOutcome { params, trace });
    }
    let dim = params.out_dim();
    for step in 0..cfg.steps {
        let mut rng = step_stream(cfg.seed, step);
        let batch = sample_batch(captions.len(), cfg.batch_size, &mut rng);
        let traces: Vec<_> = batch.iter().map(|&i| params.forward(&tokens[i])).collect();
        let teachers: Vec<Vec<T>> = batch.iter().map(|&i| targets[i].clone()).collect();
        let students: Vec<Vec<T>> = traces.iter().map(|t| t.output.clone()).collect();
        let loss = loss_distill_mse_batch(&teachers, &students)?;

        let scale = T::of(2.0 / (dim * batch.len()) as f64);
        let mut grads = EncoderParams::zeros(params.shape());
        for (tr, target) in traces.iter().zip(&teachers) {
            let d: Vec<T> = tr
                .output
                .iter()
                .zip(target)
                .map(|(&s, &t)| scale * (s - t))
                .collect();
            params.backward(tr, &d, &mut grads);
        }
        adamw_step(&mut params, &grads, &mut state, &opt)?;
        trace.push(TraceRow {
            step,
            total: loss.as_f64(),
            clip: 0.0,
            l1: 0.0,
            l2: 0.0,
            l3: 0.0,
        });
    }
    Ok(TrainOutcome { params, trace })
}

/// Perturbation-robust fine-tuning.
///
/// Each step draws a batch, one perturbation kind for the whole batch, and
/// fresh perturbed captions, all from that step's stream.
pub fn train_pr<T: Scalar>(
    images: &EmbeddingMatrix,
    captions: &[CaptionRecord],
    params: &EncoderParams<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    params.validate()?;
    check_dims(params.out_dim(), images.dim())?;
    let image_vecs: Vec<Vec<T>> = lookup_rows(images, captions.iter().map(|r| r.image_id.clone()))?;
    let tokens: Vec<TokenSequence> = captions
        .iter()
        .map(|r| tokenize(&r.caption, &r.lang))
        .collect();

    let mut params = params.clone();
    let mut state = OptimizerState::new(&params);
    let opt = cfg.optimizer();
    let mut trace = Vec::with_capacity(cfg.steps);
    if captions.is_empty() {
        return Ok(TrainOutcome { params, trace });
    }
    for step in 0..cfg.steps {
        let batch = build_triplets(captions, &image_vecs, &tokens, cfg, step)?;
        let (loss, grads) = grad_total(&batch, &params, &cfg.weights)?;
        adamw_step(&mut params, &grads, &mut state, &opt)?;
        trace.push(TraceRow::from_breakdown(step, &loss));
    }
    Ok(TrainOutcome { params, trace })
}

/// The triplet batch `train_pr` uses at `step`.
pub fn pr_batch<T: Scalar>(
    images: &EmbeddingMatrix,
    captions: &[CaptionRecord],
    cfg: &TrainConfig,
    step: usize,
) -> Result<TripletBatch<T>> {
    let image_vecs: Vec<Vec<T>> = lookup_rows(images, captions.iter().map(|r| r.image_id.clone()))?;
    let tokens: Vec<TokenSequence> = captions
        .iter()
        .map(|r| tokenize(&r.caption, &r.lang))
        .collect();
    build_triplets(captions, &image_vecs, &tokens, cfg, step)
}

fn build_triplets<T: Scalar>(
    captions: &[CaptionRecord],
    image_vecs: &[Vec<T>],
    tokens: &[TokenSequence],
    cfg: &TrainConfig,
    step: usize,
) -> Result<TripletBatch<T>> {
    let mut rng = step_stream(cfg.seed, step);
    let idx = sample_batch(captions.len(), cfg.batch_size, &mut rng);
    let kind = cfg.kinds[rng.below(cfg.kinds.len())];
    let mut perturbed = Vec::with_capacity(idx.len());
    for &i in &idx {
        let rec = perturb_record(&captions[i], kind, cfg.p, &mut rng)?;
        perturbed.push(tokenize(&rec.caption, &rec.lang));
    }
    TripletBatch::new(
        idx.iter().map(|&i| image_vecs[i].clone()).collect(),
        idx.iter().map(|&i| tokens[i].clone()).collect(),
        perturbed,
        kind,
    )
}

#[derive(Debug, Clone)]
pub struct FewShotSplit {
    pub adaptation: Vec<CaptionRecord>,
    pub evaluation: Vec<CaptionRecord>,
}

/// 1:9 split ranked by FNV-1a hash of the record id; the first tenth
/// (at most 300) adapts, the rest evaluates. Both keep dataset order.
pub fn few_shot_split(records: &[CaptionRecord]) -> Result<FewShotSplit> {
    if records.len() < FEW_SHOT_MIN_RECORDS {
        return Err(Error::DatasetTooSmall {
            got: records.len(),
            min: FEW_SHOT_MIN_RECORDS,
        });
    }
    let mut ranked: Vec<(u64, &str, usize)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (fnv1a64(&r.id), r.id.as_str(), i))
        .collect();
    ranked.sort_unstable();
    let n_adapt = (records.len() / 10).min(FEW_SHOT_CAP);
    let mut chosen = vec![false; records.len()];
    for &(_, _, i) in &ranked[..n_adapt] {
        chosen[i] = true;
    }
    let (adaptation, evaluation) = records.iter().cloned().zip(chosen).fold(
        (Vec::new(), Vec::new()),
        |(mut a, mut e), (r, c)| {
            if c {
                a.push(r);
            } else {
                e.push(r);
            }
            (a, e)
        },
    );
    Ok(FewShotSplit {
        adaptation,
        evaluation,
    })
}

/// Few-shot adaptation: [`train_pr`] on the adaptation tenth only.
pub fn train_few_shot<T: Scalar>(
    images: &EmbeddingMatrix,
    records: &[CaptionRecord],
    params: &EncoderParams<T>,
    cfg: &TrainConfig,
) -> Result<(TrainOutcome<T>, FewShotSplit)> {
    let split = few_shot_split(records)?;
    let outcome = train_pr(images, &split.adaptation, params, cfg)?;
    Ok((outcome, split))
}
