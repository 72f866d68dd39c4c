use prmcs::embedcore::{EmbeddingMatrix, EncoderParams, EncoderShape, MetricConfig};
use prmcs::evalstats::{correlations, drop_report, render_table};
use prmcs::losses::{finite_diff_check, GradCheckReport, LossWeights};
use prmcs::metric::{score_dataset, write_scores_csv};
use prmcs::textproc::{perturb_dataset, ObjectOrder};
use prmcs::trainer::{
    pr_batch, synth_dataset, train_distill, train_few_shot, write_trace_csv, TrainConfig,
    TrainOutcome,
};
use prmcs::{Batch, Encoder};
use serde::Serialize;

use crate::config::{
    required, CorrConfig, DropConfig, GradcheckConfig, PerturbConfig, ScoreConfig, SynthConfig,
    TrainRunConfig,
};
use crate::error::CliError;
use crate::io::{
    load_encoder, load_matrix, load_pairs, load_records, load_scores, records_jsonl, write_atomic,
    write_matrix,
};

/// Pairs and vocabulary of the corpus each gradient check draws its batch from.
const GRADCHECK_CORPUS: (usize, usize) = (200, 500);

pub fn perturb(cfg: PerturbConfig) -> Result<(), CliError> {
    let records = load_records(required(&cfg.input, "input")?)?;
    let order = match &cfg.force_permutation {
        Some(perm) => ObjectOrder::Forced(perm),
        None => ObjectOrder::Random,
    };
    let out = perturb_dataset(&records, &cfg.kinds, cfg.p, cfg.seed, order)?;
    write_atomic(required(&cfg.output, "output")?, &records_jsonl(&out)?)
}

pub fn synth(cfg: SynthConfig) -> Result<(), CliError> {
    let data = synth_dataset(cfg.pairs, cfg.vocab_words, cfg.dim, cfg.sigma, cfg.seed)?;
    write_matrix(required(&cfg.images, "images")?, &data.images)?;
    if let Some(path) = &cfg.teacher {
        let rows = data
            .records
            .iter()
            .map(|r| {
                Ok((
                    r.id.clone(),
                    r.lang.clone(),
                    data.images.vector::<f64>(&r.image_id)?,
                ))
            })
            .collect::<prmcs::Result<Vec<_>>>()?;
        write_matrix(path, &EmbeddingMatrix::from_rows(cfg.dim, rows)?)?;
    }
    write_atomic(
        required(&cfg.records, "records")?,
        &records_jsonl(&data.records)?,
    )
}

fn initial_encoder(cfg: &TrainRunConfig) -> Result<Encoder, CliError> {
    match &cfg.init {
        Some(path) => load_encoder(path),
        None => {
            let shape = EncoderShape {
                vocab: cfg.vocab,
                hidden: cfg.hidden,
                out_dim: cfg.out_dim,
            };
            let params = EncoderParams::init(shape, cfg.gate_gain, cfg.init_seed);
            params.validate()?;
            Ok(params)
        }
    }
}

fn finish_training(cfg: &TrainRunConfig, outcome: &TrainOutcome<f64>) -> Result<(), CliError> {
    write_atomic(required(&cfg.out, "out")?, &outcome.params.to_bytes())?;
    if let Some(path) = &cfg.trace {
        let mut csv = Vec::new();
        write_trace_csv(&mut csv, &outcome.trace)?;
        write_atomic(path, &csv)?;
    }
    match outcome.trace.last() {
        Some(r) => println!(
            "step {} total {:.6} l_clip {:.6} l1 {:.6} l2 {:.6} l3 {:.6}",
            r.step, r.total, r.clip, r.l1, r.l2, r.l3
        ),
        None => println!("no steps run; checkpoint equals its initialization"),
    }
    Ok(())
}

pub fn distill(cfg: TrainRunConfig) -> Result<(), CliError> {
    let teacher = load_matrix(required(&cfg.teacher, "teacher")?)?;
    let captions = load_records(required(&cfg.captions, "captions")?)?;
    let outcome = train_distill(
        &teacher,
        &captions,
        &initial_encoder(&cfg)?,
        &cfg.train_config(),
    )?;
    finish_training(&cfg, &outcome)
}

pub fn train_pr(cfg: TrainRunConfig) -> Result<(), CliError> {
    let images = load_matrix(required(&cfg.images, "images")?)?;
    let captions = load_records(required(&cfg.captions, "captions")?)?;
    let outcome = prmcs::trainer::train_pr(
        &images,
        &captions,
        &initial_encoder(&cfg)?,
        &cfg.train_config(),
    )?;
    finish_training(&cfg, &outcome)
}

pub fn few_shot(cfg: TrainRunConfig) -> Result<(), CliError> {
    let images = load_matrix(required(&cfg.images, "images")?)?;
    let captions = load_records(required(&cfg.captions, "captions")?)?;
    let (outcome, split) = train_few_shot(
        &images,
        &captions,
        &initial_encoder(&cfg)?,
        &cfg.train_config(),
    )?;
    eprintln!(
        "few-shot: {} adaptation, {} evaluation records",
        split.adaptation.len(),
        split.evaluation.len()
    );
    if let Some(path) = &cfg.split_out {
        write_atomic(path, &records_jsonl(&split.evaluation)?)?;
    }
    finish_training(&cfg, &outcome)
}

pub fn score(cfg: ScoreConfig) -> Result<(), CliError> {
    let images = load_matrix(required(&cfg.images, "images")?)?;
    let captions = load_records(required(&cfg.captions, "captions")?)?;
    let model = load_encoder(required(&cfg.model, "model")?)?;
    let rows = score_dataset(&images, &model, &captions, &MetricConfig { w: cfg.w })?;
    let mut csv = Vec::new();
    write_scores_csv(&mut csv, &rows)?;
    write_atomic(required(&cfg.out, "out")?, &csv)
}

fn emit_json<T: Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn eval_drop(cfg: DropConfig) -> Result<(), CliError> {
    let original = load_scores(required(&cfg.original, "original")?)?;
    let perturbed = load_scores(required(&cfg.perturbed, "perturbed")?)?;
    let report = drop_report(&original, &perturbed)?;
    let table = render_table(&report);
    if let Some(path) = &cfg.table {
        write_atomic(path, table.as_bytes())?;
    }
    if let Some(path) = &cfg.out {
        emit_json(&report, Some(path))?;
        print!("{table}");
        Ok(())
    } else {
        emit_json(&report, None)
    }
}

pub fn eval_corr(cfg: CorrConfig) -> Result<(), CliError> {
    let pairs = load_pairs(required(&cfg.input, "input")?)?;
    emit_json(&correlations(&pairs)?, cfg.out.as_deref())
}

#[derive(Serialize)]
struct SeedCheck {
    seed: u64,
    #[serde(flatten)]
    report: GradCheckReport,
}

#[derive(Serialize)]
struct GradcheckSummary {
    h: f64,
    tolerance: f64,
    max_rel_error: f64,
    pass: bool,
    seeds: Vec<SeedCheck>,
}

/// For each seed: a fresh encoder, and one training batch of a synthetic
/// corpus generated with the same seed.
pub fn gradcheck(cfg: GradcheckConfig) -> Result<(), CliError> {
    let shape = EncoderShape {
        vocab: cfg.vocab,
        hidden: cfg.hidden,
        out_dim: cfg.out_dim,
    };
    let mut seeds = Vec::new();
    for seed in 0..cfg.seeds {
        let data = synth_dataset(
            GRADCHECK_CORPUS.0,
            GRADCHECK_CORPUS.1,
            cfg.out_dim,
            0.1,
            seed,
        )?;
        let train = TrainConfig {
            batch_size: cfg.batch_size,
            seed,
            ..Default::default()
        };
        let batch: Batch = pr_batch(&data.images, &data.records, &train, 0)?;
        let params: Encoder = EncoderParams::init(shape, cfg.gate_gain, seed);
        params.validate()?;
        let report = finite_diff_check(&batch, &params, &LossWeights::default(), cfg.h)?;
        seeds.push(SeedCheck { seed, report });
    }
    let max_rel_error = seeds
        .iter()
        .map(|s| s.report.max_rel_error)
        .fold(0.0, f64::max);
    let summary = GradcheckSummary {
        h: cfg.h,
        tolerance: cfg.tolerance,
        max_rel_error,
        pass: max_rel_error < cfg.tolerance,
        seeds,
    };
    emit_json(&summary, cfg.out.as_deref())?;
    if summary.pass {
        Ok(())
    } else {
        Err(CliError::GradCheck(max_rel_error))
    }
}
