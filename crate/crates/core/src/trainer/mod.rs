//! Optimizer, synthetic data and the three training loops: teacher
//! distillation, perturbation-robust fine-tuning and few-shot adaptation.

mod adamw;
mod config;
mod synth;
mod train;

pub use adamw::{adamw_step, adamw_update_slice, AdamWConfig, OptimizerState};
pub use config::TrainConfig;
pub use synth::{
    synth_dataset, Lexicon, SynthDataset, MAX_CAPTION_WORDS, MIN_CAPTION_WORDS, SYNTH_LANG,
};
pub use train::{
    few_shot_split, pr_batch, sample_batch, step_stream, train_distill, train_few_shot, train_pr,
    write_trace_csv, FewShotSplit, TraceRow, TrainOutcome, FEW_SHOT_CAP, FEW_SHOT_MIN_RECORDS,
};
