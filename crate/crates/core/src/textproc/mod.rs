//! Tokenization, deterministic randomness and caption perturbations.

mod perturb;
mod record;
mod rng;
mod tokenize;

pub use perturb::{
    perturb_jumble, perturb_masking, perturb_removal, perturb_repetition, perturb_substitution,
    substitute_objects, ObjectOrder, PerturbationKind, MASK_TOKEN, MAX_RESHUFFLES,
};
pub use record::{
    perturb_dataset, perturb_record, perturb_record_with, read_records, record_stream,
    write_records, CaptionRecord,
};
pub use rng::RngStream;
pub use tokenize::{detokenize, is_character_tokenized, tokenize, TokenSequence};
