//! Desk-scale synthetic image/caption corpus.
//!
//! Every pseudo-word owns a random unit vector; an image embedding is the
//! normalized sum of its caption's word vectors plus Gaussian noise. The
//! lexicon is drawn first and captions follow on the same stream, so
//! `synth_dataset(n, ..)` is a prefix of `synth_dataset(m, ..)` for `n <= m`.
//!
//! Caption words are listed in lexicon order. This gives the toy language a
//! fixed word order; without one, a reordered caption would be exactly as
//! likely as the original and no encoder could tell them apart.

use std::collections::HashSet;

use crate::embedcore::{normalize, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::textproc::{CaptionRecord, RngStream};

pub const MIN_CAPTION_WORDS: usize = 8;
pub const MAX_CAPTION_WORDS: usize = 20;
pub const SYNTH_LANG: &str = "en";

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub words: Vec<String>,
    /// One unit vector per word.
    pub vectors: Vec<Vec<f64>>,
}

impl Lexicon {
    /// Distinct three-syllable words; equal length means no word is a
    /// substring of another.
    pub fn generate(vocab_words: usize, dim: usize, rng: &mut RngStream) -> Self {
        let mut seen = HashSet::with_capacity(vocab_words);
        let mut words = Vec::with_capacity(vocab_words);
        let mut vectors = Vec::with_capacity(vocab_words);
        while words.len() < vocab_words {
            let word: String = (0..3)
                .flat_map(|_| {
                    let c = CONSONANTS[rng.below(CONSONANTS.len())];
                    let v = VOWELS[rng.below(VOWELS.len())];
                    [c as char, v as char]
                })
                .collect();
            if !seen.insert(word.clone()) {
                continue;
            }
            let raw: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
            words.push(word);
            vectors.push(normalize(&raw));
        }
        Self { words, vectors }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub lexicon: Lexicon,
    pub images: EmbeddingMatrix,
    pub records: Vec<CaptionRecord>,
}

pub fn synth_dataset(
    n_pairs: usize,
    vocab_words: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<SynthDataset> {
    if n_pairs == 0 {
        return Err(Error::DatasetTooSmall { got: 0, min: 1 });
    }
    if vocab_words < 4 || dim == 0 {
        return Err(Error::ShapeMismatch(format!(
            "synthetic corpus needs vocab >= 4 and dim >= 1 (got {vocab_words}, {dim})"
        )));
    }
    let mut rng = RngStream::new(seed);
    let lexicon = Lexicon::generate(vocab_words, dim, &mut rng);
    let mut image_rows = Vec::with_capacity(n_pairs);
    let mut records = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let n_words = MIN_CAPTION_WORDS + rng.below(MAX_CAPTION_WORDS - MIN_CAPTION_WORDS + 1);
        let mut picks: Vec<usize> = (0..n_words).map(|_| rng.below(vocab_words)).collect();
        picks.sort_unstable();

        let mut distinct: Vec<usize> = Vec::new();
        for &w in &picks {
            if !distinct.contains(&w) {
                distinct.push(w);
            }
        }
        let n_objects = (2 + rng.below(3)).min(distinct.len());
        let mut order = distinct.clone();
        rng.shuffle(&mut order);
        let mut chosen: Vec<usize> = order[..n_objects].to_vec();
        // keep objects in order of first appearance
        chosen.sort_by_key(|w| distinct.iter().position(|d| d == w));

        let mut sum = vec![0.0; dim];
        for &w in &picks {
            for (s, x) in sum.iter_mut().zip(&lexicon.vectors[w]) {
                *s += x;
            }
        }
        // noise is always drawn so the stream layout does not depend on sigma
        for s in sum.iter_mut() {
            *s += sigma * rng.gaussian();
        }

        let image_id = format!("img-{i:05}");
        let caption = picks
            .iter()
            .map(|&w| lexicon.words[w].as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let objects = chosen.iter().map(|&w| lexicon.words[w].clone()).collect();
        records.push(CaptionRecord::new(
            format!("cap-{i:05}"),
            SYNTH_LANG,
            caption,
            objects,
            image_id.clone(),
        ));
        image_rows.push((image_id, SYNTH_LANG.to_string(), normalize(&sum)));
    }
    let images = EmbeddingMatrix::from_rows(dim, image_rows)?;
    Ok(SynthDataset {
        lexicon,
        images,
        records,
    })
}
