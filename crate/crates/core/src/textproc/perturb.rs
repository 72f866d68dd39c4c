//! The five lexical perturbations: Repetition, Removal, Masking, Jumble and
//! in-sentence Substitution of critical objects.
//!
//! Token-level kinds consume exactly one draw per input token, in input order,
//! so event positions line up across kinds driven by the same seed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::tokenize::TokenSequence;
use crate::error::{Error, Result};

pub const MASK_TOKEN: &str = "[MASK]";

/// Shuffle attempts before Substitution falls back to rotation by one.
pub const MAX_RESHUFFLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Repetition,
    Removal,
    Masking,
    Jumble,
    Substitution,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::Repetition,
        PerturbationKind::Removal,
        PerturbationKind::Masking,
        PerturbationKind::Jumble,
        PerturbationKind::Substitution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::Repetition => "repetition",
            PerturbationKind::Removal => "removal",
            PerturbationKind::Masking => "masking",
            PerturbationKind::Jumble => "jumble",
            PerturbationKind::Substitution => "substitution",
        }
    }

    /// Stable small integer used to key per-kind RNG streams.
    pub fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown perturbation kind {s:?}"))
    }
}

pub fn perturb_repetition(tokens: &TokenSequence, p: f64, rng: &mut RngStream) -> TokenSequence {
    let mut out = Vec::with_capacity(tokens.len() * 2);
    for tok in tokens.iter() {
        out.push(tok.clone());
        if rng.unit() < p {
            out.push(tok.clone());
        }
    }
    TokenSequence(out)
}

/// Keeps each token independently with probability `p_keep`.
pub fn perturb_removal(tokens: &TokenSequence, p_keep: f64, rng: &mut RngStream) -> TokenSequence {
    tokens
        .iter()
        .filter(|_| rng.unit() < p_keep)
        .cloned()
        .collect()
}

pub fn perturb_masking(tokens: &TokenSequence, p: f64, rng: &mut RngStream) -> TokenSequence {
    tokens
        .iter()
        .map(|tok| {
            if rng.unit() < p {
                MASK_TOKEN.to_string()
            } else {
                tok.clone()
            }
        })
        .collect()
}

pub fn perturb_jumble(tokens: &TokenSequence, rng: &mut RngStream) -> TokenSequence {
    let mut out = tokens.0.clone();
    rng.shuffle(&mut out);
    TokenSequence(out)
}

/// How Substitution picks the new object order.
#[derive(Debug, Clone, Copy)]
pub enum ObjectOrder<'a> {
    /// Reshuffle until the order differs from the original.
    Random,
    /// Use `objects[perm[j]]` as the replacement for object `j`.
    Forced(&'a [usize]),
}

/// Swaps the positions of critical objects inside the caption.
///
/// Replacement is sequential over the working string: the last occurrence of
/// original object `j` is replaced with shuffled object `j`. A step whose
/// original object has already been consumed is a no-op.
pub fn perturb_substitution(
    caption: &str,
    objects: &[String],
    rng: &mut RngStream,
) -> Result<String> {
    substitute_objects(caption, objects, ObjectOrder::Random, rng)
}

pub fn substitute_objects(
    caption: &str,
    objects: &[String],
    order: ObjectOrder<'_>,
    rng: &mut RngStream,
) -> Result<String> {
    if let Some(missing) = objects
        .iter()
        .find(|o| o.is_empty() || !caption.contains(o.as_str()))
    {
        return Err(Error::InvalidRecord {
            id: String::new(),
            reason: format!("critical object {missing:?} is not a substring of the caption"),
        });
    }
    if objects.len() < 2 {
        return Ok(caption.to_string());
    }
    let shuffled = match order {
        ObjectOrder::Random => reshuffle(objects, rng),
        ObjectOrder::Forced(perm) => apply_permutation(objects, perm)?,
    };
    let mut target = caption.to_string();
    for (original, replacement) in objects.iter().zip(&shuffled) {
        if let Some(pos) = target.rfind(original.as_str()) {
            target.replace_range(pos..pos + original.len(), replacement);
        }
    }
    Ok(target)
}

fn reshuffle(objects: &[String], rng: &mut RngStream) -> Vec<String> {
    let mut shuffled = objects.to_vec();
    for _ in 0..MAX_RESHUFFLES {
        rng.shuffle(&mut shuffled);
        if shuffled != objects {
            return shuffled;
        }
    }
    let mut rotated = objects.to_vec();
    rotated.rotate_left(1);
    rotated
}

fn apply_permutation(objects: &[String], perm: &[usize]) -> Result<Vec<String>> {
    let mut seen = vec![false; objects.len()];
    let valid = perm.len() == objects.len()
        && perm
            .iter()
            .all(|&i| i < objects.len() && !std::mem::replace(&mut seen[i], true));
    if !valid {
        return Err(Error::InvalidRecord {
            id: String::new(),
            reason: format!(
                "forced permutation {perm:?} is not a permutation of {} objects",
                objects.len()
            ),
        });
    }
    Ok(perm.iter().map(|&i| objects[i].clone()).collect())
}
