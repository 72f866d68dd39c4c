//! Small trainable text encoder.
//!
//! Tokens are hashed into an embedding table, multiplied by a fixed
//! sinusoidal position gate, mean-pooled, and passed through a one-hidden-layer
//! tanh MLP:
//!
//! ```text
//! g_i[k]  = 1 + gamma * sin((i + 1) * theta_k),  theta_k = 10000^(-k/h)
//! pooled  = (1/n) * sum_i E[hash(tok_i)] * g_i      (zero when n = 0)
//! z       = W2 * tanh(W1 * pooled + b1) + b2
//! ```
//!
//! The gate makes the pooled vector order-sensitive, so reordering or
//! duplicating tokens moves the output even though pooling is a mean.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textproc::{RngStream, TokenSequence};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub const DEFAULT_GATE_GAIN: f64 = 0.5;
pub const INIT_RANGE: f64 = 0.05;
/// CLIP's initial temperature of 0.07, stored as ln(1 / 0.07).
pub const INIT_TEMP_LOGIT: f64 = 2.659_260_036_932_778;
/// ln(100): the logit scale never exceeds 100.
pub const MAX_TEMP_LOGIT: f64 = 4.605_170_185_988_092;

pub const PRMP_MAGIC: [u8; 4] = *b"PRMP";
pub const PRMP_VERSION: u16 = 1;

/// 64-bit FNV-1a over the UTF-8 bytes of `text`.
pub fn fnv1a64(text: &str) -> u64 {
    text.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// [`fnv1a64`] reduced mod `vocab`.
pub fn hash_token(token: &str, vocab: usize) -> usize {
    assert!(vocab >= 1, "vocab size must be at least 1");
    (fnv1a64(token) % vocab as u64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub vocab: usize,
    pub hidden: usize,
    pub out_dim: usize,
}

impl Default for EncoderShape {
    fn default() -> Self {
        Self {
            vocab: 4096,
            hidden: 64,
            out_dim: 64,
        }
    }
}

/// Named trainable block, in declaration (and persistence) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBlock {
    Embed,
    W1,
    B1,
    W2,
    B2,
    TempLogit,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 6] = [
        ParamBlock::Embed,
        ParamBlock::W1,
        ParamBlock::B1,
        ParamBlock::W2,
        ParamBlock::B2,
        ParamBlock::TempLogit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamBlock::Embed => "embed",
            ParamBlock::W1 => "w1",
            ParamBlock::B1 => "b1",
            ParamBlock::W2 => "w2",
            ParamBlock::B2 => "b2",
            ParamBlock::TempLogit => "temp_logit",
        }
    }
}

/// Weights of the text encoder plus the contrastive temperature.
///
/// The same type doubles as the gradient container; `gate_gain` is a fixed
/// hyperparameter and its gradient slot stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    shape: EncoderShape,
    pub gate_gain: T,
    /// vocab x hidden
    pub embed: Vec<T>,
    /// hidden x hidden
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    /// out_dim x hidden
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    pub temp_logit: T,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncodeTrace<T> {
    pub ids: Vec<usize>,
    pub pooled: Vec<T>,
    pub activation: Vec<T>,
    pub output: Vec<T>,
    /// Row-major `ids.len() x hidden` table of gate multipliers.
    pub gates: Vec<T>,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn zeros(shape: EncoderShape) -> Self {
        let EncoderShape {
            vocab,
            hidden,
            out_dim,
        } = shape;
        Self {
            shape,
            gate_gain: T::zero(),
            embed: vec![T::zero(); vocab * hidden],
            w1: vec![T::zero(); hidden * hidden],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); out_dim * hidden],
            b2: vec![T::zero(); out_dim],
            temp_logit: T::zero(),
        }
    }

    /// Uniform(-0.05, 0.05) weights drawn in declaration order, zero biases,
    /// temperature logit ln(1/0.07).
    pub fn init(shape: EncoderShape, gate_gain: f64, seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        let mut p = Self::zeros(shape);
        let mut draw = |x: &mut T| *x = T::of((2.0 * rng.unit() - 1.0) * INIT_RANGE);
        p.embed.iter_mut().for_each(&mut draw);
        p.w1.iter_mut().for_each(&mut draw);
        p.w2.iter_mut().for_each(&mut draw);
        p.gate_gain = T::of(gate_gain);
        p.temp_logit = T::of(INIT_TEMP_LOGIT);
        p
    }

    pub fn shape(&self) -> EncoderShape {
        self.shape
    }

    pub fn out_dim(&self) -> usize {
        self.shape.out_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.vocab == 0 || self.shape.hidden == 0 || self.shape.out_dim == 0 {
            return Err(Error::ShapeMismatch(format!(
                "degenerate encoder shape {:?}",
                self.shape
            )));
        }
        if self.gate_gain < T::zero() {
            return Err(Error::ShapeMismatch(
                "gate gain must be non-negative".into(),
            ));
        }
        let all_finite = self
            .trainable()
            .iter()
            .all(|(_, b)| b.iter().all(|x| x.is_finite()));
        if !all_finite || !self.gate_gain.is_finite() {
            return Err(Error::ShapeMismatch(
                "encoder parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn logit_scale(&self) -> T {
        self.temp_logit.exp()
    }

    pub fn clamp_temperature(&mut self) {
        self.temp_logit = self.temp_logit.min(T::of(MAX_TEMP_LOGIT));
    }

    pub fn trainable(&self) -> [(ParamBlock, &[T]); 6] {
        [
            (ParamBlock::Embed, &self.embed),
            (ParamBlock::W1, &self.w1),
            (ParamBlock::B1, &self.b1),
            (ParamBlock::W2, &self.w2),
            (ParamBlock::B2, &self.b2),
            (
                ParamBlock::TempLogit,
                std::slice::from_ref(&self.temp_logit),
            ),
        ]
    }

    pub fn trainable_mut(&mut self) -> [(ParamBlock, &mut [T]); 6] {
        [
            (ParamBlock::Embed, &mut self.embed),
            (ParamBlock::W1, &mut self.w1),
            (ParamBlock::B1, &mut self.b1),
            (ParamBlock::W2, &mut self.w2),
            (ParamBlock::B2, &mut self.b2),
            (
                ParamBlock::TempLogit,
                std::slice::from_mut(&mut self.temp_logit),
            ),
        ]
    }

    pub fn block(&self, block: ParamBlock) -> &[T] {
        self.trainable()[block as usize].1
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut [T] {
        let [a, b, c, d, e, f] = self.trainable_mut();
        match block {
            ParamBlock::Embed => a.1,
            ParamBlock::W1 => b.1,
            ParamBlock::B1 => c.1,
            ParamBlock::W2 => d.1,
            ParamBlock::B2 => e.1,
            ParamBlock::TempLogit => f.1,
        }
    }

    pub fn num_trainable(&self) -> usize {
        self.trainable().iter().map(|(_, b)| b.len()).sum()
    }

    /// Gate multipliers for positions `0..len`, row-major by position.
    fn gate_table(&self, len: usize) -> Vec<T> {
        let hidden = self.shape.hidden;
        let thetas: Vec<f64> = (0..hidden)
            .map(|k| 10000f64.powf(-(k as f64) / hidden as f64))
            .collect();
        let mut table = Vec::with_capacity(len * hidden);
        for pos in 0..len {
            let i = (pos + 1) as f64;
            table.extend(
                thetas
                    .iter()
                    .map(|&t| T::one() + self.gate_gain * T::of((i * t).sin())),
            );
        }
        table
    }

    pub fn forward(&self, tokens: &TokenSequence) -> EncodeTrace<T> {
        let EncoderShape {
            vocab,
            hidden,
            out_dim,
        } = self.shape;
        let ids: Vec<usize> = tokens.iter().map(|t| hash_token(t, vocab)).collect();
        let gates = self.gate_table(ids.len());
        let mut pooled = vec![T::zero(); hidden];
        if !ids.is_empty() {
            for (pos, &id) in ids.iter().enumerate() {
                let row = &self.embed[id * hidden..(id + 1) * hidden];
                let gate = &gates[pos * hidden..(pos + 1) * hidden];
                for ((acc, &e), &g) in pooled.iter_mut().zip(row).zip(gate) {
                    *acc += e * g;
                }
            }
            let inv_n = T::one() / T::of(ids.len() as f64);
            pooled.iter_mut().for_each(|x| *x *= inv_n);
        }
        let activation: Vec<T> = (0..hidden)
            .map(|r| {
                let row = &self.w1[r * hidden..(r + 1) * hidden];
                (super::geometry::dot(row, &pooled) + self.b1[r]).tanh()
            })
            .collect();
        let output = (0..out_dim)
            .map(|r| {
                super::geometry::dot(&self.w2[r * hidden..(r + 1) * hidden], &activation)
                    + self.b2[r]
            })
            .collect();
        EncodeTrace {
            ids,
            pooled,
            activation,
            output,
            gates,
        }
    }

    pub fn encode(&self, tokens: &TokenSequence) -> Vec<T> {
        self.forward(tokens).output
    }

    /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
    pub fn backward(&self, trace: &EncodeTrace<T>, d_output: &[T], grads: &mut EncoderParams<T>) {
        let EncoderShape {
            hidden, out_dim, ..
        } = self.shape;
        debug_assert_eq!(d_output.len(), out_dim);
        let mut d_act = vec![T::zero(); hidden];
        for r in 0..out_dim {
            let dz = d_output[r];
            if dz == T::zero() {
                continue;
            }
            grads.b2[r] += dz;
            let w_row = &self.w2[r * hidden..(r + 1) * hidden];
            let g_row = &mut grads.w2[r * hidden..(r + 1) * hidden];
            for c in 0..hidden {
                g_row[c] += dz * trace.activation[c];
                d_act[c] += w_row[c] * dz;
            }
        }
        let d_pre: Vec<T> = d_act
            .iter()
            .zip(&trace.activation)
            .map(|(&d, &u)| d * (T::one() - u * u))
            .collect();
        let mut d_pooled = vec![T::zero(); hidden];
        for r in 0..hidden {
            let da = d_pre[r];
            grads.b1[r] += da;
            let w_row = &self.w1[r * hidden..(r + 1) * hidden];
            let g_row = &mut grads.w1[r * hidden..(r + 1) * hidden];
            for c in 0..hidden {
                g_row[c] += da * trace.pooled[c];
                d_pooled[c] += w_row[c] * da;
            }
        }
        if trace.ids.is_empty() {
            return;
        }
        let inv_n = T::one() / T::of(trace.ids.len() as f64);
        for (pos, &id) in trace.ids.iter().enumerate() {
            let g_row = &mut grads.embed[id * hidden..(id + 1) * hidden];
            let gate = &trace.gates[pos * hidden..(pos + 1) * hidden];
            for k in 0..hidden {
                g_row[k] += d_pooled[k] * gate[k] * inv_n;
            }
        }
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect();
        EncoderParams {
            shape: self.shape,
            gate_gain: U::of(self.gate_gain.as_f64()),
            embed: conv(&self.embed),
            w1: conv(&self.w1),
            b1: conv(&self.b1),
            w2: conv(&self.w2),
            b2: conv(&self.b2),
            temp_logit: U::of(self.temp_logit.as_f64()),
        }
    }

    /// PRMP layout: magic, u16 version, u32 vocab/hidden/out_dim, f64 gate
    /// gain, f64 temperature logit, then embed, w1, b1, w2, b2 as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 2 + 12 + 16 + (self.num_trainable() - 1) * 8);
        out.extend_from_slice(&PRMP_MAGIC);
        out.extend_from_slice(&PRMP_VERSION.to_le_bytes());
        for d in [self.shape.vocab, self.shape.hidden, self.shape.out_dim] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.gate_gain.as_f64().to_le_bytes());
        out.extend_from_slice(&self.temp_logit.as_f64().to_le_bytes());
        for block in [&self.embed, &self.w1, &self.b1, &self.w2, &self.b2] {
            for x in block {
                out.extend_from_slice(&x.as_f64().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 2 + 12 + 16;
        let magic: [u8; 4] = bytes
            .get(0..4)
            .and_then(|b| b.try_into().ok())
            .unwrap_or_default();
        if magic != PRMP_MAGIC {
            return Err(Error::BadMagic {
                expected: PRMP_MAGIC,
                found: magic,
            });
        }
        if bytes.len() < HEADER {
            return Err(Error::TruncatedFile {
                expected: HEADER,
                found: bytes.len(),
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != PRMP_VERSION {
            return Err(Error::VersionMismatch {
                expected: PRMP_VERSION,
                found: version,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let shape = EncoderShape {
            vocab: u32_at(6),
            hidden: u32_at(10),
            out_dim: u32_at(14),
        };
        let mut p = Self::zeros(shape);
        p.gate_gain = T::of(f64_at(18));
        p.temp_logit = T::of(f64_at(26));
        let expected = (p.num_trainable() - 1) * 8;
        let payload = &bytes[HEADER..];
        if payload.len() < expected {
            return Err(Error::TruncatedFile {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::TrailingBytes {
                extra: payload.len() - expected,
            });
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())));
        for block in [&mut p.embed, &mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2] {
            block.iter_mut().for_each(|x| *x = values.next().unwrap());
        }
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Text embedding of a token sequence.
pub fn encode_text<T: Scalar>(params: &EncoderParams<T>, tokens: &TokenSequence) -> Vec<T> {
    params.encode(tokens)
}
