use serde::Serialize;

use super::terms::{clip_with_grad, loss_clip, loss_l1, loss_l2, loss_l3, LossWeights};
use crate::embedcore::{check_dims, cosine_with_grad, EncodeTrace, EncoderParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textproc::{PerturbationKind, TokenSequence};

/// (image, original caption, perturbed caption) triplets sharing one perturbation kind.
#[derive(Debug, Clone)]
pub struct TripletBatch<T> {
    pub images: Vec<Vec<T>>,
    pub originals: Vec<TokenSequence>,
    pub perturbed: Vec<TokenSequence>,
    pub kind: PerturbationKind,
}

impl<T: Scalar> TripletBatch<T> {
    pub fn new(
        images: Vec<Vec<T>>,
        originals: Vec<TokenSequence>,
        perturbed: Vec<TokenSequence>,
        kind: PerturbationKind,
    ) -> Result<Self> {
        let batch = Self {
            images,
            originals,
            perturbed,
            kind,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::ShapeMismatch("triplet batch is empty".into()));
        }
        check_dims(self.images.len(), self.originals.len())?;
        check_dims(self.images.len(), self.perturbed.len())?;
        let dim = self.images[0].len();
        self.images
            .iter()
            .try_for_each(|v| check_dims(dim, v.len()))
    }
}

/// Objective value with its unweighted components (batch means).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub clip: T,
    pub l1: T,
    pub l2: T,
    pub l3: T,
}

impl<T: Scalar> LossBreakdown<T> {
    fn combine(clip: T, l1: T, l2: T, l3: T, w: &LossWeights) -> Self {
        let total = clip + T::of(w.l1) * l1 + T::of(w.l2) * l2 + T::of(w.l3) * l3;
        Self {
            total,
            clip,
            l1,
            l2,
            l3,
        }
    }
}

struct Forward<T> {
    originals: Vec<EncodeTrace<T>>,
    perturbed: Vec<EncodeTrace<T>>,
}

fn forward<T: Scalar>(batch: &TripletBatch<T>, params: &EncoderParams<T>) -> Result<Forward<T>> {
    batch.validate()?;
    check_dims(params.out_dim(), batch.images[0].len())?;
    Ok(Forward {
        originals: batch.originals.iter().map(|t| params.forward(t)).collect(),
        perturbed: batch.perturbed.iter().map(|t| params.forward(t)).collect(),
    })
}

/// `L_clip + l1 * L1 + l2 * L2 + l3 * L3`, each robustness term averaged over the batch.
pub fn loss_total<T: Scalar>(
    batch: &TripletBatch<T>,
    params: &EncoderParams<T>,
    weights: &LossWeights,
) -> Result<LossBreakdown<T>> {
    Ok(evaluate(batch, params, weights)?.0)
}

/// Loss plus the arguments of every `max(0, .)` clamp, used to detect kinks.
pub(crate) fn evaluate<T: Scalar>(
    batch: &TripletBatch<T>,
    params: &EncoderParams<T>,
    weights: &LossWeights,
) -> Result<(LossBreakdown<T>, Vec<T>)> {
    let fw = forward(batch, params)?;
    let t_o: Vec<Vec<T>> = fw.originals.into_iter().map(|t| t.output).collect();
    let t_p: Vec<Vec<T>> = fw.perturbed.into_iter().map(|t| t.output).collect();
    let clip = loss_clip(&batch.images, &t_o, params.temp_logit)?;
    let b = T::of(batch.len() as f64);
    let (mut l1, mut l2, mut l3) = (T::zero(), T::zero(), T::zero());
    let mut kinks = Vec::with_capacity(2 * batch.len());
    for ((v, o), p) in batch.images.iter().zip(&t_o).zip(&t_p) {
        l1 += loss_l1(v, o)?;
        l2 += loss_l2(v, p)?;
        l3 += loss_l3(o, p)?;
        kinks.push(crate::embedcore::cosine_unchecked(v, p));
        kinks.push(crate::embedcore::cosine_unchecked(o, p));
    }
    Ok((
        LossBreakdown::combine(clip, l1 / b, l2 / b, l3 / b, weights),
        kinks,
    ))
}

/// Exact gradient of [`loss_total`] with respect to every trainable parameter.
///
/// Clamped terms use subgradient 0 at and below the kink (cos <= 0).
pub fn grad_total<T: Scalar>(
    batch: &TripletBatch<T>,
    params: &EncoderParams<T>,
    weights: &LossWeights,
) -> Result<(LossBreakdown<T>, EncoderParams<T>)> {
    let fw = forward(batch, params)?;
    let t_o: Vec<Vec<T>> = fw.originals.iter().map(|t| t.output.clone()).collect();
    let t_p: Vec<Vec<T>> = fw.perturbed.iter().map(|t| t.output.clone()).collect();

    let (clip, mut d_o, d_temp) = clip_with_grad(&batch.images, &t_o, params.temp_logit);
    let dim = params.out_dim();
    let mut d_p = vec![vec![T::zero(); dim]; batch.len()];

    let b = T::of(batch.len() as f64);
    let (w1, w2, w3) = (
        T::of(weights.l1) / b,
        T::of(weights.l2) / b,
        T::of(weights.l3) / b,
    );
    let (mut l1, mut l2, mut l3) = (T::zero(), T::zero(), T::zero());
    for i in 0..batch.len() {
        let v = &batch.images[i];
        let (c1, _, g_o) = cosine_with_grad(v, &t_o[i]);
        l1 += T::one() - c1;
        axpy(&mut d_o[i], -w1, &g_o);

        let (c2, _, g_p) = cosine_with_grad(v, &t_p[i]);
        if c2 > T::zero() {
            l2 += c2;
            axpy(&mut d_p[i], w2, &g_p);
        }

        let (c3, g_oo, g_pp) = cosine_with_grad(&t_o[i], &t_p[i]);
        if c3 > T::zero() {
            l3 += c3;
            axpy(&mut d_o[i], w3, &g_oo);
            axpy(&mut d_p[i], w3, &g_pp);
        }
    }

    let mut grads = EncoderParams::zeros(params.shape());
    // fixed index order keeps the reduction bit-stable
    for i in 0..batch.len() {
        params.backward(&fw.originals[i], &d_o[i], &mut grads);
        params.backward(&fw.perturbed[i], &d_p[i], &mut grads);
    }
    grads.temp_logit = d_temp;
    Ok((
        LossBreakdown::combine(clip, l1 / b, l2 / b, l3 / b, weights),
        grads,
    ))
}

fn axpy<T: Scalar>(acc: &mut [T], a: T, x: &[T]) {
    for (y, &x) in acc.iter_mut().zip(x) {
        *y += a * x;
    }
}
