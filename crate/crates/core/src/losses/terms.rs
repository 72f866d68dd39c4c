use serde::{Deserialize, Serialize};

use crate::embedcore::{check_dims, cosine_unchecked, cosine_with_grad};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weights of the three robustness terms added to the contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            l1: 0.1,
            l2: 0.05,
            l3: 0.05,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        l1: 0.0,
        l2: 0.0,
        l3: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if [self.l1, self.l2, self.l3]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "loss weights must be non-negative: {self:?}"
            )))
        }
    }
}

/// `1 - cos(image, original)`, in [0, 2].
pub fn loss_l1<T: Scalar>(image: &[T], original: &[T]) -> Result<T> {
    check_dims(image.len(), original.len())?;
    Ok(T::one() - cosine_unchecked(image, original))
}

/// `max(0, cos(image, perturbed))`, in [0, 1].
pub fn loss_l2<T: Scalar>(image: &[T], perturbed: &[T]) -> Result<T> {
    check_dims(image.len(), perturbed.len())?;
    Ok(cosine_unchecked(image, perturbed).max(T::zero()))
}

/// `max(0, cos(original, perturbed))`, in [0, 1].
pub fn loss_l3<T: Scalar>(original: &[T], perturbed: &[T]) -> Result<T> {
    check_dims(original.len(), perturbed.len())?;
    Ok(cosine_unchecked(original, perturbed).max(T::zero()))
}

/// Mean squared difference over dimensions.
pub fn loss_distill_mse<T: Scalar>(teacher: &[T], student: &[T]) -> Result<T> {
    check_dims(teacher.len(), student.len())?;
    if teacher.is_empty() {
        return Ok(T::zero());
    }
    let sum: T = teacher
        .iter()
        .zip(student)
        .map(|(&t, &s)| (t - s) * (t - s))
        .sum();
    Ok(sum / T::of(teacher.len() as f64))
}

/// [`loss_distill_mse`] averaged over a batch.
pub fn loss_distill_mse_batch<T: Scalar>(teachers: &[Vec<T>], students: &[Vec<T>]) -> Result<T> {
    check_dims(teachers.len(), students.len())?;
    if teachers.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (t, s) in teachers.iter().zip(students) {
        total += loss_distill_mse(t, s)?;
    }
    Ok(total / T::of(teachers.len() as f64))
}

fn check_batch<T>(images: &[Vec<T>], texts: &[Vec<T>]) -> Result<()> {
    check_dims(images.len(), texts.len())?;
    if images.is_empty() {
        return Err(Error::ShapeMismatch(
            "contrastive loss needs at least one pair".into(),
        ));
    }
    let dim = images[0].len();
    for v in images.iter().chain(texts) {
        check_dims(dim, v.len())?;
    }
    Ok(())
}

fn log_softmax_diag<T: Scalar>(logits: impl Iterator<Item = T> + Clone, target: T) -> (T, T) {
    let max = logits.clone().fold(T::neg_infinity(), T::max);
    let sum: T = logits.map(|s| (s - max).exp()).sum();
    let lse = max + sum.ln();
    (lse - target, lse)
}

/// Symmetric in-batch cross-entropy over `S_ij = exp(temp_logit) * cos(image_i, text_j)`
/// with the diagonal as targets.
pub fn loss_clip<T: Scalar>(images: &[Vec<T>], texts: &[Vec<T>], temp_logit: T) -> Result<T> {
    check_batch(images, texts)?;
    Ok(clip_forward(images, texts, temp_logit).0)
}

fn similarity<T: Scalar>(images: &[Vec<T>], texts: &[Vec<T>], scale: T) -> Vec<Vec<T>> {
    images
        .iter()
        .map(|v| {
            texts
                .iter()
                .map(|t| scale * cosine_unchecked(v, t))
                .collect()
        })
        .collect()
}

/// Returns the loss and the log-sum-exp of every row and column.
fn clip_forward<T: Scalar>(
    images: &[Vec<T>],
    texts: &[Vec<T>],
    temp_logit: T,
) -> (T, Vec<T>, Vec<T>, Vec<Vec<T>>) {
    let b = images.len();
    let s = similarity(images, texts, temp_logit.exp());
    let mut row_lse = Vec::with_capacity(b);
    let mut col_lse = Vec::with_capacity(b);
    let mut row_loss = T::zero();
    let mut col_loss = T::zero();
    for i in 0..b {
        let (l, lse) = log_softmax_diag(s[i].iter().copied(), s[i][i]);
        row_loss += l;
        row_lse.push(lse);
        let (l, lse) = log_softmax_diag(s.iter().map(|r| r[i]), s[i][i]);
        col_loss += l;
        col_lse.push(lse);
    }
    let bt = T::of(b as f64);
    let loss = (row_loss / bt + col_loss / bt) / T::of(2.0);
    (loss, row_lse, col_lse, s)
}

/// Contrastive loss with gradients w.r.t. every text vector and the
/// temperature logit. Image vectors are frozen.
pub(crate) fn clip_with_grad<T: Scalar>(
    images: &[Vec<T>],
    texts: &[Vec<T>],
    temp_logit: T,
) -> (T, Vec<Vec<T>>, T) {
    let b = images.len();
    let scale = temp_logit.exp();
    let (loss, row_lse, col_lse, s) = clip_forward(images, texts, temp_logit);
    let half_b = T::of(2.0 * b as f64);
    let dim = texts[0].len();
    let mut d_texts = vec![vec![T::zero(); dim]; b];
    let mut d_temp = T::zero();
    for i in 0..b {
        for j in 0..b {
            let p_row = (s[i][j] - row_lse[i]).exp();
            let p_col = (s[i][j] - col_lse[j]).exp();
            let target = if i == j { T::of(2.0) } else { T::zero() };
            let d_s = (p_row + p_col - target) / half_b;
            d_temp += d_s * s[i][j];
            let (_, _, d_text) = cosine_with_grad(&images[i], &texts[j]);
            let coef = d_s * scale;
            for (acc, g) in d_texts[j].iter_mut().zip(d_text) {
                *acc += coef * g;
            }
        }
    }
    (loss, d_texts, d_temp)
}
