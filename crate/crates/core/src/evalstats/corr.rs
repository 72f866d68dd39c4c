//! Agreement between metric scores and human ratings: Stuart's Kendall tau-c
//! and Pearson's r.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Aligned metric scores `x` and human ratings `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingPairs<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> RatingPairs<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 pairs, got {}",
                x.len()
            )));
        }
        if !x.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("ratings must be finite".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub tau_c: f64,
    pub pearson: f64,
    pub n: usize,
}

pub fn correlations<T: Scalar>(pairs: &RatingPairs<T>) -> Result<CorrelationResult> {
    Ok(CorrelationResult {
        tau_c: kendall_tau_c(pairs)?.as_f64(),
        pearson: pearson(pairs)?.as_f64(),
        n: pairs.len(),
    })
}

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite values are totally ordered")
}

fn distinct<T: Scalar>(v: &[T]) -> usize {
    let mut s = v.to_vec();
    s.sort_by(cmp);
    s.dedup();
    s.len()
}

/// Sum of t(t-1)/2 over runs of equal keys in an already sorted sequence.
fn tied_pairs<K: PartialEq>(sorted: impl Iterator<Item = K>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<K> = None;
    for k in sorted {
        if prev.as_ref() == Some(&k) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(k);
    }
    total + run * (run + 1) / 2
}

/// Stable merge sort returning the number of strict inversions.
fn count_inversions<T: Scalar>(v: &mut [T], buf: &mut Vec<T>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Concordant minus discordant pairs; pairs tied in either coordinate count
/// as neither. O(n log n).
fn concordance_balance<T: Scalar>(x: &[T], y: &[T]) -> i64 {
    let n = x.len() as u64;
    let mut pairs: Vec<(T, T)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(&a.0, &b.0).then(cmp(&a.1, &b.1)));
    let tie_x = tied_pairs(pairs.iter().map(|p| p.0));
    let tie_xy = tied_pairs(pairs.iter().map(|p| (p.0, p.1)));
    let mut ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    // with x ties pre-sorted by y, inversions are exactly the discordant pairs
    let mut buf = Vec::with_capacity(ys.len());
    let discordant = count_inversions(&mut ys, &mut buf);
    let tie_y = tied_pairs(ys.iter().copied());
    let total = n * (n - 1) / 2;
    let concordant = total - tie_x - tie_y + tie_xy - discordant;
    concordant as i64 - discordant as i64
}

/// Stuart's tau-c: `2m(C - D) / (n^2 (m - 1))`, m = min(#distinct x, #distinct y).
pub fn kendall_tau_c<T: Scalar>(pairs: &RatingPairs<T>) -> Result<T> {
    let n = pairs.len();
    let m = distinct(&pairs.x).min(distinct(&pairs.y));
    if m < 2 {
        return Err(Error::DegenerateInput(
            "tau-c needs at least two distinct values in each list".into(),
        ));
    }
    let balance = concordance_balance(&pairs.x, &pairs.y);
    let (m, n) = (m as f64, n as f64);
    Ok(T::of(2.0 * m * balance as f64 / (n * n * (m - 1.0))))
}

/// Sample Pearson correlation.
pub fn pearson<T: Scalar>(pairs: &RatingPairs<T>) -> Result<T> {
    let n = T::of(pairs.len() as f64);
    let mx = pairs.x.iter().copied().sum::<T>() / n;
    let my = pairs.y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in pairs.x.iter().zip(&pairs.y) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::DegenerateInput(
            "pearson needs non-constant lists".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}
