use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Norms below this are treated as zero and give a cosine of exactly 0.
pub const NORM_FLOOR: f64 = 1e-12;

pub fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

pub fn norm<T: Scalar>(u: &[T]) -> T {
    dot(u, u).sqrt()
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    check_dims(u.len(), v.len())?;
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked<T: Scalar>(u: &[T], v: &[T]) -> T {
    let nu = norm(u);
    let nv = norm(v);
    let floor = T::of(NORM_FLOOR);
    if nu < floor || nv < floor {
        return T::zero();
    }
    let c = dot(u, v) / (nu * nv);
    c.max(-T::one()).min(T::one())
}

/// Cosine together with its gradients with respect to both arguments.
///
/// d cos / du = v / (|u||v|) - cos * u / |u|^2, and symmetrically for v.
/// Both gradients are zero under the zero-norm rule.
pub(crate) fn cosine_with_grad<T: Scalar>(u: &[T], v: &[T]) -> (T, Vec<T>, Vec<T>) {
    let nu = norm(u);
    let nv = norm(v);
    let floor = T::of(NORM_FLOOR);
    if nu < floor || nv < floor {
        return (
            T::zero(),
            vec![T::zero(); u.len()],
            vec![T::zero(); v.len()],
        );
    }
    let inv = T::one() / (nu * nv);
    let c = dot(u, v) * inv;
    let cu = c / (nu * nu);
    let cv = c / (nv * nv);
    let du = u.iter().zip(v).map(|(&a, &b)| b * inv - cu * a).collect();
    let dv = u.iter().zip(v).map(|(&a, &b)| a * inv - cv * b).collect();
    (c.max(-T::one()).min(T::one()), du, dv)
}

pub fn normalize<T: Scalar>(u: &[T]) -> Vec<T> {
    let n = norm(u);
    if n < T::of(NORM_FLOOR) {
        return vec![T::zero(); u.len()];
    }
    u.iter().map(|&x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0f64).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0f64);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0f64);
        assert_eq!(cosine(&[1.0f32, 0.0], &[-2.0, 0.0]).unwrap(), -1.0f32);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            cosine(&[1.0f64], &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn gradient_matches_central_difference() {
        let u = [0.3f64, -1.2, 0.7];
        let v = [1.1f64, 0.4, -0.5];
        let (_, du, dv) = cosine_with_grad(&u, &v);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let num = (cosine_unchecked(&up, &v) - cosine_unchecked(&dn, &v)) / (2.0 * h);
            assert!((num - du[k]).abs() < 1e-8);
            let mut up = v;
            let mut dn = v;
            up[k] += h;
            dn[k] -= h;
            let num = (cosine_unchecked(&u, &up) - cosine_unchecked(&u, &dn)) / (2.0 * h);
            assert!((num - dv[k]).abs() < 1e-8);
        }
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, 3)
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(u in vec3(), v in vec3(), alpha in 0.01..100.0f64) {
            let c = cosine(&u, &v).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert_eq!(c, cosine(&v, &u).unwrap());
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine(&scaled, &v).unwrap() - c).abs() < 1e-12);
        }
    }
}
