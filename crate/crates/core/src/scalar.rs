//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Real scalar usable by the encoder, the losses and the statistics: `f32` or `f64`.
///
/// Training and gradient checking run in `f64`; `f32` is the persisted
/// embedding precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-as-possible conversion from `f64` constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
