//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the analysis routines are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in the docs assume
/// `f64`; `f32` runs carry single-precision rounding.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal or parameter into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Float scalar")
    }

    /// Widening (or identity) conversion used by the table writers.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Float scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to Float scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean in slice order. `None` for an empty slice.
pub(crate) fn mean<F: Scalar>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        return None;
    }
    let sum: F = xs.iter().copied().sum();
    Some(sum / F::from_usize_lossy(xs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(&[]), None);
        assert_eq!(mean(&[1.0f32, 2.0, 6.0]), Some(3.0));
    }

    #[test]
    fn lit_round_trips_f64() {
        assert_eq!(<f64 as Scalar>::lit(0.95), 0.95);
        assert_eq!(<f32 as Scalar>::lit(0.5).as_f64(), 0.5);
    }
}
