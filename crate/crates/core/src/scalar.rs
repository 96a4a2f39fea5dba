//! Real scalar abstraction shared by the linear algebra and precoding code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point type the whole numeric core is generic over (`f32` or `f64`).
///
/// Tolerances are expressed as `max(reference, k * epsilon)` so that the `f64`
/// path uses the reference thresholds unchanged while `f32` gets thresholds its
/// precision can actually reach.
pub trait RealScalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lift an `f64` literal into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lift a count into this type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// `max(reference, factor * epsilon)`.
    #[inline]
    fn tol(reference: f64, factor: f64) -> Self {
        Self::lit(reference).max(Self::lit(factor) * Self::epsilon())
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_floor_depends_on_precision() {
        assert_eq!(<f64 as RealScalar>::tol(1e-12, 4.0), 1e-12);
        let t32 = <f32 as RealScalar>::tol(1e-12, 4.0);
        assert!((t32 - 4.0 * f32::EPSILON).abs() < 1e-12);
    }
}
