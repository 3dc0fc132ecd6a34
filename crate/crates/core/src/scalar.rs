//! Numeric abstractions shared by the metric, agreement and decoding code.
//!
//! Rational-valued quantities (accuracy, Kendall's tau, Cohen's kappa, displacement sums) are
//! generic over [`Scalar`], which admits `f32`, `f64` and exact rationals such as
//! [`Ratio<i64>`](num_rational::Ratio). Decoding works in the log domain and therefore needs
//! [`Real`], i.e. an IEEE float.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// A signed field element usable for exact or floating-point metric arithmetic.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Lossless conversion for the small counts that appear in metrics.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `num / den` computed in the scalar's own arithmetic.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    /// Lossy view used for rendering and serialization.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + Signed + Copy + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

/// Floating point: f32 or f64.
pub trait Real: Scalar + Float {
    fn from_f64_lossy(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite f64 converts to float type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Running arithmetic mean, `m_k = m_{k-1} + (x_k - m_{k-1}) / k`, in input order.
///
/// The mean of identical values is that value exactly, even in floating point.
pub(crate) fn mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut acc: Option<T> = None;
    for (k, v) in values.into_iter().enumerate() {
        acc = Some(match acc {
            None => v,
            Some(m) => m + (v - m) / T::from_count(k + 1),
        });
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn ratio_is_exact_for_rationals() {
        assert_eq!(Ratio::<i64>::ratio(2, 6), Ratio::new(1, 3));
        assert_eq!(f64::ratio(3, 5), 0.6);
    }

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(Vec::new()), None);
        assert_eq!(
            mean([Ratio::<i64>::new(1, 2), Ratio::new(1, 4)]),
            Some(Ratio::new(3, 8))
        );
        assert_eq!(mean(std::iter::repeat_n(0.6f64, 1000)), Some(0.6));
    }
}
