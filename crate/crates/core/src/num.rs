//! Scalar abstraction for the layout metric and the shared rounding rule.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};

/// Coordinate type accepted by the metric.
///
/// Anything with field arithmetic and a total-enough order works: `f32`,
/// `f64`, or an exact rational such as `num_rational::Rational64`. The metric
/// only needs `+ - * /` and comparisons, so running it over rationals gives
/// bit-exact match decisions.
pub trait Scalar: Copy + PartialOrd + Num + FromPrimitive + Debug {}

impl<T> Scalar for T where T: Copy + PartialOrd + Num + FromPrimitive + Debug {}

pub(crate) fn max<T: PartialOrd>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

pub(crate) fn min<T: PartialOrd>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}

/// Rounds half-up: ties go toward positive infinity (`-2.5 -> -2`, `2.5 -> 3`).
pub fn round_half_up(value: f64) -> i64 {
    (value + 0.5).floor() as i64
}

/// Half-up rounded mean of integers, computed without floating point.
pub fn mean_half_up(sum: i64, count: i64) -> i64 {
    assert!(count > 0, "mean of an empty group");
    (2 * sum + count).div_euclid(2 * count)
}
