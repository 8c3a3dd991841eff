//! Scalar abstraction for scores and aggregates.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type used for ratios, scores and aggregate statistics.
/// Implemented for `f32` and `f64`; the crate-root aliases use `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn hundred() -> Self {
        Self::lit(100.0)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// `num / den`, or zero when `den` is zero.
pub fn count_ratio<F: Scalar>(num: usize, den: usize) -> F {
    if den == 0 {
        F::zero()
    } else {
        F::from_count(num) / F::from_count(den)
    }
}

/// `100 * num / den`, or zero when `den` is zero.
pub fn percentage<F: Scalar>(num: usize, den: usize) -> F {
    if den == 0 {
        F::zero()
    } else {
        F::hundred() * F::from_count(num) / F::from_count(den)
    }
}

/// Rounds to `places` decimal digits (half away from zero).
pub fn round_to<F: Scalar>(v: F, places: i32) -> F {
    let scale = F::lit(10f64.powi(places));
    (v * scale).round() / scale
}
