//! Order-independent summary statistics.
//!
//! Values are sorted before reduction, so every result is bit-identical for
//! any permutation of the input.

use crate::num::Scalar;

fn sorted<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let sum = sorted(values).into_iter().fold(F::zero(), |acc, v| acc + v);
    Some(sum / F::from_count(values.len()))
}

/// Population standard deviation (divisor N).
pub fn population_std<F: Scalar>(values: &[F]) -> Option<F> {
    let m = mean(values)?;
    let devs: Vec<F> = values.iter().map(|&v| (v - m) * (v - m)).collect();
    let var = sorted(&devs).into_iter().fold(F::zero(), |acc, v| acc + v)
        / F::from_count(values.len());
    Some(var.sqrt())
}

/// Coefficient of variation `std / mean`; zero when the mean is zero.
pub fn coefficient_of_variation<F: Scalar>(mean: F, std: F) -> F {
    if mean == F::zero() {
        F::zero()
    } else {
        std / mean
    }
}
