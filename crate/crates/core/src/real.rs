//! Scalar abstraction for probability vectors.
//!
//! Everything that touches a distribution (providers, masking, sampling,
//! the pass@k estimator) is generic over [`Real`], so the same code runs on
//! `f32` and `f64`. The crate root re-exports `f64` aliases for the common
//! case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable as a probability: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`; used for constants and parsed values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    /// Lossy conversion from a count.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute tolerance when checking that `len` probabilities sum to one.
    ///
    /// `1e-6` for `f64`; widened for `f32` where summing tens of thousands
    /// of entries loses more than that.
    fn sum_tolerance(len: usize) -> Self {
        let rounding = Self::epsilon() * Self::of_usize(len.max(1)) * Self::of(4.0);
        Self::of(1e-6).max(rounding)
    }

    /// Slack used when comparing cumulative mass to a threshold.
    fn cumulative_slack() -> Self {
        Self::epsilon() * Self::of(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Checks the provider contract: right length, finite, non-negative, sums to one.
pub fn check_distribution<F: Real>(dist: &[F], expected_len: usize) -> Result<(), String> {
    if dist.len() != expected_len {
        return Err(format!(
            "distribution has {} entries, expected {expected_len}",
            dist.len()
        ));
    }
    if let Some((i, p)) = dist.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < F::zero()) {
        return Err(format!("entry {i} is {p}, not a finite non-negative value"));
    }
    let total: F = dist.iter().copied().sum();
    if (total - F::one()).abs() > F::sum_tolerance(dist.len()) {
        return Err(format!("distribution sums to {total}, not 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_wider_for_f32() {
        assert_eq!(f64::sum_tolerance(10), 1e-6);
        assert!(f32::sum_tolerance(50_000) > 1e-6);
    }

    #[test]
    fn distribution_checks() {
        assert!(check_distribution(&[0.25f64, 0.75], 2).is_ok());
        assert!(check_distribution(&[0.25f64, 0.75], 3).is_err());
        assert!(check_distribution(&[0.5f64, 0.6], 2).is_err());
        assert!(check_distribution(&[-0.5f64, 1.5], 2).is_err());
        assert!(check_distribution(&[f32::NAN, 1.0], 2).is_err());
    }
}
