//! Scalar abstraction over the floating-point type used for times, powers,
//! prices, and costs.
//!
//! States and events are integers, but everything measured on the grid
//! timeline (hours, megawatts, currency) is a [`Scalar`]. The engine is
//! generic so it runs on `f32` or `f64`; the crate-root aliases pin `f64`,
//! which is what the command-line tool uses.

use std::fmt;

use num_traits::{Float, FromPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar for grid times (decimal hours), powers (MW),
/// prices (currency per MWh), and costs (currency).
pub trait Scalar:
    Float
    + FromPrimitive
    + fmt::Debug
    + fmt::Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance used for time and cost comparisons.
    fn tol() -> Self;

    /// Converts an `f64` literal (configuration values, fixed constants).
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("finite configuration literal")
    }

    /// Converts a part count, used as the denominator of average costs.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("part count representable as scalar")
    }

    /// Lossy view for error messages and reports.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    // f32 carries roughly seven significant digits; a tighter bound than
    // this would be below one ulp for times around a day's worth of hours.
    fn tol() -> Self {
        1e-4
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_are_positive_and_small() {
        assert!(f64::tol() > 0.0 && f64::tol() < 1e-6);
        assert!(f32::tol() > 0.0 && f32::tol() < 1e-2);
    }

    #[test]
    fn count_conversion_is_exact_for_small_counts() {
        assert_eq!(f64::from_count(7), 7.0);
        assert_eq!(f32::from_count(3), 3.0);
    }
}
