//! Non-negative weights stored by their natural logarithm.
//!
//! Scores in long-running models multiply into values far below the smallest
//! positive `f64`, so every weight in the library lives in log space. A log of
//! `-inf` is the zero weight; it is a legal value and absorbs under
//! multiplication, which is how a zero-density observation kills a particle.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Mul, MulAssign};

use crate::error::{Error, Result};

/// A weight `w = exp(log_value)`, never NaN.
#[derive(Clone, Copy, PartialEq)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    /// Wraps a log value. Panics on NaN; use [`LogWeight::try_from_log`] for
    /// values that come from outside the library.
    pub fn from_log(log_value: f64) -> Self {
        assert!(!log_value.is_nan(), "LogWeight cannot hold NaN");
        LogWeight(saturate(log_value))
    }

    pub fn try_from_log(log_value: f64) -> Result<Self> {
        if log_value.is_nan() {
            Err(Error::NanWeight)
        } else {
            Ok(LogWeight(saturate(log_value)))
        }
    }

    pub fn from_prob(p: f64) -> Result<Self> {
        if p.is_nan() || p < 0.0 {
            return Err(Error::NegativeProbability(p));
        }
        Ok(LogWeight(saturate(p.ln())))
    }

    /// Exponentiates; underflows to `0.0` for very negative logs.
    pub fn to_prob(self) -> f64 {
        self.0.exp()
    }

    pub fn log_value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn mul(self, other: LogWeight) -> LogWeight {
        if self.is_zero() || other.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(saturate(self.0 + other.0))
        }
    }

    pub fn div(self, divisor: LogWeight) -> Result<LogWeight> {
        if divisor.is_zero() {
            return Err(Error::ZeroWeightDivisor);
        }
        if self.is_zero() {
            return Ok(LogWeight::ZERO);
        }
        Ok(LogWeight(saturate(self.0 - divisor.0)))
    }

    /// `w^k` for a real exponent.
    pub fn powf(self, k: f64) -> LogWeight {
        if self.is_zero() {
            if k > 0.0 {
                LogWeight::ZERO
            } else {
                LogWeight::ONE
            }
        } else {
            LogWeight::from_log(self.0 * k)
        }
    }

    /// Stable log-sum-exp, shifted by the largest element. The empty sum is
    /// the zero weight.
    pub fn sum<'a, I>(weights: I) -> LogWeight
    where
        I: IntoIterator<Item = &'a LogWeight>,
    {
        let logs: Vec<f64> = weights.into_iter().map(|w| w.0).collect();
        LogWeight(saturate(log_sum_exp(&logs)))
    }
}

/// `ln(sum(exp(x_i)))` against the maximum; `-inf` for an empty slice.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let shifted: f64 = logs.iter().map(|&l| (l - max).exp()).sum();
    max + shifted.ln()
}

// +inf is not a weight; clamp it to the largest finite log.
fn saturate(log_value: f64) -> f64 {
    if log_value == f64::INFINITY {
        f64::MAX
    } else {
        log_value
    }
}

impl Default for LogWeight {
    fn default() -> Self {
        LogWeight::ONE
    }
}

impl Mul for LogWeight {
    type Output = LogWeight;
    fn mul(self, rhs: LogWeight) -> LogWeight {
        LogWeight::mul(self, rhs)
    }
}

impl MulAssign for LogWeight {
    fn mul_assign(&mut self, rhs: LogWeight) {
        *self = LogWeight::mul(*self, rhs);
    }
}

impl<'a> Sum<&'a LogWeight> for LogWeight {
    fn sum<I: Iterator<Item = &'a LogWeight>>(iter: I) -> LogWeight {
        LogWeight::sum(iter)
    }
}

impl PartialOrd for LogWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Debug for LogWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Exp({})", self.0)
    }
}

impl fmt::Display for LogWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Exp({})", self.0)
    }
}
