//! One-pass moments and the confidence-targeted stopping rule.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Count, mean and centered second moment (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamingMoments<T: Real> {
    count: u64,
    mean: T,
    m2: T,
}

impl<T: Real> StreamingMoments<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: T) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NumericalHealth(format!(
                "non-finite sample {:?} in moment accumulator",
                x
            )));
        }
        self.count += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::of_usize(self.count as usize);
        self.m2 = self.m2 + delta * (x - self.mean);
        Ok(())
    }

    /// Exact pairwise combination (Chan, Golub and LeVeque).
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = T::of_usize(self.count as usize);
        let nb = T::of_usize(other.count as usize);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean = self.mean + delta * nb / n;
        self.m2 = self.m2 + other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn m2(&self) -> T {
        self.m2
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> T {
        if self.count < 2 {
            return T::nan();
        }
        self.m2 / T::of_usize(self.count as usize - 1)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> T {
        (self.variance() / T::of_usize(self.count as usize)).sqrt()
    }
}

/// Stop once the two-sided `confidence` interval of the rate has halfwidth at
/// most `halfwidth` bits/s/Hz, within `[min_samples, max_samples]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    confidence: f64,
    halfwidth: f64,
    min_samples: u64,
    max_samples: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            confidence: 0.90,
            halfwidth: 0.005,
            min_samples: 1_000,
            max_samples: 100_000_000,
        }
    }
}

impl StoppingRule {
    pub fn new(confidence: f64, halfwidth: f64, min_samples: u64, max_samples: u64) -> Result<Self> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence must lie in (0, 1), got {confidence}"
            )));
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "halfwidth must be finite and positive, got {halfwidth}"
            )));
        }
        if min_samples < 2 || min_samples > max_samples {
            return Err(Error::InvalidArgument(format!(
                "need 2 <= min_samples <= max_samples, got {min_samples} and {max_samples}"
            )));
        }
        Ok(Self {
            confidence,
            halfwidth,
            min_samples,
            max_samples,
        })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn min_samples(&self) -> u64 {
        self.min_samples
    }

    pub fn max_samples(&self) -> u64 {
        self.max_samples
    }

    /// Two-sided standard-normal quantile, `Φ⁻¹((1 + confidence)/2)`.
    pub fn z_value(&self) -> f64 {
        Normal::standard().inverse_cdf(0.5 * (1.0 + self.confidence))
    }

    /// Whether a per-block stderr (bits) meets the target after dividing by `n_b`.
    pub fn satisfied(&self, count: u64, stderr_block: f64, n_b: usize) -> bool {
        count >= self.min_samples && self.z_value() * stderr_block / n_b as f64 <= self.halfwidth
    }
}
