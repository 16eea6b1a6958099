//! Pharmacist sorting-time model `X ~ N(mu, sigma^2)`.
//!
//! Analytic expectations use the untruncated normal. Sampling clamps draws
//! at zero, so the two modes differ by the (small) lower-tail mass.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticsError {
    #[error("sorting model requires mu >= 0 and sigma >= 0, got mu={mu}, sigma={sigma}")]
    InvalidModel { mu: f64, sigma: f64 },
    #[error("travel time must be nonnegative, got {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortingModel {
    pub mu: f64,
    pub sigma: f64,
}

impl SortingModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, StochasticsError> {
        if !(mu >= 0.0 && sigma >= 0.0 && mu.is_finite() && sigma.is_finite()) {
            return Err(StochasticsError::InvalidModel { mu, sigma });
        }
        Ok(Self { mu, sigma })
    }

    pub fn deterministic(mu: f64) -> Result<Self, StochasticsError> {
        Self::new(mu, 0.0)
    }

    /// `E[X]` under the untruncated normal.
    #[inline]
    pub fn mean(&self) -> f64 {
        self.mu
    }

    /// `E[max(X, t)]`, see [`expected_max`].
    pub fn expected_max(&self, t: f64) -> Result<f64, StochasticsError> {
        expected_max(self, t)
    }

    #[inline]
    pub(crate) fn expected_max_unchecked(&self, t: f64) -> f64 {
        if self.sigma == 0.0 {
            return self.mu.max(t);
        }
        let z = (t - self.mu) / self.sigma;
        t * normal_cdf(z) + self.mu * normal_sf(z) + self.sigma * normal_pdf(z)
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via `erfc`, accurate in both tails.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Phi(z)`.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Expected picking time of one overlapped cycle: `E[max(X, t)]`.
///
/// With `z = (t - mu) / sigma` this is
/// `t * Phi(z) + mu * (1 - Phi(z)) + sigma * phi(z)`; for `sigma = 0` it is
/// `max(mu, t)` exactly.
pub fn expected_max(model: &SortingModel, t: f64) -> Result<f64, StochasticsError> {
    // NaN fails too
    if t.partial_cmp(&0.0).is_none_or(|o| o.is_lt()) {
        return Err(StochasticsError::NegativeTime(t));
    }
    Ok(model.expected_max_unchecked(t))
}

/// One raw normal draw, not clamped.
pub fn draw_untruncated<R: Rng + ?Sized>(model: &SortingModel, rng: &mut R) -> f64 {
    if model.sigma == 0.0 {
        return model.mu;
    }
    let z: f64 = rng.sample(StandardNormal);
    model.mu + model.sigma * z
}

/// Sampled sorting time, clamped at zero.
pub fn sample_sorting<R: Rng + ?Sized>(model: &SortingModel, rng: &mut R) -> f64 {
    draw_untruncated(model, rng).max(0.0)
}
