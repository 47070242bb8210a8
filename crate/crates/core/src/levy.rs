//! Asymmetric α-stable jump measures with stability index `α ∈ (0, 1)`.
//!
//! The measure `ν_{α,β}(dξ) = c1 ξ^{-1-α} 1{ξ>0} dξ + c2 |ξ|^{-1-α} 1{ξ<0} dξ`
//! has one-sided weights `c1 = k_α (1+β)/2`, `c2 = k_α (1-β)/2` and skewness
//! `β = (c1-c2)/(c1+c2)`. For `α < 1` the measure has bounded variation near
//! the origin, so the mean of small jumps
//! `Λ_{α,β} = ∫_{|ξ|<1} ξ ν(dξ) = αβ / (Γ(2-α) cos(πα/2))`
//! is finite and enters the drift of the Onsager-Machlup function.
//!
//! Simulation follows the usual compound-Poisson truncation: jumps with
//! `|ξ| >= δ` are sampled exactly (Poisson count, Pareto magnitudes), while
//! the sub-threshold remainder is replaced by its deterministic mean rate
//! `m_δ = ∫_{|ξ|<δ} ξ ν(dξ)`. The omitted variance is `O(δ^{2-α})`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::special::gamma;

/// Default truncation threshold for sub-threshold jump compensation.
pub const DEFAULT_JUMP_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevyError {
    #[error("stability index alpha must lie in {range}, got {value}")]
    InvalidAlpha { value: f64, range: &'static str },
    #[error("skewness beta must lie in [-1, 1], got {0}")]
    InvalidBeta(f64),
    #[error("threshold delta must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("truncation threshold delta must lie in (0, 1), got {0}")]
    ThresholdOutOfRange(f64),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
}

/// Jump-measure parameters plus the derived constants used everywhere else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStableMeasure {
    alpha: f64,
    beta: f64,
    k_alpha: f64,
    c1: f64,
    c2: f64,
    lambda_mean: f64,
}

/// Normalization constant `k_α` of the stable jump measure.
///
/// `k_α = α(1-α) / (Γ(2-α) cos(πα/2))` for `α < 1` and `2/π` at `α = 1`.
/// Accepts `α ∈ (0, 1]`; the measure type itself is restricted to `α < 1`.
pub fn k_alpha(alpha: f64) -> Result<f64, LevyError> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(LevyError::InvalidAlpha {
            value: alpha,
            range: "(0, 1]",
        });
    }
    if alpha == 1.0 {
        return Ok(2.0 / std::f64::consts::PI);
    }
    Ok(alpha * (1.0 - alpha) / (gamma(2.0 - alpha) * (std::f64::consts::PI * alpha / 2.0).cos()))
}

impl AlphaStableMeasure {
    /// Build the measure for `α ∈ (0, 1)`, `β ∈ [-1, 1]`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self, LevyError> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(LevyError::InvalidAlpha {
                value: alpha,
                range: "(0, 1)",
            });
        }
        if !beta.is_finite() || !(-1.0..=1.0).contains(&beta) {
            return Err(LevyError::InvalidBeta(beta));
        }
        let k = k_alpha(alpha)?;
        let c1 = k * (1.0 + beta) / 2.0;
        let c2 = k * (1.0 - beta) / 2.0;
        let lambda_mean =
            alpha * beta / (gamma(2.0 - alpha) * (std::f64::consts::PI * alpha / 2.0).cos());
        Ok(Self {
            alpha,
            beta,
            k_alpha: k,
            c1,
            c2,
            lambda_mean,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k_alpha(&self) -> f64 {
        self.k_alpha
    }

    /// One-sided density weights `(c1, c2)`.
    pub fn weights(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    /// Mean of small jumps `Λ_{α,β} = ∫_{|ξ|<1} ξ ν(dξ)`.
    ///
    /// Equals `(c1 - c2)/(1 - α)`; the cached value uses the closed form
    /// `αβ / (Γ(2-α) cos(πα/2))`.
    pub fn small_jump_mean(&self) -> f64 {
        self.lambda_mean
    }

    /// Density of the measure at `ξ != 0`.
    pub fn density(&self, xi: f64) -> f64 {
        if xi > 0.0 {
            self.c1 * xi.powf(-1.0 - self.alpha)
        } else if xi < 0.0 {
            self.c2 * (-xi).powf(-1.0 - self.alpha)
        } else {
            f64::INFINITY
        }
    }

    /// Total mass of `{|ξ| >= δ}`: the Poisson rate of super-threshold jumps.
    ///
    /// `ν({|ξ| >= δ}) = (c1 + c2) δ^{-α} / α = k_α δ^{-α} / α`.
    pub fn tail_mass(&self, delta: f64) -> Result<f64, LevyError> {
        if !delta.is_finite() && delta > 0.0 {
            return Ok(0.0); // delta = +inf: empty tail
        }
        if !(delta > 0.0) {
            return Err(LevyError::NonPositiveThreshold(delta));
        }
        Ok(self.k_alpha * delta.powf(-self.alpha) / self.alpha)
    }

    /// Mean of sub-threshold jumps `m_δ = ∫_{|ξ|<δ} ξ ν(dξ)` for `δ ∈ (0, 1)`.
    ///
    /// `m_δ = (c1 - c2) δ^{1-α} / (1 - α)`; tends to 0 as `δ → 0` and to
    /// `Λ_{α,β}` as `δ → 1`.
    pub fn truncated_small_mean(&self, delta: f64) -> Result<f64, LevyError> {
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(LevyError::ThresholdOutOfRange(delta));
        }
        Ok((self.c1 - self.c2) * delta.powf(1.0 - self.alpha) / (1.0 - self.alpha))
    }

    /// Sample the super-threshold jumps of one realization on `[0, T]`.
    ///
    /// The jump count is Poisson with mean `T * tail_mass(δ)`, times are
    /// uniform on `[0, T]`, signs are positive with probability
    /// `c1/(c1+c2) = (1+β)/2`, and magnitudes follow the inverse-CDF Pareto
    /// rule `|ξ| = δ U^{-1/α}` with `U` uniform on `(0, 1]`. Draw order is
    /// fixed (count, then per-jump time/sign/magnitude, then a sort by
    /// time), so output is fully determined by the generator state.
    pub fn sample_jumps<R: Rng + ?Sized>(
        &self,
        horizon: f64,
        delta: f64,
        rng: &mut R,
    ) -> Result<JumpTrain, LevyError> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(LevyError::InvalidHorizon(horizon));
        }
        let compensator = self.truncated_small_mean(delta)?;
        let rate = self.tail_mass(delta)?;
        let mean = rate * horizon;
        let count = if mean > 0.0 {
            let pois = Poisson::new(mean).expect("positive finite mean");
            pois.sample(rng) as usize
        } else {
            0
        };
        let p_pos = (1.0 + self.beta) / 2.0;
        let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(count);
        for _ in 0..count {
            let t = rng.random::<f64>() * horizon;
            let positive = rng.random_bool(p_pos);
            // 1 - random() lies in (0, 1]: U = 1 maps to the smallest
            // magnitude delta, U -> 0 to arbitrarily large jumps.
            let u = 1.0 - rng.random::<f64>();
            let magnitude = delta * u.powf(-1.0 / self.alpha);
            jumps.push((t, if positive { magnitude } else { -magnitude }));
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, sizes) = jumps.into_iter().unzip();
        Ok(JumpTrain {
            times,
            sizes,
            threshold: delta,
            compensator_drift: compensator,
        })
    }
}

/// One realization of the super-threshold jump part of the process.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrain {
    /// Jump times, sorted ascending in `[0, T]`.
    pub times: Vec<f64>,
    /// Signed jump sizes; all `|sizes| >= threshold`.
    pub sizes: Vec<f64>,
    /// Truncation level the train was sampled at.
    pub threshold: f64,
    /// Deterministic rate `m_δ` standing in for the omitted small jumps.
    pub compensator_drift: f64,
}

impl JumpTrain {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
