//! Distribution of the ratio `Z = X / Y` of two correlated normal variables.
//!
//! The quantile comes from the quadratic `C₁z² + C₂z + C₃ = 0` with
//!
//! ```text
//! C₁ = 1/γ_Y² − t²
//! C₂ = 2ω (ρ t² − 1/(γ_X γ_Y))
//! C₃ = ω² (1/γ_X² − t²)
//! ```
//!
//! where `t = Φ⁻¹(p)`. Solving the same quadratic for `t` gives the forward
//! CDF, so the two functions are exact inverses of each other.

use crate::error::{Error, Result};
use crate::normal::{standard_normal_cdf, standard_normal_quantile};
use crate::var1::SubgroupStats;

/// Coefficients of variation above this leave the approximation's usual range.
pub const VALIDITY_LIMIT: f64 = 0.2;

/// `(γ_X, γ_Y, ω, ρ)` parameterization of the ratio distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioParams {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub omega: f64,
    pub rho: f64,
}

impl RatioParams {
    pub fn new(gamma_x: f64, gamma_y: f64, omega: f64, rho: f64) -> Result<Self> {
        for (name, v) in [("gamma_x", gamma_x), ("gamma_y", gamma_y), ("omega", omega)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::invalid("rho", format!("correlation must lie in (-1, 1), got {rho}")));
        }
        Ok(Self { gamma_x, gamma_y, omega, rho })
    }

    pub fn from_stats(stats: &SubgroupStats) -> Result<Self> {
        Self::new(stats.gamma_xbar, stats.gamma_ybar, stats.omega_bar, stats.rho_bar)
    }

    /// True when either coefficient of variation exceeds [`VALIDITY_LIMIT`].
    /// Results are still computed but the normal approximation of the
    /// denominator becomes rough.
    pub fn outside_validity_range(&self) -> bool {
        self.gamma_x > VALIDITY_LIMIT || self.gamma_y > VALIDITY_LIMIT
    }

    /// The point where both quadratic branches meet; `F_Z(median) = 1/2`.
    pub fn median(&self) -> f64 {
        self.omega * self.gamma_y / self.gamma_x
    }

    /// Same parameters with the standard-deviation ratio scaled by `factor`.
    pub fn with_scaled_omega(&self, factor: f64) -> Result<Self> {
        Self::new(self.gamma_x, self.gamma_y, self.omega * factor, self.rho)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        ratio_quantile(p, self)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        ratio_cdf(z, self)
    }
}

/// `F_Z⁻¹(p)`.
///
/// Uses the `−` root for `p ≤ 1/2` and the `+` root above. The discriminant
/// is evaluated as `4ω²t²[(b + c − 2ρa) − (1 − ρ²)t²]` with
/// `a = 1/(γ_Xγ_Y)`, `b = 1/γ_Y²`, `c = 1/γ_X²`, which is algebraically
/// `C₂² − 4C₁C₃` but free of the cancellation that the expanded form suffers
/// near the median.
pub fn ratio_quantile(p: f64, params: &RatioParams) -> Result<f64> {
    let t = standard_normal_quantile(p)?;
    let RatioParams { gamma_x, gamma_y, omega, rho } = *params;
    let t2 = t * t;
    let a = 1.0 / (gamma_x * gamma_y);
    let b = 1.0 / (gamma_y * gamma_y);
    let c = 1.0 / (gamma_x * gamma_x);
    let c1 = b - t2;
    if !(c1 > 0.0) {
        return Err(Error::ApproximationDomain {
            p,
            reason: "C1 <= 0: the tail probability is too extreme for gamma_y",
        });
    }
    let c2 = 2.0 * omega * (rho * t2 - a);
    let inner = (b + c - 2.0 * rho * a) - (1.0 - rho * rho) * t2;
    if inner < 0.0 {
        return Err(Error::ApproximationDomain { p, reason: "negative discriminant" });
    }
    let sqrt_disc = 2.0 * omega * t.abs() * inner.sqrt();
    let root = if p <= 0.5 { (-c2 - sqrt_disc) / (2.0 * c1) } else { (-c2 + sqrt_disc) / (2.0 * c1) };
    Ok(root)
}

/// `F_Z(z)`, the algebraic inverse of [`ratio_quantile`].
pub fn ratio_cdf(z: f64, params: &RatioParams) -> f64 {
    standard_normal_cdf(ratio_score(z, params))
}

/// The standard-normal score `t` with `F_Z(z) = Φ(t)`.
pub fn ratio_score(z: f64, params: &RatioParams) -> f64 {
    let RatioParams { gamma_x, gamma_y, omega, rho } = *params;
    // (z/γ_Y − ω/γ_X)² = z²/γ_Y² − 2ωz/(γ_Xγ_Y) + ω²/γ_X²
    let num = (z / gamma_y - omega / gamma_x).powi(2);
    let den = z * z - 2.0 * rho * omega * z + omega * omega;
    let magnitude = (num / den).max(0.0).sqrt();
    if z < params.median() {
        -magnitude
    } else {
        magnitude
    }
}
