//! Least-squares fit of a bivariate VAR(1) to a Phase I series.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::var1::{check_stationary, spectral_radius, symmetrize, Var1Model};

/// Shortest series accepted by default.
pub const DEFAULT_MIN_LENGTH: usize = 10;

/// An ordered bivariate series `(x_t, y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseISeries {
    observations: Vec<[f64; 2]>,
}

impl PhaseISeries {
    pub fn new(observations: Vec<[f64; 2]>) -> Result<Self> {
        if observations.len() < 3 {
            return Err(Error::invalid("series", "need at least 3 observations"));
        }
        if let Some(t) = observations.iter().position(|o| !o[0].is_finite() || !o[1].is_finite()) {
            return Err(Error::Data(format!("observation {} is missing or not finite", t + 1)));
        }
        Ok(Self { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[[f64; 2]] {
        &self.observations
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOptions {
    pub min_length: usize,
    /// Residual cross-correlations are reported for lags `1..=max_lag`.
    pub max_lag: usize,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self { min_length: DEFAULT_MIN_LENGTH, max_lag: 5 }
    }
}

/// Fitted parameters plus diagnostics.
///
/// The parameters are kept even when Φ̂ is not stationary, in which case
/// `model` is `None` and `stationary` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct Var1Estimate {
    pub mu: Vector2<f64>,
    pub phi: Matrix2<f64>,
    pub sigma_eps: Matrix2<f64>,
    pub length: usize,
    pub spectral_radius: f64,
    pub stationary: bool,
    pub model: Option<Var1Model>,
    /// `residual_ccf[k-1]` is the 2×2 residual correlation matrix at lag `k`,
    /// entry `(i, j)` being corr(ε_{t,i}, ε_{t−k,j}).
    pub residual_ccf: Vec<Matrix2<f64>>,
}

pub fn estimate_var1(series: &PhaseISeries) -> Result<Var1Estimate> {
    estimate_var1_with(series, EstimationOptions::default())
}

pub fn estimate_var1_with(series: &PhaseISeries, options: EstimationOptions) -> Result<Var1Estimate> {
    let t_len = series.len();
    if t_len < options.min_length.max(4) {
        return Err(Error::invalid(
            "series",
            format!("need at least {} observations, got {t_len}", options.min_length.max(4)),
        ));
    }
    let w: Vec<Vector2<f64>> = series.observations.iter().map(|o| Vector2::new(o[0], o[1])).collect();
    let mu = w.iter().sum::<Vector2<f64>>() / t_len as f64;
    let centered: Vec<Vector2<f64>> = w.iter().map(|v| v - mu).collect();

    let mut s0 = Matrix2::zeros();
    let mut s1 = Matrix2::zeros();
    for pair in centered.windows(2) {
        s0 += pair[0] * pair[0].transpose();
        s1 += pair[1] * pair[0].transpose();
    }
    let scale = s0.abs().max();
    let rcond = {
        let sv = s0.singular_values();
        if sv.max() > 0.0 {
            sv.min() / sv.max()
        } else {
            0.0
        }
    };
    if !(scale > 0.0) || rcond < 1e-12 {
        return Err(Error::Estimation("lagged cross-product matrix is singular (constant or collinear series)".into()));
    }
    let s0_inv = s0.try_inverse().ok_or_else(|| Error::Estimation("lagged cross-product matrix is singular".into()))?;
    let phi = s1 * s0_inv;

    let residuals: Vec<Vector2<f64>> = centered.windows(2).map(|p| p[1] - phi * p[0]).collect();
    let mut sse = Matrix2::zeros();
    for e in &residuals {
        sse += e * e.transpose();
    }
    let sigma_eps = symmetrize(sse / (t_len - 3) as f64);

    let residual_ccf = cross_correlations(&residuals, options.max_lag);
    let rho = spectral_radius(&phi);
    let stationary = check_stationary(&phi).is_ok();
    let model = if stationary { Var1Model::new(mu, phi, sigma_eps).ok() } else { None };
    Ok(Var1Estimate { mu, phi, sigma_eps, length: t_len, spectral_radius: rho, stationary, model, residual_ccf })
}

fn cross_correlations(e: &[Vector2<f64>], max_lag: usize) -> Vec<Matrix2<f64>> {
    let m = e.len();
    let mean = e.iter().sum::<Vector2<f64>>() / m as f64;
    let c: Vec<Vector2<f64>> = e.iter().map(|v| v - mean).collect();
    let var = c.iter().fold(Vector2::zeros(), |acc: Vector2<f64>, v| acc + v.component_mul(v)) / m as f64;
    let sd = var.map(f64::sqrt);
    (1..=max_lag.min(m.saturating_sub(1)))
        .map(|k| {
            let mut acc = Matrix2::zeros();
            for t in k..m {
                acc += c[t] * c[t - k].transpose();
            }
            acc /= m as f64;
            Matrix2::from_fn(|i, j| {
                let d = sd[i] * sd[j];
                if d > 0.0 {
                    acc[(i, j)] / d
                } else {
                    0.0
                }
            })
        })
        .collect()
}
