//! Bivariate VAR(1) process: stationary covariance, subgroup-mean covariance
//! and the scalar parameters that feed the ratio distribution.
//!
//! The observation model is `W_j = μ + Φ (W_{j-1} − μ) + ε_j` with
//! `ε_j ~ N(0, Σ_ε)`. Its stationary covariance solves the Stein equation
//! `Σ_W = Φ Σ_W Φᵀ + Σ_ε`; the mean of `n` consecutive observations has
//! covariance
//!
//! ```text
//! Σ_W̄ = (1/n) [ Σ_W (I + Λ(Φᵀ) − Π(Φᵀ)/n) + (Λ(Φ) − Π(Φ)/n) Σ_W ]
//! Λ(Φ) = Σ_{k=1}^{n−1} Φᵏ,   Π(Φ) = Σ_{k=1}^{n−1} k Φᵏ
//! ```

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};

/// Eigenvalue moduli of Φ must stay below `1 − STATIONARITY_MARGIN`.
pub const STATIONARITY_MARGIN: f64 = 1e-9;

/// Negative eigenvalues of Σ_W̄ smaller than this in magnitude are round-off
/// and get clipped to zero.
pub const PSD_REPAIR_TOLERANCE: f64 = 1e-12;

/// Power sums up to this `n` are always formed by direct summation.
pub const DIRECT_SUM_LIMIT: usize = 10_000;

/// Closed-form power sums are only attempted when Φ is this well conditioned.
const CLOSED_FORM_MAX_CONDITION: f64 = 1e8;

/// Law of a bivariate VAR(1) process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Var1Model {
    mu: Vector2<f64>,
    phi: Matrix2<f64>,
    sigma_eps: Matrix2<f64>,
}

impl Var1Model {
    /// Validates and builds a model.
    ///
    /// `sigma_eps` must be symmetric (up to 1e-12 relative; it is then
    /// symmetrized) and positive semi-definite, Φ must be stationary and
    /// `mu_y` must be non-zero.
    pub fn new(mu: Vector2<f64>, phi: Matrix2<f64>, sigma_eps: Matrix2<f64>) -> Result<Self> {
        if mu.iter().chain(phi.iter()).chain(sigma_eps.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("model", "all entries must be finite"));
        }
        if mu.y == 0.0 {
            return Err(Error::invalid("mu_y", "denominator mean must be non-zero"));
        }
        let sigma_eps = checked_symmetric("sigma_eps", sigma_eps)?;
        check_psd("sigma_eps", &sigma_eps, 0.0)?;
        check_stationary(&phi)?;
        Ok(Self { mu, phi, sigma_eps })
    }

    /// Convenience constructor from row-major entries.
    pub fn from_entries(mu: [f64; 2], phi: [[f64; 2]; 2], sigma_eps: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(Vector2::from(mu), matrix_from_rows(phi), matrix_from_rows(sigma_eps))
    }

    pub fn mu(&self) -> Vector2<f64> {
        self.mu
    }

    pub fn phi(&self) -> Matrix2<f64> {
        self.phi
    }

    pub fn sigma_eps(&self) -> Matrix2<f64> {
        self.sigma_eps
    }

    /// Mean ratio μ_X / μ_Y.
    pub fn z(&self) -> f64 {
        self.mu.x / self.mu.y
    }

    pub fn is_diagonal(&self) -> bool {
        self.phi[(0, 1)] == 0.0 && self.phi[(1, 0)] == 0.0
    }

    /// Stationary covariance via the Kronecker linear system.
    pub fn stationary_covariance(&self) -> Result<StationaryCov> {
        stationary_covariance_with(self, CovarianceMethod::Kronecker)
    }

    /// Builds the model whose stationary law is `law` by solving for the
    /// innovation covariance `Σ_ε = Σ_W − Φ Σ_W Φᵀ`. Fails when that matrix is
    /// not positive semi-definite, i.e. when no VAR(1) with this Φ has the
    /// requested stationary covariance.
    pub fn from_stationary_law(law: &StationaryLaw) -> Result<Self> {
        let sw = law.sigma_w();
        let se = symmetrize(sw - law.phi() * sw * law.phi().transpose());
        let scale = sw.abs().max();
        check_psd("sigma_eps", &se, 1e-12 * scale)?;
        let se = clip_psd(se);
        Self::new(law.mu(), law.phi(), se)
    }
}

/// How [`stationary_covariance_with`] solves the Stein equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMethod {
    /// Solve `(I₄ − Φ⊗Φ) vec(Σ_W) = vec(Σ_ε)` by LU.
    #[default]
    Kronecker,
    /// Expand the inverse of `I₄ − Φ⊗Φ` through its Δ cofactor polynomials.
    ClosedForm,
    /// Run both and fail if they disagree by more than 1e-9 (relative).
    CrossChecked,
}

/// Stationary covariance Σ_W of the observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCov {
    pub sigma_w: Matrix2<f64>,
    /// σ_XY / (σ_X σ_Y); zero when either variance vanishes.
    pub rho: f64,
}

impl StationaryCov {
    fn from_matrix(sigma_w: Matrix2<f64>) -> Self {
        let sigma_w = symmetrize(sigma_w);
        Self { sigma_w, rho: correlation(&sigma_w) }
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_w[(0, 0)].sqrt()
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_w[(1, 1)].sqrt()
    }
}

pub fn stationary_covariance(model: &Var1Model) -> Result<StationaryCov> {
    model.stationary_covariance()
}

pub fn stationary_covariance_with(model: &Var1Model, method: CovarianceMethod) -> Result<StationaryCov> {
    check_stationary(&model.phi)?;
    let sigma_w = match method {
        CovarianceMethod::Kronecker => stein_kronecker(&model.phi, &model.sigma_eps)?,
        CovarianceMethod::ClosedForm => stein_closed_form(&model.phi, &model.sigma_eps)?,
        CovarianceMethod::CrossChecked => {
            let a = stein_kronecker(&model.phi, &model.sigma_eps)?;
            let b = stein_closed_form(&model.phi, &model.sigma_eps)?;
            let scale = a.abs().max().max(f64::MIN_POSITIVE);
            let gap = (a - b).abs().max() / scale;
            if gap > 1e-9 {
                return Err(Error::Singular { context: "cross-checking the Stein solution (routes disagree)" });
            }
            a
        }
    };
    Ok(StationaryCov::from_matrix(sigma_w))
}

fn vec_columns(m: &Matrix2<f64>) -> Vector4<f64> {
    // nalgebra storage is column-major, so this is the stacked-columns vec.
    Vector4::from_column_slice(m.as_slice())
}

fn unvec_columns(v: &Vector4<f64>) -> Matrix2<f64> {
    Matrix2::from_column_slice(v.as_slice())
}

fn stein_kronecker(phi: &Matrix2<f64>, sigma_eps: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let system: Matrix4<f64> = Matrix4::identity() - phi.kronecker(phi);
    let lu = system.lu();
    let v = lu
        .solve(&vec_columns(sigma_eps))
        .ok_or(Error::Singular { context: "solving (I4 - Phi (x) Phi) vec(Sigma_W) = vec(Sigma_eps)" })?;
    Ok(unvec_columns(&v))
}

/// The inverse of `I₄ − Φ⊗Φ` written as `(1/Δ)·[Δᵢⱼ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCoefficients {
    pub delta: f64,
    pub entries: [[f64; 4]; 4],
}

impl DeltaCoefficients {
    pub fn new(phi: &Matrix2<f64>) -> Self {
        let (a, b, c, d) = (phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
        let bc = b * c;
        let det_plus_one = a * d - bc + 1.0;
        let delta = (a * d - bc - 1.0) * (a * a * d * d - 2.0 * a * bc * d + bc * bc - a * a - 2.0 * bc - d * d + 1.0);
        let d11 = -(a * d.powi(3) - bc * d * d - a * d - bc - d * d + 1.0);
        let d12 = b * (a * d * d - bc * d - a);
        let d14 = -b * b * det_plus_one;
        let d21 = c * (a * d * d - bc * d - a);
        let d22 = -(a * a * d * d - a * bc * d - a * a - bc - d * d + 1.0);
        let d23 = -bc * det_plus_one;
        let d24 = b * (a * a * d - a * bc - d);
        let d41 = -c * c * det_plus_one;
        let d42 = c * (a * a * d - a * bc - d);
        let d44 = -(a.powi(3) * d - a * a * bc - a * a - a * d - bc + 1.0);
        Self {
            delta,
            entries: [[d11, d12, d12, d14], [d21, d22, d23, d24], [d21, d23, d22, d24], [d41, d42, d42, d44]],
        }
    }

    /// The 4×4 inverse these coefficients represent.
    pub fn inverse(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.entries[i][j] / self.delta)
    }
}

fn stein_closed_form(phi: &Matrix2<f64>, sigma_eps: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let coeffs = DeltaCoefficients::new(phi);
    if coeffs.delta == 0.0 || !coeffs.delta.is_finite() {
        return Err(Error::Singular { context: "evaluating the closed-form inverse (Delta = 0)" });
    }
    let (sx, sxy, sy) = (sigma_eps[(0, 0)], 0.5 * (sigma_eps[(0, 1)] + sigma_eps[(1, 0)]), sigma_eps[(1, 1)]);
    let row = |i: usize| {
        let e = &coeffs.entries[i];
        (e[0] * sx + (e[1] + e[2]) * sxy + e[3] * sy) / coeffs.delta
    };
    // vec order is (11, 21, 12, 22).
    Ok(Matrix2::new(row(0), row(2), row(1), row(3)))
}

/// Spectral radius of a real 2×2 matrix.
pub fn spectral_radius(m: &Matrix2<f64>) -> f64 {
    let half_trace = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m.determinant();
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (half_trace + r).abs().max((half_trace - r).abs())
    } else {
        det.sqrt()
    }
}

pub fn check_stationary(phi: &Matrix2<f64>) -> Result<()> {
    let spectral_radius = spectral_radius(phi);
    let bound = 1.0 - STATIONARITY_MARGIN;
    if !(spectral_radius < bound) {
        return Err(Error::NonStationary { spectral_radius, bound });
    }
    Ok(())
}

/// Λ(Φ) and Π(Φ) for one subgroup size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSums {
    pub lambda: Matrix2<f64>,
    pub pi: Matrix2<f64>,
}

/// Λ = Σ_{k=1}^{n−1} Φᵏ and Π = Σ_{k=1}^{n−1} k Φᵏ by direct summation.
pub fn matrix_power_sums(phi: &Matrix2<f64>, n: usize) -> Result<PowerSums> {
    if n == 0 {
        return Err(Error::invalid("n", "subgroup size must be at least 1"));
    }
    if n > DIRECT_SUM_LIMIT {
        if let Some(sums) = matrix_power_sums_closed_form(phi, n) {
            return Ok(sums);
        }
    }
    let mut lambda = Matrix2::zeros();
    let mut pi = Matrix2::zeros();
    let mut power = Matrix2::identity();
    for k in 1..n {
        power *= phi;
        lambda += power;
        pi += power * k as f64;
    }
    Ok(PowerSums { lambda, pi })
}

/// The geometric-series closed forms of Λ and Π.
///
/// Returns `None` when Φ is singular or badly conditioned, or when `I − Φ`
/// cannot be inverted reliably; callers then rely on direct summation.
pub fn matrix_power_sums_closed_form(phi: &Matrix2<f64>, n: usize) -> Option<PowerSums> {
    if n == 0 {
        return None;
    }
    let id = Matrix2::identity();
    let phi_inv = phi.try_inverse()?;
    if condition_number(phi) >= CLOSED_FORM_MAX_CONDITION {
        return None;
    }
    let one_minus = id - phi;
    if condition_number(&one_minus) >= CLOSED_FORM_MAX_CONDITION {
        return None;
    }
    let one_minus_inv = one_minus.try_inverse()?;
    let phi_n1 = phi.pow((n - 1) as u32);
    let phi_n = phi_n1 * phi;
    let lambda = (phi - phi_n) * one_minus_inv;
    let pi = (phi_inv - id).try_inverse()? * ((id - phi_n1) * one_minus_inv - phi_n1 * (n - 1) as f64);
    Some(PowerSums { lambda, pi })
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Stationary mean, covariance and transition matrix of the observations.
///
/// This is what the chart needs from the process. It can come from a
/// [`Var1Model`] or be given directly in terms of coefficients of variation
/// and correlation, in which case no innovation covariance is implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryLaw {
    mu: Vector2<f64>,
    phi: Matrix2<f64>,
    sigma_w: Matrix2<f64>,
}

impl StationaryLaw {
    pub fn new(mu: Vector2<f64>, phi: Matrix2<f64>, sigma_w: Matrix2<f64>) -> Result<Self> {
        if mu.iter().chain(phi.iter()).chain(sigma_w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("law", "all entries must be finite"));
        }
        if mu.y == 0.0 {
            return Err(Error::invalid("mu_y", "denominator mean must be non-zero"));
        }
        check_stationary(&phi)?;
        let sigma_w = checked_symmetric("sigma_w", sigma_w)?;
        check_psd("sigma_w", &sigma_w, 0.0)?;
        Ok(Self { mu, phi, sigma_w })
    }

    pub fn from_model(model: &Var1Model) -> Result<Self> {
        let cov = model.stationary_covariance()?;
        Self::new(model.mu, model.phi, cov.sigma_w)
    }

    /// Law with `μ = (z₀, 1)`, `σ_X = γ_X z₀`, `σ_Y = γ_Y` and correlation ρ.
    pub fn from_moments(gamma_x: f64, gamma_y: f64, rho: f64, phi: Matrix2<f64>, z0: f64) -> Result<Self> {
        positive("gamma_x", gamma_x)?;
        positive("gamma_y", gamma_y)?;
        positive("z0", z0)?;
        correlation_in_range("rho", rho)?;
        let sx = gamma_x * z0;
        let sy = gamma_y;
        let sxy = rho * sx * sy;
        Self::new(Vector2::new(z0, 1.0), phi, Matrix2::new(sx * sx, sxy, sxy, sy * sy))
    }

    pub fn mu(&self) -> Vector2<f64> {
        self.mu
    }

    pub fn phi(&self) -> Matrix2<f64> {
        self.phi
    }

    pub fn sigma_w(&self) -> Matrix2<f64> {
        self.sigma_w
    }

    pub fn z(&self) -> f64 {
        self.mu.x / self.mu.y
    }

    pub fn rho(&self) -> f64 {
        correlation(&self.sigma_w)
    }

    /// Same marginal variances with the correlation replaced by `rho`.
    pub fn with_correlation(&self, rho: f64) -> Result<Self> {
        correlation_in_range("rho", rho)?;
        let (sx, sy) = (self.sigma_w[(0, 0)].sqrt(), self.sigma_w[(1, 1)].sqrt());
        let sxy = rho * sx * sy;
        let mut sigma_w = self.sigma_w;
        sigma_w[(0, 1)] = sxy;
        sigma_w[(1, 0)] = sxy;
        Self::new(self.mu, self.phi, sigma_w)
    }

    /// Scales the numerator component by `tau`: its mean and standard
    /// deviation both grow by `tau`, so its coefficient of variation and the
    /// correlation are unchanged while the mean ratio becomes `tau · z`.
    pub fn with_scaled_numerator(&self, tau: f64) -> Result<Self> {
        positive("tau", tau)?;
        let scale = Matrix2::new(tau, 0.0, 0.0, 1.0);
        Self::new(Vector2::new(tau * self.mu.x, self.mu.y), self.phi, scale * self.sigma_w * scale)
    }

    pub fn subgroup_stats(&self, n: usize) -> Result<SubgroupStats> {
        let sigma_wbar = subgroup_mean_covariance(&self.phi, &self.sigma_w, n)?;
        SubgroupStats::from_parts(n, sigma_wbar, self.mu)
    }
}

/// Parameters of the subgroup mean vector `(X̄, Ȳ)` for subgroup size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgroupStats {
    pub n: usize,
    pub sigma_wbar: Matrix2<f64>,
    pub gamma_xbar: f64,
    pub gamma_ybar: f64,
    pub rho_bar: f64,
    pub omega_bar: f64,
    pub z: f64,
}

impl SubgroupStats {
    fn from_parts(n: usize, sigma_wbar: Matrix2<f64>, mu: Vector2<f64>) -> Result<Self> {
        if !(mu.x > 0.0 && mu.y > 0.0) {
            return Err(Error::invalid("mu", "ratio chart parameters need positive means"));
        }
        let (vx, vy) = (sigma_wbar[(0, 0)], sigma_wbar[(1, 1)]);
        if !(vx > 0.0 && vy > 0.0) {
            return Err(Error::invalid("sigma_wbar", "subgroup-mean variances must be positive"));
        }
        let gamma_xbar = vx.sqrt() / mu.x;
        let gamma_ybar = vy.sqrt() / mu.y;
        let z = mu.x / mu.y;
        let rho_bar = correlation(&sigma_wbar);
        if !(rho_bar.abs() < 1.0) {
            return Err(Error::NotPositiveSemiDefinite { name: "sigma_wbar (|rho_bar| = 1)", min_eigenvalue: 0.0 });
        }
        Ok(Self { n, sigma_wbar, gamma_xbar, gamma_ybar, rho_bar, omega_bar: gamma_xbar / gamma_ybar * z, z })
    }
}

/// Σ_W̄ for the mean of `n` consecutive stationary observations.
pub fn subgroup_mean_covariance(phi: &Matrix2<f64>, sigma_w: &Matrix2<f64>, n: usize) -> Result<Matrix2<f64>> {
    let sums = matrix_power_sums(phi, n)?;
    let nf = n as f64;
    let id = Matrix2::identity();
    // Λ(Φᵀ) = Λ(Φ)ᵀ and likewise for Π. Σ_Wᵀ = Σ_W.
    let right = id + sums.lambda.transpose() - sums.pi.transpose() / nf;
    let left = sums.lambda - sums.pi / nf;
    let raw = (sigma_w * right + left * sigma_w) / nf;
    let sym = symmetrize(raw);
    let scale = sym.abs().max();
    check_psd("sigma_wbar", &sym, PSD_REPAIR_TOLERANCE.max(1e-13 * scale))?;
    Ok(clip_psd(sym))
}

/// Σ_W̄ for the model's stationary covariance.
pub fn subgroup_covariance(model: &Var1Model, cov: &StationaryCov, n: usize) -> Result<SubgroupStats> {
    let sigma_wbar = subgroup_mean_covariance(&model.phi, &cov.sigma_w, n)?;
    SubgroupStats::from_parts(n, sigma_wbar, model.mu)
}

/// `1 + (2/n) Σ_{k=1}^{n−1} (n−k) φᵏ`, the variance inflation of the mean of
/// `n` observations of a univariate AR(1) with coefficient φ.
pub fn ar1_inflation(phi: f64, n: usize) -> f64 {
    1.0 + 2.0 * weighted_power_sum(phi, n) / n as f64
}

/// `Σ_{k=1}^{n−1} (n−k) φᵏ`.
pub fn weighted_power_sum(phi: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    let mut power = 1.0;
    for k in 1..n {
        power *= phi;
        acc += (n - k) as f64 * power;
    }
    acc
}

/// Element-wise closed forms (ξ₁₁, ξ₁₂, ξ₂₂) of Σ_W̄ for a diagonal Φ.
pub fn diagonal_subgroup_covariance(phi11: f64, phi22: f64, sigma_w: &Matrix2<f64>, n: usize) -> Result<Matrix2<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "subgroup size must be at least 1"));
    }
    let nf = n as f64;
    let sx = weighted_power_sum(phi11, n) / nf;
    let sy = weighted_power_sum(phi22, n) / nf;
    let xi11 = sigma_w[(0, 0)] / nf * (1.0 + 2.0 * sx);
    let xi22 = sigma_w[(1, 1)] / nf * (1.0 + 2.0 * sy);
    let xi12 = sigma_w[(0, 1)] / nf * (1.0 + sx + sy);
    Ok(Matrix2::new(xi11, xi12, xi12, xi22))
}

/// Stationary covariance of a diagonal-Φ model in closed form.
pub fn diagonal_stationary_covariance(phi11: f64, phi22: f64, sigma_eps: &Matrix2<f64>) -> Matrix2<f64> {
    let xy = sigma_eps[(0, 1)] / (1.0 - phi11 * phi22);
    Matrix2::new(sigma_eps[(0, 0)] / (1.0 - phi11 * phi11), xy, xy, sigma_eps[(1, 1)] / (1.0 - phi22 * phi22))
}

pub fn matrix_from_rows(rows: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
}

pub(crate) fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

pub(crate) fn correlation(m: &Matrix2<f64>) -> f64 {
    let denom = (m[(0, 0)] * m[(1, 1)]).sqrt();
    if denom > 0.0 {
        m[(0, 1)] / denom
    } else {
        0.0
    }
}

fn checked_symmetric(name: &'static str, m: Matrix2<f64>) -> Result<Matrix2<f64>> {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * scale {
        return Err(Error::invalid(name, "matrix must be symmetric"));
    }
    Ok(symmetrize(m))
}

fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let half_trace = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    half_trace - (half_diff * half_diff + m[(0, 1)] * m[(0, 1)]).sqrt()
}

fn check_psd(name: &'static str, m: &Matrix2<f64>, tolerance: f64) -> Result<()> {
    let min = min_eigenvalue(m);
    if min < -tolerance || m[(0, 0)] < -tolerance || m[(1, 1)] < -tolerance {
        return Err(Error::NotPositiveSemiDefinite { name, min_eigenvalue: min });
    }
    Ok(())
}

/// Clips a slightly negative eigenvalue of a symmetric 2×2 matrix to zero.
fn clip_psd(m: Matrix2<f64>) -> Matrix2<f64> {
    if min_eigenvalue(&m) >= 0.0 && m[(0, 0)] >= 0.0 && m[(1, 1)] >= 0.0 {
        return m;
    }
    let eig = m.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    symmetrize(eig.eigenvectors * Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose())
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

pub(crate) fn correlation_in_range(name: &'static str, rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid(name, format!("correlation must lie in (-1, 1), got {rho}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn furnace() -> Var1Model {
        Var1Model::from_entries([10.421, 20.189], [[0.733, 0.474], [0.410, -0.561]], [[1.232, 0.588], [0.588, 1.072]])
            .unwrap()
    }

    /// (1/n²) Σⱼ Σₜ Γ(j−t) with Γ(k) = Σ_W (Φᵀ)ᵏ and Γ(−k) = Γ(k)ᵀ.
    fn brute_force_subgroup_cov(phi: &Matrix2<f64>, sigma_w: &Matrix2<f64>, n: usize) -> Matrix2<f64> {
        let mut acc = Matrix2::zeros();
        for j in 0..n {
            for t in 0..n {
                let gamma = |k: usize| sigma_w * phi.transpose().pow(k as u32);
                acc += if j >= t { gamma(j - t) } else { gamma(t - j).transpose() };
            }
        }
        acc / (n * n) as f64
    }

    /// Iterates Σ ← Φ Σ Φᵀ + Σ_ε to its fixed point.
    fn stein_by_iteration(phi: &Matrix2<f64>, se: &Matrix2<f64>) -> Matrix2<f64> {
        let mut s = *se;
        for _ in 0..5000 {
            s = phi * s * phi.transpose() + se;
        }
        s
    }

    #[test]
    fn zero_phi_gives_innovation_covariance() {
        let m = Var1Model::from_entries([1.0, 2.0], [[0.0, 0.0], [0.0, 0.0]], [[2.0, 0.3], [0.3, 0.5]]).unwrap();
        let cov = m.stationary_covariance().unwrap();
        assert_eq!(cov.sigma_w, m.sigma_eps());
    }

    #[test]
    fn furnace_stationary_covariance() {
        let cov = stationary_covariance_with(&furnace(), CovarianceMethod::CrossChecked).unwrap();
        let expected = Matrix2::new(5.887, 1.500, 1.500, 2.002);
        assert!((cov.sigma_w - expected).abs().max() < 1e-3, "{}", cov.sigma_w);
    }

    #[test]
    fn diagonal_food_model() {
        let m =
            Var1Model::from_entries([25.0, 25.0], [[0.5, 0.0], [0.0, 0.5]], [[0.0625, 0.01], [0.01, 0.0625]]).unwrap();
        let cov = m.stationary_covariance().unwrap();
        let iterated = stein_by_iteration(&m.phi(), &m.sigma_eps());
        assert_relative_eq!(cov.sigma_w[(0, 0)], 0.0625 / 0.75, max_relative = 1e-13);
        assert_relative_eq!(cov.sigma_w[(0, 1)], 0.01 / 0.75, max_relative = 1e-13);
        assert!((cov.sigma_w - iterated).abs().max() < 1e-14);
        let closed = diagonal_stationary_covariance(0.5, 0.5, &m.sigma_eps());
        assert!((cov.sigma_w - closed).abs().max() < 1e-15);
    }

    #[test]
    fn non_stationary_is_rejected() {
        let err = Var1Model::from_entries([1.0, 1.0], [[1.0, 0.0], [0.0, 0.2]], [[1.0, 0.0], [0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonStationary { .. }));
        // complex eigenvalues with modulus > 1
        let err = Var1Model::from_entries([1.0, 1.0], [[0.8, -0.9], [0.9, 0.8]], [[1.0, 0.0], [0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonStationary { .. }));
        assert!(check_stationary(&Matrix2::new(1.0 - 1e-10, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(Var1Model::from_entries([1.0, 0.0], [[0.1, 0.0], [0.0, 0.1]], [[1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(Var1Model::from_entries([1.0, 1.0], [[0.1, 0.0], [0.0, 0.1]], [[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(Var1Model::from_entries([1.0, 1.0], [[0.1, 0.0], [0.0, 0.1]], [[1.0, 2.0], [2.0, 1.0]]).is_err());
    }

    #[test]
    fn power_sums_edge_cases() {
        let phi = Matrix2::new(0.1, 0.0, 0.0, 0.1);
        let one = matrix_power_sums(&phi, 1).unwrap();
        assert_eq!(one.lambda, Matrix2::zeros());
        assert_eq!(one.pi, Matrix2::zeros());
        let five = matrix_power_sums(&phi, 5).unwrap();
        assert!((five.lambda[(0, 0)] - 0.1111).abs() < 5e-5);
        assert_eq!(five.lambda[(0, 1)], 0.0);
        let half = Matrix2::new(0.5, 0.0, 0.0, 0.5);
        let three = matrix_power_sums(&half, 3).unwrap();
        assert_relative_eq!(three.pi[(0, 0)], 1.0, max_relative = 1e-15);
        assert!(matrix_power_sums(&half, 0).is_err());
    }

    #[test]
    fn closed_form_power_sums_agree_with_direct() {
        let phi = Matrix2::new(0.733, 0.474, 0.410, -0.561);
        for n in [1, 2, 3, 5, 10, 40] {
            let direct = matrix_power_sums(&phi, n).unwrap();
            let closed = matrix_power_sums_closed_form(&phi, n).unwrap();
            assert!((direct.lambda - closed.lambda).abs().max() < 1e-12, "n={n}");
            assert!((direct.pi - closed.pi).abs().max() < 1e-11, "n={n}");
        }
        assert!(matrix_power_sums_closed_form(&Matrix2::new(0.5, 0.0, 0.0, 0.0), 4).is_none());
    }

    #[test]
    fn singular_phi_uses_direct_sums() {
        let phi = Matrix2::new(0.5, 0.0, 0.0, 0.0);
        let sums = matrix_power_sums(&phi, 4).unwrap();
        assert_relative_eq!(sums.lambda[(0, 0)], 0.5 + 0.25 + 0.125);
        assert_relative_eq!(sums.pi[(0, 0)], 0.5 + 0.5 + 0.375);
    }

    #[test]
    fn subgroup_of_one_is_the_stationary_law() {
        let m = furnace();
        let cov = m.stationary_covariance().unwrap();
        let stats = subgroup_covariance(&m, &cov, 1).unwrap();
        assert_eq!(stats.sigma_wbar, cov.sigma_w);
        assert_relative_eq!(stats.gamma_xbar, cov.sigma_x() / m.mu().x);
        assert_relative_eq!(stats.rho_bar, cov.rho, max_relative = 1e-15);
    }

    #[test]
    fn furnace_subgroup_covariance_matches_double_sum() {
        let m = furnace();
        let cov = m.stationary_covariance().unwrap();
        let stats = subgroup_covariance(&m, &cov, 5).unwrap();
        let oracle = brute_force_subgroup_cov(&m.phi(), &cov.sigma_w, 5);
        assert!((stats.sigma_wbar - oracle).abs().max() < 1e-12);
        // Published values; the double sum reproduces them.
        let published = Matrix2::new(4.724, 1.458, 1.458, 0.542);
        assert!((stats.sigma_wbar - published).abs().max() < 1e-3, "{}", stats.sigma_wbar);
        assert!((stats.gamma_xbar - 0.209).abs() < 5e-4);
        assert!((stats.gamma_ybar - 0.036).abs() < 5e-4, "{}", stats.gamma_ybar);
        assert!((stats.rho_bar - 0.911).abs() < 5e-4);
    }

    #[test]
    fn zero_phi_divides_by_n() {
        let sw = Matrix2::new(2.0, 0.4, 0.4, 1.0);
        let got = subgroup_mean_covariance(&Matrix2::zeros(), &sw, 7).unwrap();
        assert_eq!(got, sw / 7.0);
    }

    #[test]
    fn diagonal_closed_forms_match_general_formula() {
        let sw = Matrix2::new(0.3, -0.1, -0.1, 0.2);
        for (p1, p2) in [(0.1, 0.1), (0.7, 0.1), (0.5, 0.5), (-0.3, 0.6)] {
            let phi = Matrix2::new(p1, 0.0, 0.0, p2);
            for n in [1, 2, 5, 7, 15] {
                let general = subgroup_mean_covariance(&phi, &sw, n).unwrap();
                let xi = diagonal_subgroup_covariance(p1, p2, &sw, n).unwrap();
                let brute = brute_force_subgroup_cov(&phi, &sw, n);
                assert!((general - xi).abs().max() < 1e-12, "({p1},{p2}) n={n}");
                assert!((general - brute).abs().max() < 1e-12);
            }
        }
    }

    #[test]
    fn omega_identity_is_exact() {
        let law = StationaryLaw::from_moments(0.01, 0.2, -0.4, Matrix2::new(0.7, 0.0, 0.0, 0.1), 1.3).unwrap();
        let s = law.subgroup_stats(5).unwrap();
        assert_eq!(s.omega_bar, s.gamma_xbar / s.gamma_ybar * s.z);
    }

    #[test]
    fn from_stationary_law_round_trip() {
        let m =
            Var1Model::from_entries([25.0, 25.0], [[0.5, 0.0], [0.0, 0.5]], [[0.0625, 0.01], [0.01, 0.0625]]).unwrap();
        let law = StationaryLaw::from_model(&m).unwrap();
        let back = Var1Model::from_stationary_law(&law).unwrap();
        assert!((back.sigma_eps() - m.sigma_eps()).abs().max() < 1e-15);
    }

    #[test]
    fn infeasible_innovation_covariance_is_reported() {
        // Strong correlation with very different persistence cannot be produced by a VAR(1).
        let law = StationaryLaw::from_moments(0.1, 0.1, 0.8, Matrix2::new(0.1, 0.0, 0.0, 0.7), 1.0).unwrap();
        assert!(matches!(Var1Model::from_stationary_law(&law), Err(Error::NotPositiveSemiDefinite { .. })));
    }

    #[test]
    fn scaled_numerator_keeps_coefficients_of_variation() {
        let law = StationaryLaw::from_moments(0.05, 0.02, 0.3, Matrix2::new(0.4, 0.0, 0.0, 0.2), 1.0).unwrap();
        let shifted = law.with_scaled_numerator(1.1).unwrap();
        let (a, b) = (law.subgroup_stats(5).unwrap(), shifted.subgroup_stats(5).unwrap());
        assert_relative_eq!(a.gamma_xbar, b.gamma_xbar, max_relative = 1e-14);
        assert_relative_eq!(a.rho_bar, b.rho_bar, max_relative = 1e-14);
        assert_relative_eq!(b.z, 1.1 * a.z, max_relative = 1e-15);
    }

    #[test]
    fn delta_coefficients_invert_the_kronecker_system() {
        let phi = Matrix2::new(0.733, 0.474, 0.410, -0.561);
        let inv = DeltaCoefficients::new(&phi).inverse();
        let system: Matrix4<f64> = Matrix4::identity() - phi.kronecker(&phi);
        assert!((system * inv - Matrix4::identity()).abs().max() < 1e-12);
    }

    fn stationary_phi() -> impl Strategy<Value = Matrix2<f64>> {
        (-0.95..0.95f64, -0.95..0.95f64, -0.95..0.95f64, -0.95..0.95f64)
            .prop_map(|(a, b, c, d)| Matrix2::new(a, b, c, d))
            .prop_filter("stationary", |m| spectral_radius(m) < 0.97)
    }

    fn psd_matrix() -> impl Strategy<Value = Matrix2<f64>> {
        (0.05..3.0f64, 0.05..3.0f64, -0.99..0.99f64).prop_map(|(sx, sy, r)| {
            let c = r * sx * sy;
            Matrix2::new(sx * sx, c, c, sy * sy)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn stein_residual_is_small(phi in stationary_phi(), se in psd_matrix()) {
            let m = Var1Model::new(Vector2::new(1.0, 1.0), phi, se).unwrap();
            let sw = m.stationary_covariance().unwrap().sigma_w;
            let residual = sw - phi * sw * phi.transpose() - se;
            prop_assert!(residual.abs().max() < 1e-10, "{}", residual);
            prop_assert_eq!(sw[(0, 1)], sw[(1, 0)]);
        }

        #[test]
        fn closed_form_matches_linear_solve(phi in stationary_phi(), se in psd_matrix()) {
            let m = Var1Model::new(Vector2::new(1.0, 1.0), phi, se).unwrap();
            let a = stationary_covariance_with(&m, CovarianceMethod::Kronecker).unwrap().sigma_w;
            let b = stationary_covariance_with(&m, CovarianceMethod::ClosedForm).unwrap().sigma_w;
            prop_assert!((a - b).abs().max() < 1e-10 * a.abs().max().max(1.0));
        }

        #[test]
        fn power_sum_forms_agree(phi in stationary_phi(), n in 1usize..60) {
            let direct = matrix_power_sums(&phi, n).unwrap();
            if let Some(closed) = matrix_power_sums_closed_form(&phi, n) {
                let scale = 1.0 + direct.pi.abs().max();
                prop_assert!((direct.lambda - closed.lambda).abs().max() < 1e-8 * scale);
                prop_assert!((direct.pi - closed.pi).abs().max() < 1e-8 * scale);
            }
        }

        #[test]
        fn subgroup_covariance_matches_double_sum(phi in stationary_phi(), se in psd_matrix(), n in 1usize..16) {
            let m = Var1Model::new(Vector2::new(1.0, 1.0), phi, se).unwrap();
            let sw = m.stationary_covariance().unwrap().sigma_w;
            let got = subgroup_mean_covariance(&phi, &sw, n).unwrap();
            let oracle = brute_force_subgroup_cov(&phi, &sw, n);
            prop_assert!((got - oracle).abs().max() < 1e-11 * sw.abs().max());
        }
    }
}
