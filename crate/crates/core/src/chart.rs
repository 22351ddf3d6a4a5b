//! Shewhart-RZ chart design and analytic run-length performance.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::ratio::RatioParams;
use crate::var1::{correlation_in_range, positive, StationaryLaw, SubgroupStats, Var1Model};

/// Above this β the ARL is reported as infinite.
pub const BETA_INFINITY_THRESHOLD: f64 = 1.0 - 1e-15;

/// Default Gauss–Legendre order for EARL integrals.
pub const DEFAULT_EARL_ORDER: usize = 64;

pub fn alpha_from_arl0(arl0: f64) -> Result<f64> {
    if !(arl0 > 1.0 && arl0.is_finite()) {
        return Err(Error::invalid("arl0", format!("in-control ARL must be finite and > 1, got {arl0}")));
    }
    Ok(1.0 / arl0)
}

pub fn arl0_from_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 / alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("false-alarm probability must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Probability limits and everything needed to evaluate them later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDesign {
    pub lcl: f64,
    pub ucl: f64,
    pub alpha: f64,
    pub n: usize,
    pub z0: f64,
    pub rho0: f64,
    pub in_control_stats: SubgroupStats,
    pub in_control_params: RatioParams,
    pub law: StationaryLaw,
}

impl ChartDesign {
    pub fn arl0(&self) -> f64 {
        1.0 / self.alpha
    }

    /// Whether the monitored quantities fall outside the approximation's
    /// usual validity range.
    pub fn outside_validity_range(&self) -> bool {
        self.in_control_params.outside_validity_range()
    }
}

/// Designs the chart for an explicit VAR(1) model.
pub fn design_chart(model: &Var1Model, n: usize, alpha: f64) -> Result<ChartDesign> {
    design_chart_for_law(&StationaryLaw::from_model(model)?, n, alpha)
}

/// Designs the chart from the stationary law of the observations.
pub fn design_chart_for_law(law: &StationaryLaw, n: usize, alpha: f64) -> Result<ChartDesign> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::invalid("n", "subgroup size must be at least 1"));
    }
    let stats = law.subgroup_stats(n)?;
    let params = RatioParams::from_stats(&stats)?;
    let lcl = params.quantile(alpha / 2.0)?;
    let ucl = params.quantile(1.0 - alpha / 2.0)?;
    Ok(ChartDesign {
        lcl,
        ucl,
        alpha,
        n,
        z0: law.z(),
        rho0: law.rho(),
        in_control_stats: stats,
        in_control_params: params,
        law: *law,
    })
}

/// A shift of the mean ratio to `tau · z0` and of the correlation to `rho1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpec {
    pub tau: f64,
    pub rho1: f64,
}

impl ShiftSpec {
    pub fn new(tau: f64, rho1: f64) -> Result<Self> {
        positive("tau", tau)?;
        correlation_in_range("rho1", rho1)?;
        Ok(Self { tau, rho1 })
    }

    /// No shift at all.
    pub fn null(design: &ChartDesign) -> Self {
        Self { tau: 1.0, rho1: design.rho0 }
    }
}

/// Ratio parameters after a shift.
///
/// The subgroup coefficients of variation keep their in-control values. The
/// subgroup correlation is recomputed with the observation correlation set
/// to `rho1`, and `ω̄₁ = (γ̄_X/γ̄_Y)·τ·z₀`.
pub fn out_of_control_params(design: &ChartDesign, shift: &ShiftSpec) -> Result<RatioParams> {
    let ic = &design.in_control_stats;
    let rho_bar = if shift.rho1 == design.rho0 {
        ic.rho_bar
    } else {
        design.law.with_correlation(shift.rho1)?.subgroup_stats(design.n)?.rho_bar
    };
    RatioParams::new(ic.gamma_xbar, ic.gamma_ybar, ic.gamma_xbar / ic.gamma_ybar * (shift.tau * design.z0), rho_bar)
}

/// Details specific to simulated run lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSummary {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
    /// Replications that reached the run-length cap without a signal.
    pub censored: usize,
    /// True when every replication was censored, so `mean` only bounds the ARL from below.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLengthKind {
    Analytic,
    Empirical(EmpiricalSummary),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLengthReport {
    /// Probability that a single subgroup gives no signal.
    pub beta: f64,
    pub arl: f64,
    /// β rounded to one; `arl` is `+∞`.
    pub infinite: bool,
    pub kind: RunLengthKind,
}

impl RunLengthReport {
    pub fn analytic(beta: f64) -> Self {
        if beta >= BETA_INFINITY_THRESHOLD {
            Self { beta, arl: f64::INFINITY, infinite: true, kind: RunLengthKind::Analytic }
        } else {
            Self { beta, arl: 1.0 / (1.0 - beta), infinite: false, kind: RunLengthKind::Analytic }
        }
    }

    pub fn empirical(&self) -> Option<&EmpiricalSummary> {
        match &self.kind {
            RunLengthKind::Empirical(s) => Some(s),
            RunLengthKind::Analytic => None,
        }
    }
}

/// Probability that a subgroup stays inside the limits under `params`.
pub fn non_detection_probability(design: &ChartDesign, params: &RatioParams) -> f64 {
    let beta = params.cdf(design.ucl) - params.cdf(design.lcl);
    beta.clamp(0.0, 1.0)
}

pub fn arl(design: &ChartDesign, shift: &ShiftSpec) -> Result<RunLengthReport> {
    let params = out_of_control_params(design, shift)?;
    Ok(RunLengthReport::analytic(non_detection_probability(design, &params)))
}

/// Interval of shift sizes τ with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl ShiftInterval {
    pub fn new(lower: f64, upper: f64, lower_closed: bool, upper_closed: bool) -> Result<Self> {
        positive("interval lower bound", lower)?;
        if !(upper > lower && upper.is_finite()) {
            return Err(Error::invalid("interval", format!("need lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper, lower_closed, upper_closed })
    }

    pub fn closed(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, true, true)
    }

    /// Parses interval notation such as `[0.9,1)` or `(1, 1.1]`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::invalid("interval", format!("expected e.g. `[0.9,1)`, got `{text}`"));
        let lower_closed = match t.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let upper_closed = match t.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let body = &t[1..t.len() - 1];
        let (a, b) = body.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        Self::new(a, b, lower_closed, upper_closed)
    }

    /// Equally spaced points `lower + k·step` inside the interval, leaving
    /// out open endpoints.
    pub fn grid(&self, step: f64) -> Result<Vec<f64>> {
        positive("step", step)?;
        let span = (self.upper - self.lower) / step;
        let count = span.round();
        let hits_upper = (span - count).abs() < 1e-9;
        let last = if hits_upper { count as usize } else { span.floor() as usize };
        let points: Vec<f64> = (0..=last)
            .filter(|&k| (k != 0 || self.lower_closed) && !(hits_upper && k == last && !self.upper_closed))
            .map(|k| self.lower + k as f64 * step)
            .collect();
        if points.is_empty() {
            return Err(Error::invalid("step", "grid leaves no points inside the interval"));
        }
        Ok(points)
    }
}

impl std::fmt::Display for ShiftInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let open = if self.lower_closed { '[' } else { '(' };
        let close = if self.upper_closed { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lower, self.upper)
    }
}

/// How the expectation over τ is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EarlMethod {
    /// Uniform density on the interval, integrated by Gauss–Legendre.
    GaussLegendre { order: usize },
    /// Uniform weights on the points `lower + k·step` of the interval.
    Grid { step: f64 },
}

impl Default for EarlMethod {
    fn default() -> Self {
        EarlMethod::GaussLegendre { order: DEFAULT_EARL_ORDER }
    }
}

/// Expected ARL for τ uniform on `interval`, with correlation `rho1`.
/// Returns `+∞` if the ARL is infinite anywhere it is evaluated.
pub fn earl(design: &ChartDesign, interval: &ShiftInterval, rho1: f64, method: EarlMethod) -> Result<f64> {
    let arl_at = |tau: f64| -> Result<f64> { Ok(arl(design, &ShiftSpec::new(tau, rho1)?)?.arl) };
    match method {
        EarlMethod::GaussLegendre { order } => {
            if order == 0 {
                return Err(Error::invalid("order", "quadrature order must be positive"));
            }
            let rule = GaussLegendre::new(order);
            let integral = rule.try_integrate(interval.lower, interval.upper, arl_at)?;
            Ok(integral / (interval.upper - interval.lower))
        }
        EarlMethod::Grid { step } => {
            let points = interval.grid(step)?;
            let mut total = 0.0;
            for &tau in &points {
                total += arl_at(tau)?;
            }
            Ok(total / points.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    InControl,
    OutOfControl,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::InControl => "in_control",
            Verdict::OutOfControl => "out_of_control",
        }
    }
}

/// Limits themselves count as in control.
pub fn classify(design: &ChartDesign, zbar: f64) -> Verdict {
    if zbar < design.lcl || zbar > design.ucl {
        Verdict::OutOfControl
    } else {
        Verdict::InControl
    }
}
