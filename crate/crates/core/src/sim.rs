//! Monte Carlo generation of VAR(1) subgroups and empirical run lengths.
//!
//! Every subgroup starts from the stationary law `N(μ, Σ_W)` and evolves by
//! the VAR(1) recursion, so successive subgroups are independent while the
//! observations inside a subgroup are autocorrelated.
//!
//! Replication `r` of a run uses `ChaCha8Rng::seed_from_u64(seed)` switched
//! to stream `r`, so results do not depend on thread scheduling.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chart::{classify, ChartDesign, EmpiricalSummary, RunLengthKind, RunLengthReport, ShiftSpec, Verdict};
use crate::error::{Error, Result};
use crate::io::{read_subgroups, SubgroupData};
use crate::var1::Var1Model;

/// Generator and normal-variate method, recorded in simulation output.
pub const RNG_DESCRIPTION: &str =
    "ChaCha8Rng (rand_chacha 0.9) seeded by seed_from_u64(seed), stream = replication index; normals: rand_distr 0.5 StandardNormal (ziggurat)";

pub const DEFAULT_MAX_RUN_LENGTH: u64 = 1_000_000;

/// The muesli filling data, 15 subgroups of 5.
pub const FOOD_EXAMPLE_CSV: &str = include_str!("../data/food_example.csv");

/// Draws from a fixed VAR(1) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Var1Sampler {
    mu: Vector2<f64>,
    phi: Matrix2<f64>,
    start_factor: Matrix2<f64>,
    innovation_factor: Matrix2<f64>,
}

impl Var1Sampler {
    pub fn new(model: &Var1Model) -> Result<Self> {
        let cov = model.stationary_covariance()?;
        Ok(Self {
            mu: model.mu(),
            phi: model.phi(),
            start_factor: symmetric_sqrt(&cov.sigma_w),
            innovation_factor: symmetric_sqrt(&model.sigma_eps()),
        })
    }

    fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> Vector2<f64> {
        Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// One draw from the stationary law.
    pub fn stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        self.mu + self.start_factor * Self::normal_pair(rng)
    }

    /// The observation following `prev`.
    pub fn step<R: Rng + ?Sized>(&self, prev: &Vector2<f64>, rng: &mut R) -> Vector2<f64> {
        self.mu + self.phi * (prev - self.mu) + self.innovation_factor * Self::normal_pair(rng)
    }

    pub fn subgroup<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(n);
        self.for_each_in_subgroup(n, rng, |w| out.push([w.x, w.y]));
        out
    }

    /// Subgroup means `(X̄, Ȳ)` without storing the observations.
    pub fn subgroup_means<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (f64, f64) {
        let mut sum = Vector2::zeros();
        self.for_each_in_subgroup(n, rng, |w| sum += w);
        (sum.x / n as f64, sum.y / n as f64)
    }

    fn for_each_in_subgroup<R: Rng + ?Sized, F: FnMut(Vector2<f64>)>(&self, n: usize, rng: &mut R, mut f: F) {
        if n == 0 {
            return;
        }
        let mut w = self.stationary(rng);
        f(w);
        for _ in 1..n {
            w = self.step(&w, rng);
            f(w);
        }
    }
}

/// Symmetric square root of a PSD 2×2 matrix; negative round-off
/// eigenvalues are treated as zero.
pub fn symmetric_sqrt(m: &Matrix2<f64>) -> Matrix2<f64> {
    let eig = m.symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix2::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// One subgroup of `n` observations.
pub fn draw_subgroup<R: Rng + ?Sized>(model: &Var1Model, n: usize, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    Ok(Var1Sampler::new(model)?.subgroup(n, rng))
}

/// A single stationary path of length `len`.
pub fn simulate_series(model: &Var1Model, len: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    let sampler = Var1Sampler::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.subgroup(len, &mut rng))
}

/// `count` independent subgroups of size `n`, numbered from 1.
pub fn simulate_subgroups(model: &Var1Model, n: usize, count: usize, seed: u64) -> Result<SubgroupData> {
    if n == 0 || count == 0 {
        return Err(Error::invalid("subgroups", "subgroup size and count must be positive"));
    }
    let sampler = Var1Sampler::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = (1..=count as u64)
        .map(|sample| crate::io::Subgroup { sample, observations: sampler.subgroup(n, &mut rng) })
        .collect();
    SubgroupData::new(groups)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub model: Var1Model,
    pub n: usize,
    pub seed: u64,
    pub replications: usize,
    pub max_run_length: u64,
}

impl SimConfig {
    pub fn new(model: Var1Model, n: usize, seed: u64, replications: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "subgroup size must be at least 1"));
        }
        if replications == 0 {
            return Err(Error::invalid("replications", "need at least one replication"));
        }
        Ok(Self { model, n, seed, replications, max_run_length: DEFAULT_MAX_RUN_LENGTH })
    }

    pub fn with_max_run_length(mut self, cap: u64) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("max_run_length", "cap must be at least 1"));
        }
        self.max_run_length = cap;
        Ok(self)
    }
}

/// Process model that realizes `shift` on the design's stationary law.
///
/// The whole numerator process is scaled by τ (mean and standard deviation
/// alike), which moves the mean ratio to `τ·z₀` while keeping the
/// coefficients of variation fixed, and the correlation is set to `ρ₁`.
/// Fails if no VAR(1) innovation covariance yields that law.
pub fn shifted_model(design: &ChartDesign, shift: &ShiftSpec) -> Result<Var1Model> {
    let law = design.law.with_correlation(shift.rho1)?.with_scaled_numerator(shift.tau)?;
    Var1Model::from_stationary_law(&law)
}

/// Run length of one replication: the index of the first signalling
/// subgroup, or `None` if none occurred within the cap.
fn one_run<R: Rng + ?Sized>(
    design: &ChartDesign,
    sampler: &Var1Sampler,
    config: &SimConfig,
    rng: &mut R,
) -> Option<u64> {
    for i in 1..=config.max_run_length {
        let (xbar, ybar) = sampler.subgroup_means(config.n, rng);
        if classify(design, xbar / ybar) == Verdict::OutOfControl {
            return Some(i);
        }
    }
    None
}

pub fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Run lengths of every replication in replication order; censored runs
/// are `None`.
pub fn run_lengths(design: &ChartDesign, config: &SimConfig) -> Result<Vec<Option<u64>>> {
    let sampler = Var1Sampler::new(&config.model)?;
    Ok((0..config.replications)
        .into_par_iter()
        .map(|r| one_run(design, &sampler, config, &mut replication_rng(config.seed, r)))
        .collect())
}

/// Empirical ARL. Censored runs count as the cap, so the mean is then a
/// lower bound; `lower_bound` is set when all runs were censored.
pub fn empirical_run_length(design: &ChartDesign, config: &SimConfig) -> Result<RunLengthReport> {
    let runs = run_lengths(design, config)?;
    Ok(summarize_runs(&runs, config.max_run_length))
}

pub fn summarize_runs(runs: &[Option<u64>], cap: u64) -> RunLengthReport {
    let m = runs.len();
    let values: Vec<f64> = runs.iter().map(|r| r.unwrap_or(cap) as f64).collect();
    let censored = runs.iter().filter(|r| r.is_none()).count();
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = if m > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
    let summary = EmpiricalSummary {
        mean,
        stderr: (var / m as f64).sqrt(),
        replications: m,
        censored,
        lower_bound: censored == m,
    };
    RunLengthReport { beta: 1.0 - 1.0 / mean, arl: mean, infinite: false, kind: RunLengthKind::Empirical(summary) }
}

/// Monitoring result for one subgroup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayRow {
    pub sample: u64,
    pub xbar: f64,
    pub ybar: f64,
    pub zbar: f64,
    pub verdict: Verdict,
}

/// Classifies every subgroup of `data` against the design.
pub fn replay(design: &ChartDesign, data: &SubgroupData) -> Vec<ReplayRow> {
    data.subgroups()
        .iter()
        .map(|g| {
            let (xbar, ybar) = g.means();
            let zbar = xbar / ybar;
            ReplayRow { sample: g.sample, xbar, ybar, zbar, verdict: classify(design, zbar) }
        })
        .collect()
}

/// The muesli filling process: μ = (25, 25) gr, Φ = diag(0.5, 0.5),
/// Σ_ε = [[0.0625, 0.01], [0.01, 0.0625]].
pub fn food_example_model() -> Var1Model {
    Var1Model::from_entries([25.0, 25.0], [[0.5, 0.0], [0.0, 0.5]], [[0.0625, 0.01], [0.01, 0.0625]])
        .expect("food example model is valid")
}

pub fn food_example_data() -> Result<SubgroupData> {
    let data = read_subgroups(FOOD_EXAMPLE_CSV.as_bytes())?;
    if data.subgroups().len() != 15 || data.subgroup_size() != 5 {
        return Err(Error::Data("food example fixture must hold 15 subgroups of 5".into()));
    }
    Ok(data)
}

/// Designs the food-example chart (n = 5, α = 0.005) and replays the data.
pub fn replay_example() -> Result<(ChartDesign, Vec<ReplayRow>)> {
    let design = crate::chart::design_chart(&food_example_model(), 5, 0.005)?;
    let rows = replay(&design, &food_example_data()?);
    Ok((design, rows))
}
