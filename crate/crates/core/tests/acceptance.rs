//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances are pinned in the constants below.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Matrix2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rzchart_core::chart::{
    arl, design_chart, design_chart_for_law, earl, EarlMethod, ShiftInterval, ShiftSpec, Verdict,
};
use rzchart_core::ratio::RatioParams;
use rzchart_core::sim::{
    empirical_run_length, food_example_model, replay_example, run_lengths, shifted_model, SimConfig,
};
use rzchart_core::tables::diagonal_law;
use rzchart_core::var1::{
    diagonal_subgroup_covariance, matrix_power_sums, matrix_power_sums_closed_form, spectral_radius,
    stationary_covariance_with, subgroup_mean_covariance, CovarianceMethod, StationaryLaw, Var1Model,
};

const LIMIT_TOL: f64 = 5e-4;
const FOOD_LIMIT_TOL: f64 = 1e-4;
const TEXT_ARL_TOL: f64 = 0.2;
const TABLE_ARL_REL_TOL: f64 = 0.005;
const TABLE_SAMPLE: usize = 20;
const TABLE_SAMPLE_MIN_ARL: f64 = 10.0;
const EARL_TOL: f64 = 0.03;
const FURNACE_SIGMA_W_TOL: f64 = 0.01;
const FURNACE_PUBLISHED_TOL: f64 = 5e-4;
const MC_REPLICATIONS: usize = 20_000;
const MC_STDERRS: f64 = 3.0;
const MC_REL_GAP_LARGE_GAMMA: f64 = 0.05;
const ZBAR_TOL: f64 = 1e-3;
const SEED: u64 = 20_240_917;

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, ok: bool, started: Instant, detail: String) {
        if !ok {
            self.failed += 1;
        }
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {id}: {detail} ({:.2} s)", started.elapsed().as_secs_f64());
    }
}

fn note(text: String) {
    println!("       note: {text}");
}

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn read_rows(name: &str) -> Vec<csv::StringRecord> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(data_path(name)).expect("fixture");
    rdr.records().map(|r| r.expect("fixture row")).collect()
}

fn num(r: &csv::StringRecord, i: usize) -> f64 {
    r[i].trim().parse().expect("number")
}

fn diag_design(gamma: (f64, f64), rho0: f64, phi: (f64, f64), n: usize) -> rzchart_core::ChartDesign {
    design_chart_for_law(&diagonal_law(gamma, rho0, phi, 1.0).unwrap(), n, 0.005).unwrap()
}

fn criterion_1(gate: &mut Gate) {
    let t = Instant::now();
    let rows = read_rows("reference_limits.csv");
    let worst_at = |phi: f64| {
        let mut worst = 0.0f64;
        for r in &rows {
            let d = diag_design((num(r, 0), num(r, 1)), num(r, 2), (phi, phi), num(r, 3) as usize);
            worst = worst.max((d.lcl - num(r, 4)).abs()).max((d.ucl - num(r, 5)).abs());
        }
        worst
    };
    let worst = worst_at(0.1);
    gate.report(
        1,
        worst <= LIMIT_TOL,
        t,
        format!(
            "{} published limit cells at Phi = diag(0.1, 0.1): max |error| {worst:.2e} (tol {LIMIT_TOL:.0e})",
            rows.len()
        ),
    );
    if worst > LIMIT_TOL {
        note(format!("the same cells at Phi = diag(0.2, 0.2): max |error| {:.2e}", worst_at(0.2)));
    }
    note("the column printed as n=1 is evaluated at n=2".into());
}

fn criterion_2(gate: &mut Gate) {
    let t = Instant::now();
    let d = design_chart(&food_example_model(), 5, 0.005).unwrap();
    let ok = (d.lcl - 0.9723582).abs() <= FOOD_LIMIT_TOL && (d.ucl - 1.0284276).abs() <= FOOD_LIMIT_TOL;
    gate.report(2, ok, t, format!("food example limits LCL = {:.7}, UCL = {:.7}", d.lcl, d.ucl));
}

fn criterion_3(gate: &mut Gate) {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (phi, published) in [(0.1, 23.1), (0.7, 59.7)] {
        let d = diag_design((0.01, 0.01), -0.8, (phi, phi), 5);
        let v = arl(&d, &ShiftSpec::new(0.99, -0.8).unwrap()).unwrap().arl;
        ok &= (v - published).abs() <= TEXT_ARL_TOL;
        parts.push(format!("{v:.2} vs {published}"));
    }

    let rows: Vec<_> = read_rows("reference_arl.csv")
        .into_iter()
        .filter(|r| matches!(&r[0], "2" | "3") && num(r, 9) >= TABLE_SAMPLE_MIN_ARL)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let picks = sample(&mut rng, rows.len(), TABLE_SAMPLE);
    let mut worst = 0.0f64;
    for i in picks.iter() {
        let r = &rows[i];
        let d = diag_design((num(r, 2), num(r, 3)), num(r, 4), (num(r, 6), num(r, 7)), num(r, 1) as usize);
        let v = arl(&d, &ShiftSpec::new(num(r, 8), num(r, 5)).unwrap()).unwrap().arl;
        worst = worst.max((v - num(r, 9)).abs() / num(r, 9));
    }
    ok &= worst <= TABLE_ARL_REL_TOL;
    gate.report(
        3,
        ok,
        t,
        format!(
            "text ARLs {}; {TABLE_SAMPLE} seeded cells of the first two ARL tables (published ARL >= {TABLE_SAMPLE_MIN_ARL}): max rel error {:.3}%",
            parts.join(", "),
            100.0 * worst
        ),
    );

    // Every published ARL cell, against its 1-dp rounding.
    let all = read_rows("reference_arl.csv");
    let mut beyond = 0;
    for r in &all {
        let d = diag_design((num(r, 2), num(r, 3)), num(r, 4), (num(r, 6), num(r, 7)), num(r, 1) as usize);
        let v = arl(&d, &ShiftSpec::new(num(r, 8), num(r, 5)).unwrap()).unwrap().arl;
        if (v - num(r, 9)).abs() > 0.05 + 1e-6 * num(r, 9) {
            beyond += 1;
        }
    }
    note(format!("{} of {} published ARL cells differ by more than 1-dp rounding", beyond, all.len()));
}

fn criterion_4(gate: &mut Gate) {
    let t = Instant::now();
    let interval = ShiftInterval::parse("[0.9,1)").unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut continuous = Vec::new();
    for (phi, published) in [(0.1, 1.49), (0.5, 2.79), (0.7, 4.57)] {
        let d = diag_design((0.01, 0.01), -0.8, (phi, phi), 15);
        let v = earl(&d, &interval, -0.8, EarlMethod::Grid { step: 0.01 }).unwrap();
        ok &= (v - published).abs() <= EARL_TOL;
        parts.push(format!("{v:.3} vs {published}"));
        continuous.push(format!("{:.3}", earl(&d, &interval, -0.8, EarlMethod::default()).unwrap()));
    }
    gate.report(4, ok, t, format!("EARL over tau in {{0.90, ..., 0.99}}: {}", parts.join(", ")));
    note(format!("uniform density on [0.9, 1) by Gauss-Legendre 64: {}", continuous.join(", ")));
}

/// (1/n²) Σⱼ Σₜ Γ(j−t), Γ(k) = Σ_W (Φᵀ)ᵏ, Γ(−k) = Γ(k)ᵀ.
fn double_sum(phi: &Matrix2<f64>, sw: &Matrix2<f64>, n: usize) -> Matrix2<f64> {
    let mut acc = Matrix2::zeros();
    for j in 0..n {
        for t in 0..n {
            let g = |k: usize| sw * phi.transpose().pow(k as u32);
            acc += if j >= t { g(j - t) } else { g(t - j).transpose() };
        }
    }
    acc / (n * n) as f64
}

fn criterion_5(gate: &mut Gate) {
    let t = Instant::now();
    let model =
        Var1Model::from_entries([10.421, 20.189], [[0.733, 0.474], [0.410, -0.561]], [[1.232, 0.588], [0.588, 1.072]])
            .unwrap();
    let cov = stationary_covariance_with(&model, CovarianceMethod::CrossChecked).unwrap();
    let sw_ok = (cov.sigma_w - Matrix2::new(5.887, 1.500, 1.500, 2.002)).abs().max() <= FURNACE_SIGMA_W_TOL;
    let stats = StationaryLaw::from_model(&model).unwrap().subgroup_stats(5).unwrap();
    let oracle = double_sum(&model.phi(), &cov.sigma_w, 5);
    let oracle_ok = (stats.sigma_wbar - oracle).abs().max() < 1e-12;
    let published = Matrix2::new(4.724, 1.458, 1.458, 0.542);
    let swbar_ok = (oracle - published).abs().max() <= FURNACE_PUBLISHED_TOL;
    let scalars_ok = (stats.gamma_xbar - 0.209).abs() <= FURNACE_PUBLISHED_TOL
        && (stats.gamma_ybar - 0.036).abs() <= FURNACE_PUBLISHED_TOL
        && (stats.rho_bar - 0.911).abs() <= FURNACE_PUBLISHED_TOL;
    // The published omega is the identity evaluated with the rounded gammas.
    let omega_identity_ok = stats.omega_bar == stats.gamma_xbar / stats.gamma_ybar * stats.z;
    let omega_published_ok = (0.209 / 0.036 * stats.z - 2.996).abs() <= 1e-3;
    gate.report(
        5,
        sw_ok && oracle_ok && swbar_ok && scalars_ok && omega_identity_ok && omega_published_ok,
        t,
        format!(
            "furnace Sigma_W = [[{:.4}, {:.4}], [., {:.4}]]; double-sum oracle confirms published Sigma_Wbar(n=5) = [[{:.4}, {:.4}], [., {:.4}]]; gamma = ({:.4}, {:.4}), rho = {:.4}, omega = {:.4}",
            cov.sigma_w[(0, 0)],
            cov.sigma_w[(0, 1)],
            cov.sigma_w[(1, 1)],
            oracle[(0, 0)],
            oracle[(0, 1)],
            oracle[(1, 1)],
            stats.gamma_xbar,
            stats.gamma_ybar,
            stats.rho_bar,
            stats.omega_bar
        ),
    );
    note(format!(
        "published omega 2.996 = (0.209 / 0.036) * z with rounded gammas; unrounded value {:.4}",
        stats.omega_bar
    ));
}

fn criterion_6(gate: &mut Gate) {
    let t = Instant::now();
    let mut ok = true;
    let mut lines = Vec::new();
    let mut seed = SEED;
    for gamma in [0.01, 0.2] {
        for phi in [0.0, 0.1, 0.7] {
            for tau in [1.0, 0.99] {
                seed += 1;
                let design = diag_design((gamma, gamma), -0.8, (phi, phi), 5);
                let shift = ShiftSpec::new(tau, -0.8).unwrap();
                let analytic = arl(&design, &shift).unwrap().arl;
                let cfg = SimConfig::new(shifted_model(&design, &shift).unwrap(), 5, seed, MC_REPLICATIONS).unwrap();
                let s = *empirical_run_length(&design, &cfg).unwrap().empirical().unwrap();
                let gap = (s.mean - analytic) / analytic;
                let pass = if gamma <= 0.01 {
                    (s.mean - analytic).abs() <= MC_STDERRS * s.stderr
                } else {
                    gap.abs() <= MC_REL_GAP_LARGE_GAMMA
                };
                ok &= pass && s.censored == 0;
                lines.push(format!(
                    "gamma={gamma} phi={phi} tau={tau}: analytic {analytic:.2}, MC {:.2} ± {:.2} (gap {:+.2}%)",
                    s.mean,
                    s.stderr,
                    100.0 * gap
                ));
            }
        }
    }
    gate.report(
        6,
        ok,
        t,
        format!(
            "12 Monte Carlo configurations, {MC_REPLICATIONS} replications each (3 stderr at gamma=0.01, 5% relative gap at gamma=0.2)"
        ),
    );
    for l in lines {
        note(l);
    }
}

fn random_stationary_phi(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
    loop {
        let m = Matrix2::from_fn(|_, _| rng.random_range(-0.95..0.95));
        if spectral_radius(&m) < 0.97 {
            return m;
        }
    }
}

fn random_psd(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
    let (sx, sy, r): (f64, f64, f64) =
        (rng.random_range(0.05..3.0), rng.random_range(0.05..3.0), rng.random_range(-0.99..0.99));
    Matrix2::new(sx * sx, r * sx * sy, r * sx * sy, sy * sy)
}

fn criterion_7(gate: &mut Gate) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok && !failures.iter().any(|f| f == name) {
            failures.push(name.to_string());
        }
    };
    for _ in 0..500 {
        let phi = random_stationary_phi(&mut rng);
        let se = random_psd(&mut rng);
        let m = Var1Model::new(nalgebra::Vector2::new(1.0, 1.0), phi, se).unwrap();
        let a = stationary_covariance_with(&m, CovarianceMethod::Kronecker).unwrap().sigma_w;
        let b = stationary_covariance_with(&m, CovarianceMethod::ClosedForm).unwrap().sigma_w;
        check("Stein residual", (a - phi * a * phi.transpose() - se).abs().max() < 1e-10);
        check("closed-form Stein solution", (a - b).abs().max() < 1e-10 * a.abs().max().max(1.0));
        let n = rng.random_range(1..40);
        if let Some(c) = matrix_power_sums_closed_form(&phi, n) {
            let d = matrix_power_sums(&phi, n).unwrap();
            let scale = 1.0 + d.pi.abs().max();
            check(
                "power-sum closed forms",
                (c.lambda - d.lambda).abs().max() < 1e-8 * scale && (c.pi - d.pi).abs().max() < 1e-8 * scale,
            );
        }
        let (p1, p2) = (phi[(0, 0)], phi[(1, 1)]);
        let dphi = Matrix2::new(p1, 0.0, 0.0, p2);
        let dm = Var1Model::new(nalgebra::Vector2::new(1.0, 1.0), dphi, se).unwrap();
        let da = stationary_covariance_with(&dm, CovarianceMethod::Kronecker).unwrap().sigma_w;
        let general = subgroup_mean_covariance(&dphi, &da, n).unwrap();
        let xi = diagonal_subgroup_covariance(p1, p2, &da, n).unwrap();
        check("diagonal closed forms", (general - xi).abs().max() < 1e-12 * da.abs().max().max(1.0));
    }
    for _ in 0..100 {
        let (gx, gy): (f64, f64) = (rng.random_range(0.005..0.2), rng.random_range(0.005..0.2));
        let params =
            RatioParams::new(gx, gy, rng.random_range(0.2..5.0) * gx / gy, rng.random_range(-0.95..0.95)).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=1000 {
            let p = 0.0005 + 0.999 * (i as f64 - 0.5) / 1000.0;
            let z = params.quantile(p).unwrap();
            check("quantile monotonicity", z > prev);
            check("CDF/quantile round trip", (params.cdf(z) - p).abs() < 1e-10);
            prev = z;
        }
    }
    // Unequal autocorrelations with strong cross-correlation admit no valid
    // subgroup law; such draws are rejected by the design and skipped here.
    let mut feasible = 0;
    for _ in 0..200 {
        let g = (rng.random_range(0.005..0.2), rng.random_range(0.005..0.2));
        let phi = (rng.random_range(0.0..0.8), rng.random_range(0.0..0.8));
        let (rho, n) = (rng.random_range(-0.9..0.9), rng.random_range(1..20));
        let Ok(d) = diagonal_law(g, rho, phi, 1.0).and_then(|law| design_chart_for_law(&law, n, 0.005)) else {
            continue;
        };
        feasible += 1;
        let r = arl(&d, &ShiftSpec::null(&d)).unwrap();
        check("null-shift beta", (r.beta - (1.0 - d.alpha)).abs() < 1e-9);
    }
    check("null-shift beta", feasible >= 50);
    let d = design_chart(&food_example_model(), 5, 0.005).unwrap();
    let cfg = SimConfig::new(food_example_model(), 5, SEED, 300).unwrap();
    check("simulator determinism", run_lengths(&d, &cfg).unwrap() == run_lengths(&d, &cfg).unwrap());
    let detail = if failures.is_empty() {
        "property suites (Stein, closed forms, diagonal forms, power sums, round trip, monotonicity, null shift, determinism) hold".to_string()
    } else {
        format!("violated: {}", failures.join(", "))
    };
    gate.report(7, failures.is_empty(), t, detail);
}

fn criterion_8(gate: &mut Gate) {
    let t = Instant::now();
    let (_, rows) = replay_example().unwrap();
    let published = read_rows("food_published.csv");
    let mut worst = 0.0f64;
    for (row, p) in rows.iter().zip(&published) {
        assert_eq!(row.sample, num(p, 0) as u64);
        worst = worst.max((row.zbar - num(p, 3)).abs());
    }
    let flagged: Vec<u64> = rows.iter().filter(|r| r.verdict == Verdict::OutOfControl).map(|r| r.sample).collect();
    let ok = rows.len() == 15 && published.len() == 15 && worst < ZBAR_TOL && flagged == [14, 15];
    gate.report(
        8,
        ok,
        t,
        format!("replayed 15 samples: max |Zbar - published| {worst:.1e} (tol {ZBAR_TOL:.0e}), flagged {flagged:?}"),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);
    criterion_8(&mut gate);
    println!("acceptance: {} of 8 criteria passed", 8 - gate.failed);
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
