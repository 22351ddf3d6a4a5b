use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;

use rzchart_core::io::fmt_num;
use rzchart_core::sim::{
    food_example_data, food_example_model, replay, run_lengths, simulate_series, simulate_subgroups, summarize_runs,
    RNG_DESCRIPTION,
};
use rzchart_core::tables::{earl_curve, sweep, write_table, EarlCurveSpec, TableGrid};
use rzchart_core::{
    arl, design_chart_for_law, earl, estimate_var1_with, read_subgroups_path, shifted_model, write_subgroups,
    ChartDesign, EarlMethod, EstimationOptions, PhaseISeries, ShiftInterval, ShiftSpec, SimConfig, Verdict,
};

use crate::config::{
    config_error, join_list, join_pairs, parse_list, parse_pairs, required, DesignArgs, EarlArgs, Echo, EstimationArgs,
    InputArgs, Process, ProcessArgs, ShiftArgs, SimArgs, TableArgs,
};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_REPLICATIONS: usize = 10_000;
const DEFAULT_STEP: f64 = 0.01;
const FIGURE_N: [usize; 2] = [2, 15];
const FIGURE_GAMMA: [(f64, f64); 2] = [(0.01, 0.01), (0.2, 0.2)];
const FIGURE_PHI: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
const FIGURE_INTERVALS: [&str; 2] = ["[0.9,1)", "(1,1.1]"];

pub struct Output {
    inner: Box<dyn Write>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> anyhow::Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => {
                Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self { inner })
    }

    fn echo(&mut self, echo: &Echo) -> anyhow::Result<()> {
        for line in echo.lines() {
            writeln!(self.inner, "# {line}")?;
        }
        Ok(())
    }

    /// Echo, then a CSV header and rows.
    fn csv(&mut self, echo: &Echo, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        self.echo(echo)?;
        let mut w = csv::Writer::from_writer(&mut self.inner);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn warn_validity(design: &ChartDesign) {
    if design.outside_validity_range() {
        eprintln!(
            "warning: subgroup coefficient of variation above 0.2 (gamma_x = {:.4}, gamma_y = {:.4}); the ratio approximation may be inaccurate",
            design.in_control_params.gamma_x, design.in_control_params.gamma_y
        );
    }
}

struct Designed {
    process: Process,
    design: ChartDesign,
}

fn build_design(process: &ProcessArgs, d: &DesignArgs, echo: &mut Echo) -> anyhow::Result<Designed> {
    let process = process.resolve()?;
    let (n, alpha) = (d.n()?, d.alpha()?);
    let design = design_chart_for_law(&process.law()?, n, alpha)?;
    process.echo(echo);
    echo_design(echo, n, alpha);
    warn_validity(&design);
    Ok(Designed { process, design })
}

fn echo_design(echo: &mut Echo, n: usize, alpha: f64) {
    echo.section("design");
    echo.int("n", n);
    echo.num("alpha", alpha);
}

fn resolve_shift(shift: &ShiftArgs, design: &ChartDesign, echo: &mut Echo) -> anyhow::Result<ShiftSpec> {
    let spec = ShiftSpec::new(shift.tau.unwrap_or(1.0), shift.rho1.unwrap_or(design.rho0))?;
    echo.section("shift");
    echo.num("tau", spec.tau);
    echo.num("rho1", spec.rho1);
    Ok(spec)
}

fn resolve_earl_method(e: &EarlArgs) -> anyhow::Result<(EarlMethod, String)> {
    let name = e.method.as_deref().unwrap_or("gauss-legendre");
    let method = match name {
        "gauss-legendre" => {
            EarlMethod::GaussLegendre { order: e.order.unwrap_or(rzchart_core::chart::DEFAULT_EARL_ORDER) }
        }
        "grid" => EarlMethod::Grid { step: e.step.unwrap_or(DEFAULT_STEP) },
        other => return Err(config_error(format!("`method` must be gauss-legendre or grid, got `{other}`"))),
    };
    Ok((method, name.to_string()))
}

fn echo_earl_method(echo: &mut Echo, method: &EarlMethod, name: &str) {
    echo.text("method", name);
    match method {
        EarlMethod::GaussLegendre { order } => echo.int("order", order),
        EarlMethod::Grid { step } => echo.num("step", *step),
    }
}

fn design_fields(d: &ChartDesign) -> Vec<String> {
    vec![d.n.to_string(), fmt_num(d.alpha), fmt_num(d.lcl), fmt_num(d.ucl)]
}

pub fn design(process: ProcessArgs, d: DesignArgs, out: Output) -> anyhow::Result<()> {
    let mut echo = Echo::new("design");
    let Designed { design, .. } = build_design(&process, &d, &mut echo)?;
    let s = &design.in_control_stats;
    let mut out = out;
    out.csv(
        &echo,
        &["n", "alpha", "lcl", "ucl", "arl0", "gamma_xbar", "gamma_ybar", "rho_bar", "omega_bar"],
        &[[
            design_fields(&design),
            vec![
                fmt_num(design.arl0()),
                fmt_num(s.gamma_xbar),
                fmt_num(s.gamma_ybar),
                fmt_num(s.rho_bar),
                fmt_num(s.omega_bar),
            ],
        ]
        .concat()],
    )?;
    out.finish()
}

pub fn arl_cmd(process: ProcessArgs, d: DesignArgs, shift: ShiftArgs, out: Output) -> anyhow::Result<()> {
    let mut echo = Echo::new("arl");
    let Designed { design, .. } = build_design(&process, &d, &mut echo)?;
    let spec = resolve_shift(&shift, &design, &mut echo)?;
    let report = arl(&design, &spec)?;
    let mut out = out;
    out.csv(
        &echo,
        &["n", "alpha", "lcl", "ucl", "tau", "rho0", "rho1", "beta", "arl"],
        &[[
            design_fields(&design),
            vec![
                fmt_num(spec.tau),
                fmt_num(design.rho0),
                fmt_num(spec.rho1),
                fmt_num(report.beta),
                fmt_num(report.arl),
            ],
        ]
        .concat()],
    )?;
    out.finish()
}

pub fn earl_cmd(
    process: ProcessArgs,
    d: DesignArgs,
    rho1: Option<f64>,
    e: EarlArgs,
    out: Output,
) -> anyhow::Result<()> {
    let mut echo = Echo::new("earl");
    let Designed { design, .. } = build_design(&process, &d, &mut echo)?;
    let rho1 = rho1.unwrap_or(design.rho0);
    let interval = ShiftInterval::parse(&required("interval", e.interval.clone())?)?;
    let (method, name) = resolve_earl_method(&e)?;
    let value = earl(&design, &interval, rho1, method)?;
    echo.section("shift");
    echo.num("rho1", rho1);
    echo.section("earl");
    echo.text("interval", &interval.to_string());
    echo_earl_method(&mut echo, &method, &name);
    let mut out = out;
    out.csv(
        &echo,
        &["n", "alpha", "lcl", "ucl", "interval", "rho0", "rho1", "earl"],
        &[[design_fields(&design), vec![interval.to_string(), fmt_num(design.rho0), fmt_num(rho1), fmt_num(value)]]
            .concat()],
    )?;
    out.finish()
}

pub fn table(t: TableArgs, d: DesignArgs, process: ProcessArgs, e: EarlArgs, out: Output) -> anyhow::Result<()> {
    // Subgroup sizes come from `n_values`; a shared file's `n` is ignored.
    let alpha = if d.alpha.is_some() || d.arl0.is_some() { Some(d.alpha()?) } else { None };
    let z0 = process.z0;
    match t.figure {
        Some(k) => figure(&t, k, alpha, z0, &e, out),
        None => grid_table(&t, alpha, z0, out),
    }
}

fn grid_table(t: &TableArgs, alpha: Option<f64>, z0: Option<f64>, out: Output) -> anyhow::Result<()> {
    let mut grid = match t.preset {
        Some(k) => TableGrid::preset(k)?,
        None => TableGrid {
            n: parse_list("n_values", &required("n_values", t.n_values.clone())?)?,
            gamma: parse_pairs("gamma_values", &required("gamma_values", t.gamma_values.clone())?)?,
            rho: parse_pairs("rho_values", &required("rho_values", t.rho_values.clone())?)?,
            phi: parse_pairs("phi_values", &required("phi_values", t.phi_values.clone())?)?,
            tau: vec![1.0],
            z0: 1.0,
            alpha: required("alpha or arl0", alpha)?,
        },
    };
    if let Some(s) = &t.n_values {
        grid.n = parse_list("n_values", s)?;
    }
    if let Some(s) = &t.gamma_values {
        grid.gamma = parse_pairs("gamma_values", s)?;
    }
    if let Some(s) = &t.rho_values {
        grid.rho = parse_pairs("rho_values", s)?;
    }
    if let Some(s) = &t.phi_values {
        grid.phi = parse_pairs("phi_values", s)?;
    }
    if let Some(s) = &t.tau_values {
        grid.tau = parse_list("tau_values", s)?;
    }
    if let Some(a) = alpha {
        grid.alpha = a;
    }
    if let Some(z) = z0 {
        grid.z0 = z;
    }
    let rows = sweep(&grid)?;

    let mut echo = Echo::new("table");
    echo.section("process");
    echo.num("z0", grid.z0);
    echo.section("design");
    echo.num("alpha", grid.alpha);
    echo.section("table");
    if let Some(k) = t.preset {
        echo.int("preset", k);
    }
    echo.text("n_values", &join_list(&grid.n));
    echo.text("gamma_values", &join_pairs(&grid.gamma));
    echo.text("rho_values", &join_pairs(&grid.rho));
    echo.text("phi_values", &join_pairs(&grid.phi));
    echo.text("tau_values", &join_list(&grid.tau));
    let mut out = out;
    write_table(&mut out.inner, &rows, echo.lines())?;
    out.finish()
}

fn figure(t: &TableArgs, k: u32, alpha: Option<f64>, z0: Option<f64>, e: &EarlArgs, out: Output) -> anyhow::Result<()> {
    let rho = match k {
        1 => (-0.8, -0.8),
        2 => (-0.4, -0.8),
        _ => return Err(config_error(format!("no figure preset {k}; use 1 or 2"))),
    };
    let n: Vec<usize> = match &t.n_values {
        Some(s) => parse_list("n_values", s)?,
        None => FIGURE_N.to_vec(),
    };
    let gamma = match &t.gamma_values {
        Some(s) => parse_pairs("gamma_values", s)?,
        None => FIGURE_GAMMA.to_vec(),
    };
    let rho = match &t.rho_values {
        Some(s) => parse_pairs("rho_values", s)?,
        None => vec![rho],
    };
    let phi11 = match &t.phi11_values {
        Some(s) => parse_list("phi11_values", s)?,
        None => FIGURE_PHI.to_vec(),
    };
    let phi22 = match &t.phi22_values {
        Some(s) => parse_list("phi22_values", s)?,
        None => FIGURE_PHI.to_vec(),
    };
    let intervals = match &t.interval_values {
        Some(s) => s.split(';').map(|i| ShiftInterval::parse(i.trim())).collect::<Result<Vec<_>, _>>()?,
        None => FIGURE_INTERVALS.iter().map(|i| ShiftInterval::parse(i)).collect::<Result<Vec<_>, _>>()?,
    };
    let (method, name) = resolve_earl_method(e)?;
    let (alpha, z0) = (alpha.unwrap_or(0.005), z0.unwrap_or(1.0));

    let mut rows = Vec::new();
    for &n in &n {
        for &g in &gamma {
            for &(rho0, rho1) in &rho {
                for interval in &intervals {
                    let spec = EarlCurveSpec {
                        n,
                        gamma: g,
                        rho0,
                        rho1,
                        phi11: phi11.clone(),
                        phi22: phi22.clone(),
                        interval: *interval,
                        method,
                        z0,
                        alpha,
                    };
                    for p in earl_curve(&spec)? {
                        rows.push(vec![
                            n.to_string(),
                            fmt_num(g.0),
                            fmt_num(g.1),
                            fmt_num(rho0),
                            fmt_num(rho1),
                            interval.to_string(),
                            fmt_num(p.phi11),
                            fmt_num(p.phi22),
                            fmt_num(p.earl),
                        ]);
                    }
                }
            }
        }
    }

    let mut echo = Echo::new("table");
    echo.section("process");
    echo.num("z0", z0);
    echo.section("design");
    echo.num("alpha", alpha);
    echo.section("earl");
    echo_earl_method(&mut echo, &method, &name);
    echo.section("table");
    echo.int("figure", k);
    echo.text("n_values", &join_list(&n));
    echo.text("gamma_values", &join_pairs(&gamma));
    echo.text("rho_values", &join_pairs(&rho));
    echo.text("phi11_values", &join_list(&phi11));
    echo.text("phi22_values", &join_list(&phi22));
    echo.text("interval_values", &intervals.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"));
    let mut out = out;
    out.csv(&echo, &["n", "gamma_x", "gamma_y", "rho0", "rho1", "interval", "phi11", "phi22", "earl"], &rows)?;
    out.finish()
}

/// Reads a Phase I series: either the subgroup format or a plain `x,y` file.
fn read_series(path: &Path) -> anyhow::Result<PhaseISeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["x", "y"] {
        return Ok(read_subgroups_path(path)?.to_series()?);
    }
    let mut obs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| config_error(format!("{}: row {}: cannot parse `{s}`", path.display(), i + 1)))
        };
        obs.push([parse(&rec[0])?, parse(&rec[1])?]);
    }
    Ok(PhaseISeries::new(obs)?)
}

pub fn estimate(input: InputArgs, est: EstimationArgs, out: Output) -> anyhow::Result<()> {
    let path = required("data", input.data)?;
    let defaults = EstimationOptions::default();
    let options = EstimationOptions {
        min_length: est.min_length.unwrap_or(defaults.min_length),
        max_lag: est.max_lag.unwrap_or(defaults.max_lag),
    };
    let fit = estimate_var1_with(&read_series(&path)?, options)?;
    if !fit.stationary {
        eprintln!(
            "warning: estimated transition matrix is not stationary (spectral radius {:.6})",
            fit.spectral_radius
        );
    }

    let mut echo = Echo::new("estimate");
    echo.section("input");
    echo.text("data", &path.display().to_string());
    echo.section("estimation");
    echo.int("min_length", options.min_length);
    echo.int("max_lag", options.max_lag);
    echo.section("result");
    echo.int("length", fit.length);
    echo.num("spectral_radius", fit.spectral_radius);
    echo.int("stationary", fit.stationary);
    for (k, c) in fit.residual_ccf.iter().enumerate() {
        echo.text(
            &format!("residual_ccf_lag{}", k + 1),
            &format!("{:.4} {:.4}; {:.4} {:.4}", c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]),
        );
    }

    let mut out = out;
    out.echo(&echo)?;
    let (mu, phi, s) = (fit.mu, fit.phi, fit.sigma_eps);
    writeln!(out.inner, "[process]")?;
    for (k, v) in [
        ("mu_x", mu[0]),
        ("mu_y", mu[1]),
        ("phi11", phi[(0, 0)]),
        ("phi12", phi[(0, 1)]),
        ("phi21", phi[(1, 0)]),
        ("phi22", phi[(1, 1)]),
        ("sigma11", s[(0, 0)]),
        ("sigma12", s[(0, 1)]),
        ("sigma22", s[(1, 1)]),
    ] {
        writeln!(out.inner, "{k} = {v:?}")?;
    }
    out.finish()
}

pub fn simulate(
    process: ProcessArgs,
    d: DesignArgs,
    shift: ShiftArgs,
    sim: SimArgs,
    out: Output,
) -> anyhow::Result<()> {
    let mut echo = Echo::new("simulate");
    let Designed { process, design } = build_design(&process, &d, &mut echo)?;
    let spec = resolve_shift(&shift, &design, &mut echo)?;
    // A null shift on an explicit model simulates that model as given.
    let model = match &process {
        Process::Model(m) if spec == ShiftSpec::null(&design) => *m,
        _ => shifted_model(&design, &spec)?,
    };
    let seed = sim.seed.unwrap_or(DEFAULT_SEED);
    echo.section("simulation");
    echo.int("seed", seed);

    let mut out = out;
    if sim.subgroups.is_some() && sim.series.is_some() {
        return Err(config_error("give at most one of `subgroups` and `series`"));
    }
    if let Some(len) = sim.series {
        echo.int("series", len);
        echo.section("result");
        echo.text("generator", RNG_DESCRIPTION);
        let rows: Vec<Vec<String>> = simulate_series(&model, len, seed)?
            .iter()
            .map(|o| vec![format!("{:?}", o[0]), format!("{:?}", o[1])])
            .collect();
        out.csv(&echo, &["x", "y"], &rows)?;
        return out.finish();
    }
    if let Some(count) = sim.subgroups {
        echo.int("subgroups", count);
        echo.section("result");
        echo.text("generator", RNG_DESCRIPTION);
        let data = simulate_subgroups(&model, design.n, count, seed)?;
        write_subgroups(&mut out.inner, &data, echo.lines())?;
        return out.finish();
    }

    let replications = sim.replications.unwrap_or(DEFAULT_REPLICATIONS);
    let config = SimConfig::new(model, design.n, seed, replications)?;
    let config = match sim.max_run_length {
        Some(cap) => config.with_max_run_length(cap)?,
        None => config,
    };
    echo.int("replications", replications);
    echo.int("max_run_length", config.max_run_length);
    let runs = run_lengths(&design, &config)?;
    let report = summarize_runs(&runs, config.max_run_length);
    let summary = report.empirical().expect("simulated report");
    let analytic = arl(&design, &spec)?;
    echo.section("result");
    echo.text("generator", RNG_DESCRIPTION);
    echo.num("arl_empirical", summary.mean);
    echo.num("stderr", summary.stderr);
    echo.int("censored", summary.censored);
    echo.num("arl_analytic", analytic.arl);
    eprintln!(
        "empirical ARL {:.3} ± {:.3} ({} runs, {} censored); analytic {}",
        summary.mean,
        summary.stderr,
        replications,
        summary.censored,
        fmt_num(analytic.arl)
    );
    let rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(r, run)| match run {
            Some(l) => vec![r.to_string(), l.to_string(), "false".into()],
            None => vec![r.to_string(), config.max_run_length.to_string(), "true".into()],
        })
        .collect();
    out.csv(&echo, &["replication", "run_length", "censored"], &rows)?;
    out.finish()
}

pub fn monitor(process: ProcessArgs, d: DesignArgs, input: InputArgs, out: Output) -> anyhow::Result<()> {
    let example = input.example.unwrap_or(false);
    let (process, d, data) = if example {
        if input.data.is_some() {
            return Err(config_error("give either `data` or `example`, not both"));
        }
        let m = food_example_model();
        let s = m.sigma_eps();
        let base = ProcessArgs {
            mu_x: Some(m.mu()[0]),
            mu_y: Some(m.mu()[1]),
            sigma11: Some(s[(0, 0)]),
            sigma12: Some(s[(0, 1)]),
            sigma22: Some(s[(1, 1)]),
            phi11: Some(m.phi()[(0, 0)]),
            phi12: Some(m.phi()[(0, 1)]),
            phi21: Some(m.phi()[(1, 0)]),
            phi22: Some(m.phi()[(1, 1)]),
            ..Default::default()
        };
        let data = food_example_data()?;
        (process.over(base), d.over(DesignArgs { n: None, alpha: Some(0.005), arl0: None }), data)
    } else {
        let path = required("data", input.data.clone())?;
        (process, d, read_subgroups_path(&path)?)
    };
    let n = data.subgroup_size();
    if d.n.is_some_and(|given| given != n) {
        return Err(config_error(format!("`n` is {} but the data hold subgroups of {n}", d.n.unwrap_or(0))));
    }
    let d = DesignArgs { n: Some(n), ..d };

    let mut echo = Echo::new("monitor");
    let Designed { design, .. } = build_design(&process, &d, &mut echo)?;
    echo.section("input");
    match &input.data {
        Some(p) => echo.text("data", &p.display().to_string()),
        None => echo.int("example", true),
    }
    let rows = replay(&design, &data);
    let signals: Vec<u64> = rows.iter().filter(|r| r.verdict == Verdict::OutOfControl).map(|r| r.sample).collect();
    echo.section("result");
    echo.num("lcl", design.lcl);
    echo.num("ucl", design.ucl);
    echo.text("signals", &join_list(&signals));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.sample.to_string(), fmt_num(r.xbar), fmt_num(r.ybar), fmt_num(r.zbar), r.verdict.as_str().into()]
        })
        .collect();
    let mut out = out;
    out.csv(&echo, &["sample", "xbar", "ybar", "zbar", "verdict"], &table)?;
    out.finish()
}
