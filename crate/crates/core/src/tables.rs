//! Deterministic parameter sweeps for limit/ARL tables and EARL curves.

use std::io::Write;

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::chart::{arl, design_chart_for_law, earl, EarlMethod, ShiftInterval, ShiftSpec};
use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::var1::StationaryLaw;

pub const TABLE_COLUMNS: [&str; 12] =
    ["n", "gamma_x", "gamma_y", "rho0", "rho1", "phi11", "phi22", "tau", "lcl", "ucl", "beta", "arl"];

pub const PUBLISHED_N: [usize; 5] = [2, 5, 7, 10, 15];
pub const PUBLISHED_TAU: [f64; 8] = [0.90, 0.95, 0.98, 0.99, 1.01, 1.02, 1.05, 1.10];
const RHO_LEVELS: [f64; 5] = [-0.8, -0.4, 0.0, 0.4, 0.8];
const CROSS_SHIFTS: [(f64, f64); 4] = [(-0.4, -0.2), (-0.4, -0.8), (0.4, 0.2), (0.4, 0.8)];

/// Cross product of design and shift settings. Rows come out in the order
/// n, (γ_X, γ_Y), (ρ₀, ρ₁), (Φ₁₁, Φ₂₂), τ, the last varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGrid {
    pub n: Vec<usize>,
    pub gamma: Vec<(f64, f64)>,
    pub rho: Vec<(f64, f64)>,
    pub phi: Vec<(f64, f64)>,
    pub tau: Vec<f64>,
    pub z0: f64,
    pub alpha: f64,
}

impl TableGrid {
    pub fn cells(&self) -> usize {
        self.n.len() * self.gamma.len() * self.rho.len() * self.phi.len() * self.tau.len()
    }

    fn validate(&self) -> Result<()> {
        if self.cells() == 0 {
            return Err(Error::invalid("grid", "every grid axis needs at least one value"));
        }
        Ok(())
    }

    /// Published grid `k` (1–7). Grid 1 holds limits only (τ = 1).
    pub fn preset(k: u32) -> Result<Self> {
        let equal = vec![(0.01, 0.01), (0.2, 0.2)];
        let unequal = vec![(0.01, 0.2), (0.2, 0.01)];
        let same = |v: &[f64]| v.iter().map(|&r| (r, r)).collect::<Vec<_>>();
        let symmetric_phi = vec![(0.1, 0.1), (0.7, 0.7)];
        let mixed_phi = vec![(0.1, 0.7), (0.7, 0.1)];
        let base =
            |gamma, rho, phi, tau| TableGrid { n: PUBLISHED_N.to_vec(), gamma, rho, phi, tau, z0: 1.0, alpha: 0.005 };
        let taus = PUBLISHED_TAU.to_vec();
        Ok(match k {
            1 => base(
                vec![(0.01, 0.01), (0.2, 0.2), (0.01, 0.2), (0.2, 0.01)],
                same(&RHO_LEVELS),
                vec![(0.1, 0.1)],
                vec![1.0],
            ),
            2 => base(equal, same(&RHO_LEVELS), symmetric_phi, taus),
            3 => base(unequal, same(&RHO_LEVELS), symmetric_phi, taus),
            4 => base(equal, same(&RHO_LEVELS), mixed_phi, taus),
            5 => base(unequal, same(&RHO_LEVELS), mixed_phi, taus),
            6 => base(equal, CROSS_SHIFTS.to_vec(), symmetric_phi, taus),
            7 => base(unequal, CROSS_SHIFTS.to_vec(), symmetric_phi, taus),
            _ => return Err(Error::invalid("preset", format!("no table preset {k}; use 1-7"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub n: usize,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub phi11: f64,
    pub phi22: f64,
    pub tau: f64,
    pub lcl: f64,
    pub ucl: f64,
    pub beta: f64,
    pub arl: f64,
}

impl TableRow {
    pub fn fields(&self) -> [String; 12] {
        [
            self.n.to_string(),
            fmt_num(self.gamma_x),
            fmt_num(self.gamma_y),
            fmt_num(self.rho0),
            fmt_num(self.rho1),
            fmt_num(self.phi11),
            fmt_num(self.phi22),
            fmt_num(self.tau),
            fmt_num(self.lcl),
            fmt_num(self.ucl),
            fmt_num(self.beta),
            fmt_num(self.arl),
        ]
    }
}

/// Stationary law with `μ = (z₀, 1)` and a diagonal Φ.
pub fn diagonal_law(gamma: (f64, f64), rho: f64, phi: (f64, f64), z0: f64) -> Result<StationaryLaw> {
    StationaryLaw::from_moments(gamma.0, gamma.1, rho, Matrix2::new(phi.0, 0.0, 0.0, phi.1), z0)
}

/// Evaluates every cell of the grid. Cells are computed in parallel but
/// returned in grid order.
pub fn sweep(grid: &TableGrid) -> Result<Vec<TableRow>> {
    grid.validate()?;
    let mut designs = Vec::new();
    for &n in &grid.n {
        for &gamma in &grid.gamma {
            for &(rho0, rho1) in &grid.rho {
                for &phi in &grid.phi {
                    designs.push((n, gamma, rho0, rho1, phi));
                }
            }
        }
    }
    let blocks: Vec<Result<Vec<TableRow>>> = designs
        .par_iter()
        .map(|&(n, gamma, rho0, rho1, phi)| {
            let design = design_chart_for_law(&diagonal_law(gamma, rho0, phi, grid.z0)?, n, grid.alpha)?;
            grid.tau
                .iter()
                .map(|&tau| {
                    let r = arl(&design, &ShiftSpec::new(tau, rho1)?)?;
                    Ok(TableRow {
                        n,
                        gamma_x: gamma.0,
                        gamma_y: gamma.1,
                        rho0,
                        rho1,
                        phi11: phi.0,
                        phi22: phi.1,
                        tau,
                        lcl: design.lcl,
                        ucl: design.ucl,
                        beta: r.beta,
                        arl: r.arl,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.cells());
    for b in blocks {
        rows.extend(b?);
    }
    Ok(rows)
}

pub fn write_table<W: Write>(writer: W, rows: &[TableRow], preamble: &[String]) -> Result<()> {
    let mut w = writer;
    for line in preamble {
        writeln!(w, "# {line}").map_err(|e| Error::Data(e.to_string()))?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TABLE_COLUMNS).map_err(|e| Error::Data(e.to_string()))?;
    for r in rows {
        wtr.write_record(r.fields()).map_err(|e| Error::Data(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))
}

/// Settings of one EARL-versus-Φ curve family.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlCurveSpec {
    pub n: usize,
    pub gamma: (f64, f64),
    pub rho0: f64,
    pub rho1: f64,
    pub phi11: Vec<f64>,
    pub phi22: Vec<f64>,
    pub interval: ShiftInterval,
    pub method: EarlMethod,
    pub z0: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlPoint {
    pub phi11: f64,
    pub phi22: f64,
    pub earl: f64,
}

/// EARL over the (Φ₁₁, Φ₂₂) grid, Φ₂₂ varying fastest.
pub fn earl_curve(spec: &EarlCurveSpec) -> Result<Vec<EarlPoint>> {
    let pairs: Vec<(f64, f64)> = spec.phi11.iter().flat_map(|&a| spec.phi22.iter().map(move |&b| (a, b))).collect();
    if pairs.is_empty() {
        return Err(Error::invalid("phi", "need at least one (phi11, phi22) pair"));
    }
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let design =
                design_chart_for_law(&diagonal_law(spec.gamma, spec.rho0, (a, b), spec.z0)?, spec.n, spec.alpha)?;
            Ok(EarlPoint { phi11: a, phi22: b, earl: earl(&design, &spec.interval, spec.rho1, spec.method)? })
        })
        .collect()
}

pub fn write_earl_curve<W: Write>(writer: W, points: &[EarlPoint], preamble: &[String]) -> Result<()> {
    let mut w = writer;
    for line in preamble {
        writeln!(w, "# {line}").map_err(|e| Error::Data(e.to_string()))?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["phi11", "phi22", "earl"]).map_err(|e| Error::Data(e.to_string()))?;
    for p in points {
        wtr.write_record([fmt_num(p.phi11), fmt_num(p.phi22), fmt_num(p.earl)])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))
}
