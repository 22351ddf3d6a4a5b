//! Shewhart-RZ control charts for the ratio `X/Y` of two normal variables
//! whose observations follow a bivariate VAR(1) process.
//!
//! The pieces, bottom up:
//!
//! - [`var1`]: stationary and subgroup-mean covariances of the process.
//! - [`ratio`]: quantile and CDF of the ratio of correlated normals.
//! - [`chart`]: probability limits, ARL under shifts, EARL.
//! - [`estimate`]: least-squares VAR(1) fit to Phase I data.
//! - [`sim`]: seeded Monte Carlo subgroups and run lengths.
//! - [`tables`], [`io`]: grid sweeps and CSV formats.

// `!(x < bound)` is how parameter checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod error;
pub mod estimate;
pub mod io;
pub mod normal;
pub mod quadrature;
pub mod ratio;
pub mod sim;
pub mod tables;
pub mod var1;

pub use chart::{
    alpha_from_arl0, arl, arl0_from_alpha, classify, design_chart, design_chart_for_law, earl, out_of_control_params,
    ChartDesign, EarlMethod, EmpiricalSummary, RunLengthKind, RunLengthReport, ShiftInterval, ShiftSpec, Verdict,
};
pub use error::{Error, Result};
pub use estimate::{estimate_var1, estimate_var1_with, EstimationOptions, PhaseISeries, Var1Estimate};
pub use io::{read_subgroups, read_subgroups_path, write_subgroups, Subgroup, SubgroupData};
pub use normal::{standard_normal_cdf, standard_normal_quantile};
pub use ratio::{ratio_cdf, ratio_quantile, RatioParams};
pub use sim::{draw_subgroup, empirical_run_length, replay, replay_example, shifted_model, ReplayRow, SimConfig};
pub use tables::{earl_curve, sweep, EarlCurveSpec, EarlPoint, TableGrid, TableRow};
pub use var1::{
    matrix_power_sums, stationary_covariance, subgroup_covariance, CovarianceMethod, StationaryCov, StationaryLaw,
    SubgroupStats, Var1Model,
};

pub use nalgebra::{Matrix2, Vector2};
