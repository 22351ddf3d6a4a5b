//! Shared fixtures for the benchmarks.

use rzchart_core::tables::diagonal_law;
use rzchart_core::{design_chart_for_law, ChartDesign, Var1Model};

/// Full (non-diagonal) transition matrix with cross-correlated innovations.
pub fn furnace_model() -> Var1Model {
    Var1Model::from_entries([10.421, 20.189], [[0.733, 0.474], [0.410, -0.561]], [[1.232, 0.588], [0.588, 1.072]])
        .expect("valid model")
}

/// One cell of the published ARL grids.
pub fn grid_design(n: usize, gamma: f64, rho: f64, phi: f64) -> ChartDesign {
    let law = diagonal_law((gamma, gamma), rho, (phi, phi), 1.0).expect("valid law");
    design_chart_for_law(&law, n, 0.005).expect("valid design")
}
