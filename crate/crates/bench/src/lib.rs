//! Shared fixtures for the benchmarks.

use heatgauge::bundle::{builtin, CatalogEntry};
use heatgauge::lift::square_loop;
use heatgauge::BaseCurve;

/// A built-in system by name.
pub fn system(name: &str) -> CatalogEntry {
    builtin(name, None).unwrap_or_else(|| panic!("no built-in system `{name}`"))
}

/// Counterclockwise square of side `side` centred at the origin of the first
/// two base coordinates.
pub fn square(entry: &CatalogEntry, side: f64) -> BaseCurve {
    let chart = entry.system.chart();
    let mut corner = vec![0.0; chart.dim() - 1];
    corner[0] = -side / 2.0;
    corner[1] = -side / 2.0;
    square_loop(chart, &corner, 0, 1, side).expect("square fits the chart")
}
