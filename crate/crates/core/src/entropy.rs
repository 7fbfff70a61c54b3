//! Local entropy and temperature from adiabatic transport.
//!
//! `S(p)` is the energy at which the horizontal lift of the straight base
//! segment from `π(p)` to a reference point `V₀` crosses the reference fibre.
//! On a flat system the lifts are the leaves of `ker ξ`, so `S` is constant on
//! leaves and `ξ = T dS` with `T = 1 / (∂S/∂U)`. On a curved system the
//! transported value depends on the path, which is reported.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::bundle::WorkSystem;
use crate::error::{Error, Result};
use crate::expr::Point;
use crate::geometry::{Chart, Region};
use crate::lift::{lift_from, transport_energy, BaseCurve, LiftOptions};

/// Finite-difference step across the fibre, in energy units.
pub const ENERGY_STEP: f64 = 1e-5;
/// Relative finite-difference step along base coordinates.
pub const BASE_STEP: f64 = 1e-5;
/// Default pass threshold for the `|ξ - T dS|` residual.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
/// Two transport paths differing by more than this many residual tolerances
/// mark the reconstruction as path dependent.
pub const PATH_FACTOR: f64 = 10.0;

const DEGENERATE: f64 = 1e-12;

/// One reconstructed grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyNode {
    /// Chart coordinates, energy first.
    pub point: Vec<f64>,
    pub entropy: f64,
    /// Signed; `1 / (∂S/∂U)`.
    pub temperature: f64,
    /// Components of `dS` in chart order.
    pub differential: Vec<f64>,
    /// Largest component of `|ξ - T dS|`.
    pub residual: f64,
    /// `|S_a - S_b|` for the two L-shaped transport paths.
    pub path_gap: f64,
}

#[derive(Debug, Clone)]
pub struct EntropyChart {
    pub system: String,
    pub chart: Chart,
    pub reference: Vec<f64>,
    pub region: Region,
    pub grid: usize,
    pub tolerance: f64,
    pub nodes: Vec<EntropyNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub max_path_gap: f64,
    pub path_dependent: bool,
    pub passed: bool,
}

struct Transport<'a> {
    system: &'a WorkSystem,
    reference: &'a [f64],
}

impl Transport<'_> {
    fn straight(&self, base: &[f64]) -> Result<BaseCurve> {
        BaseCurve::polyline(
            self.system.chart(),
            vec![base.to_vec(), self.reference.to_vec()],
        )
    }

    /// Adiabatic transport of `(u, base)` to the reference fibre; returns the
    /// energy reached and the step count used.
    fn adaptive(&self, u: f64, base: &[f64]) -> Result<(f64, usize)> {
        let r = lift_from(
            self.system,
            &self.straight(base)?,
            u,
            &LiftOptions::default(),
        )?;
        Ok((r.end_energy(), r.steps[0]))
    }

    /// Same transport with a frozen step count, so that nearby starts see the
    /// same discrete flow map.
    fn fixed(&self, u: f64, base: &[f64], steps: usize) -> Result<f64> {
        transport_energy(self.system, &self.straight(base)?, u, steps)
    }

    /// Transport along the axis-parallel staircase that fixes coordinates in
    /// the given order.
    fn staircase(&self, u: f64, base: &[f64], order: impl Iterator<Item = usize>) -> Result<f64> {
        let mut vertices = vec![base.to_vec()];
        let mut current = base.to_vec();
        for i in order {
            if current[i] != self.reference[i] {
                current[i] = self.reference[i];
                vertices.push(current.clone());
            }
        }
        if vertices.len() == 1 {
            return Ok(u);
        }
        let curve = BaseCurve::polyline(self.system.chart(), vertices)?;
        Ok(lift_from(self.system, &curve, u, &LiftOptions::default())?.end_energy())
    }
}

/// Entropy value at a single point, by adaptive transport to `reference`.
pub fn entropy_at(system: &WorkSystem, reference: &[f64], point: &Point) -> Result<f64> {
    check_reference(system, reference)?;
    let t = Transport { system, reference };
    Ok(t.adaptive(point.values()[0], &point.values()[1..])?.0)
}

fn check_reference(system: &WorkSystem, reference: &[f64]) -> Result<()> {
    if reference.len() != system.base_dim() {
        return Err(Error::Curve(format!(
            "reference point has {} coordinates, the base has {}",
            reference.len(),
            system.base_dim()
        )));
    }
    if reference.iter().any(|x| !x.is_finite()) {
        return Err(Error::Curve("reference point is not finite".into()));
    }
    Ok(())
}

fn reconstruct_node(t: &Transport<'_>, p: &Point) -> Result<EntropyNode> {
    let values = p.values();
    let (u, base) = (values[0], &values[1..]);
    let (entropy, steps) = t.adaptive(u, base)?;

    let h = ENERGY_STEP;
    let du = (t.fixed(u + h, base, steps)? - t.fixed(u - h, base, steps)?) / (2.0 * h);
    if du.abs() < DEGENERATE {
        return Err(Error::DegenerateEntropy {
            point: p.clone(),
            derivative: du,
        });
    }
    let mut differential = vec![du];
    let mut shifted = base.to_vec();
    for i in 0..base.len() {
        let h = BASE_STEP * base[i].abs().max(1.0);
        shifted[i] = base[i] + h;
        let plus = t.fixed(u, &shifted, steps)?;
        shifted[i] = base[i] - h;
        let minus = t.fixed(u, &shifted, steps)?;
        shifted[i] = base[i];
        differential.push((plus - minus) / (2.0 * h));
    }
    let temperature = 1.0 / du;

    let mut residual: f64 = (1.0 - temperature * du).abs();
    for (i, coefficient) in t.system.coefficients().iter().enumerate() {
        let xi = -coefficient.evaluate(p).map_err(|e| Error::eval(p, e))?;
        residual = residual.max((xi - temperature * differential[i + 1]).abs());
    }

    let m = base.len();
    let path_gap = if m < 2 {
        0.0
    } else {
        let a = t.staircase(u, base, 0..m)?;
        let b = t.staircase(u, base, (0..m).rev())?;
        (a - b).abs()
    };

    Ok(EntropyNode {
        point: values.to_vec(),
        entropy,
        temperature,
        differential,
        residual,
        path_gap,
    })
}

/// Reconstruct `S` and `T` on a `grid`-per-axis lattice of `region`, using
/// `reference` as the base point of the reference fibre.
pub fn reconstruct(
    system: &WorkSystem,
    reference: &[f64],
    region: &Region,
    grid: usize,
) -> Result<EntropyChart> {
    if region.chart() != system.chart() {
        return Err(Error::ChartMismatch);
    }
    check_reference(system, reference)?;
    let transport = Transport { system, reference };
    let points = region.grid(grid);
    let results: Vec<Result<EntropyNode>> = points
        .par_iter()
        .map(|p| reconstruct_node(&transport, p))
        .collect();
    let nodes = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EntropyChart {
        system: system.name().to_string(),
        chart: system.chart().clone(),
        reference: reference.to_vec(),
        region: region.clone(),
        grid,
        tolerance: RESIDUAL_TOLERANCE,
        nodes,
    })
}

/// Max and mean residual with the pass/fail verdict.
pub fn residual_report(chart: &EntropyChart) -> ResidualSummary {
    chart.summary()
}

impl EntropyChart {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn summary(&self) -> ResidualSummary {
        let n = self.nodes.len().max(1) as f64;
        let max_residual = self.nodes.iter().map(|x| x.residual).fold(0.0, f64::max);
        let mean_residual = self.nodes.iter().map(|x| x.residual).sum::<f64>() / n;
        let max_path_gap = self.nodes.iter().map(|x| x.path_gap).fold(0.0, f64::max);
        let path_dependent = max_path_gap > PATH_FACTOR * self.tolerance;
        ResidualSummary {
            max_residual,
            mean_residual,
            tolerance: self.tolerance,
            max_path_gap,
            path_dependent,
            passed: max_residual <= self.tolerance && !path_dependent,
        }
    }

    /// Columns: base coordinates, energy, `S`, `T`, residual.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header: Vec<String> = self.chart.base_names().to_vec();
        header.push(self.chart.energy_name().to_string());
        header.extend(["S", "T", "residual"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for node in &self.nodes {
            let mut row: Vec<String> = node.point[1..].iter().map(|v| format!("{v:?}")).collect();
            row.push(format!("{:?}", node.point[0]));
            row.push(format!("{:?}", node.entropy));
            row.push(format!("{:?}", node.temperature));
            row.push(format!("{:?}", node.residual));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Display for EntropyChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.summary();
        let reference: Vec<String> = self
            .chart
            .base_names()
            .iter()
            .zip(&self.reference)
            .map(|(n, v)| format!("{n}={v:?}"))
            .collect();
        writeln!(f, "system: {}", self.system)?;
        writeln!(f, "reference: {}", reference.join(", "))?;
        writeln!(f, "nodes: {}", self.nodes.len())?;
        write!(f, "{s}")
    }
}

impl fmt::Display for ResidualSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "max residual = {:e}", self.max_residual)?;
        writeln!(f, "mean residual = {:e}", self.mean_residual)?;
        writeln!(f, "max path gap = {:e}", self.max_path_gap)?;
        if self.path_dependent {
            writeln!(f, "path dependence: detected")?;
        }
        write!(
            f,
            "verdict: {} (tolerance {:e})",
            if self.passed { "pass" } else { "fail" },
            self.tolerance
        )
    }
}
