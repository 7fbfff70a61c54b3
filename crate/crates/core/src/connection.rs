//! The adiabatic connection `H = ker ξ`: horizontal lifts of base directions,
//! curvature, the Frobenius defect `ξ ∧ dξ`, and grid-sampled flatness.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::bundle::WorkSystem;
use crate::error::{Error, Result};
use crate::expr::{Expression, Point};
use crate::geometry::{DifferentialForm, Region, VectorField};

/// `X_i = ∂/∂V_i + P_i ∂/∂U` for base index `i` (0-based). It satisfies
/// `ξ(X_i) = 0` identically.
pub fn horizontal_lift_vector(system: &WorkSystem, i: usize) -> Result<VectorField> {
    let m = system.base_dim();
    if i >= m {
        return Err(Error::BaseIndex { index: i, count: m });
    }
    let chart = system.chart();
    VectorField::coordinate(chart, i + 1)
        .add(&VectorField::coordinate(chart, 0).scale(system.coefficient(i)))
}

/// Antisymmetric matrix of curvature components `F_ij`, the `∂/∂U` part of
/// `[X_i, X_j]`. Only `i < j` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureMatrix {
    size: usize,
    upper: BTreeMap<(usize, usize), Expression>,
}

impl CurvatureMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// `F_ij` with `F_ji = -F_ij` and `F_ii = 0`.
    pub fn get(&self, i: usize, j: usize) -> Expression {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.upper[&(i, j)].clone(),
            Greater => self.upper[&(j, i)].neg(),
            Equal => Expression::zero(),
        }
    }

    /// Upper-triangle entries in row order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Expression)> {
        self.upper.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn evaluate(&self, p: &Point) -> Result<Vec<f64>> {
        self.upper
            .values()
            .map(|e| e.evaluate(p).map_err(|err| Error::eval(p, err)))
            .collect()
    }
}

/// Closed form `F_ij = ∂_i P_j - ∂_j P_i + P_i ∂_U P_j - P_j ∂_U P_i`.
pub fn curvature_matrix(system: &WorkSystem) -> CurvatureMatrix {
    let chart = system.chart();
    let u = chart.energy_name();
    let m = system.base_dim();
    let mut upper = BTreeMap::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let (pi, pj) = (system.coefficient(i), system.coefficient(j));
            let (vi, vj) = (chart.name(i + 1), chart.name(j + 1));
            let f = pj
                .differentiate(vi)
                .sub(&pi.differentiate(vj))
                .add(&pi.mul(&pj.differentiate(u)))
                .sub(&pj.mul(&pi.differentiate(u)));
            upper.insert((i, j), f);
        }
    }
    CurvatureMatrix { size: m, upper }
}

/// `ξ ∧ dξ`; zero exactly where `ker ξ` is involutive.
pub fn frobenius_defect(system: &WorkSystem) -> DifferentialForm {
    let xi = system.heat_form();
    let dxi = xi.exterior_derivative().expect("degree 2 is supported");
    xi.wedge(&dxi).expect("degree 3 is supported")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Flat,
    Curved,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Flat => "flat",
            Verdict::Curved => "curved",
        })
    }
}

/// One grid node of a flatness sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessSample {
    pub point: Point,
    /// `F_ij` values in upper-triangle order.
    pub curvature: Vec<f64>,
    /// Largest `|ξ ∧ dξ|` component.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub system: String,
    pub region: Region,
    pub grid: usize,
    pub tolerance: f64,
    pub curvature: CurvatureMatrix,
    pub defect_form: DifferentialForm,
    pub max_curvature: f64,
    pub max_defect: f64,
    pub verdict: Verdict,
    pub samples: Vec<FlatnessSample>,
}

/// Sample `|F_ij|` and `|ξ ∧ dξ|` on a grid with `grid` nodes per axis. The
/// verdict is flat iff every `|F_ij|` is below `tolerance`.
pub fn flatness(
    system: &WorkSystem,
    region: &Region,
    grid: usize,
    tolerance: f64,
) -> Result<FlatnessReport> {
    if region.chart() != system.chart() {
        return Err(Error::ChartMismatch);
    }
    let curvature = curvature_matrix(system);
    let defect_form = frobenius_defect(system);
    let samples = region
        .grid(grid)
        .into_par_iter()
        .map(|point| {
            let values = curvature.evaluate(&point)?;
            let defect = defect_form.max_abs_at(&point)?;
            Ok(FlatnessSample {
                point,
                curvature: values,
                defect,
            })
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let max_curvature = samples
        .iter()
        .flat_map(|s| s.curvature.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_defect = samples.iter().fold(0.0_f64, |m, s| m.max(s.defect));
    let verdict = if max_curvature < tolerance {
        Verdict::Flat
    } else {
        Verdict::Curved
    };
    Ok(FlatnessReport {
        system: system.name().to_string(),
        region: region.clone(),
        grid,
        tolerance,
        curvature,
        defect_form,
        max_curvature,
        max_defect,
        verdict,
        samples,
    })
}

impl FlatnessReport {
    pub fn is_flat(&self) -> bool {
        self.verdict == Verdict::Flat
    }

    /// One row per grid node: coordinates, each `F_ij`, then the defect.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let chart = self.region.chart();
        let mut header: Vec<String> = chart.names().to_vec();
        for ((i, j), _) in self.curvature.entries() {
            header.push(format!("F_{}_{}", chart.name(i + 1), chart.name(j + 1)));
        }
        header.push("defect".into());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let row: Vec<String> = s
                .point
                .values()
                .iter()
                .chain(&s.curvature)
                .chain(std::iter::once(&s.defect))
                .map(|v| format!("{v:?}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Display for FlatnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let chart = self.region.chart();
        writeln!(f, "system: {}", self.system)?;
        write!(f, "region:")?;
        for (name, (lo, hi)) in chart.names().iter().zip(self.region.bounds()) {
            write!(f, " {name}∈[{lo:?}, {hi:?}]")?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "grid: {} nodes per axis ({} total)",
            self.grid,
            self.samples.len()
        )?;
        if self.curvature.is_empty() {
            writeln!(f, "curvature: none (one base coordinate)")?;
        }
        for ((i, j), e) in self.curvature.entries() {
            writeln!(f, "F[{}, {}] = {e}", chart.name(i + 1), chart.name(j + 1))?;
        }
        writeln!(f, "xi ^ dxi = {}", self.defect_form)?;
        writeln!(f, "max |F| = {:?}", self.max_curvature)?;
        writeln!(f, "max |xi ^ dxi| = {:?}", self.max_defect)?;
        writeln!(f, "tolerance = {:?}", self.tolerance)?;
        write!(f, "verdict: {}", self.verdict)
    }
}
