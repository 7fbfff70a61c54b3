//! Runnable experiments: Jauch's conservation test, agreement of the
//! integrability criteria, and the geometric phase on a circular base.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bundle::WorkSystem;
use crate::connection::{flatness, FlatnessReport};
use crate::entropy::{reconstruct, ResidualSummary};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Chart, Region};
use crate::lift::{lift_from, square_loop, work_integral, BaseCurve, LiftOptions};

/// Pass thresholds shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Grid-max of `|F_ij|` and `|ξ∧dξ|`.
    pub flatness: f64,
    /// Grid-max of `|ξ - T dS|`.
    pub residual: f64,
    /// Largest accepted `|ΔU|` around a closed loop.
    pub holonomy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            flatness: 1e-9,
            residual: 1e-6,
            holonomy: 1e-7,
        }
    }
}

/// Square sides of the default family, before shrinking to fit the region.
pub const SQUARE_SIDES: [f64; 3] = [0.1, 0.2, 0.4];
pub const SQUARE_CENTERS: usize = 5;
pub const RANDOM_POLYGONS: usize = 10;
pub const POLYGON_VERTICES: usize = 6;

/// A named set of closed base loops.
#[derive(Debug, Clone)]
pub struct LoopFamily {
    pub description: String,
    pub loops: Vec<BaseCurve>,
}

impl LoopFamily {
    pub fn new(description: &str, loops: Vec<BaseCurve>) -> Self {
        LoopFamily {
            description: description.to_string(),
            loops,
        }
    }

    /// Axis-aligned squares of sides 0.1, 0.2 and 0.4 at five random centres,
    /// plus ten random closed hexagons, all inside `region`. Squares cycle
    /// through the coordinate planes. With one base coordinate the loops are
    /// out-and-back segments.
    pub fn default_for(region: &Region, seed: u64) -> Result<Self> {
        let chart = region.chart();
        let m = chart.base_dim();
        let bounds = region.base_bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let narrowest = bounds
            .iter()
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        if narrowest <= 0.0 {
            return Err(Error::InvalidRegion(
                "loop families need a base region with positive width".into(),
            ));
        }
        let largest = SQUARE_SIDES[SQUARE_SIDES.len() - 1];
        let shrink = (narrowest / (1.25 * largest)).min(1.0);
        let half = 0.5 * largest * shrink;

        let planes: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect();
        let mut loops = Vec::new();
        for k in 0..SQUARE_CENTERS {
            let center: Vec<f64> = bounds
                .iter()
                .map(|&(a, b)| rng.random_range(a + half..=b - half))
                .collect();
            for side in SQUARE_SIDES {
                let side = side * shrink;
                let corner: Vec<f64> = center.iter().map(|c| c - 0.5 * side).collect();
                if let Some(&(i, j)) = planes.get(k % planes.len().max(1)) {
                    loops.push(square_loop(chart, &corner, i, j, side)?);
                } else {
                    let mut far = corner.clone();
                    far[0] += side;
                    loops.push(BaseCurve::polyline(
                        chart,
                        vec![corner.clone(), far, corner],
                    )?);
                }
            }
        }
        for _ in 0..RANDOM_POLYGONS {
            let count = if m == 1 { 2 } else { POLYGON_VERTICES };
            let mut vertices: Vec<Vec<f64>> = (0..count)
                .map(|_| {
                    bounds
                        .iter()
                        .map(|&(a, b)| rng.random_range(a..=b))
                        .collect()
                })
                .collect();
            vertices.push(vertices[0].clone());
            loops.push(BaseCurve::polyline(chart, vertices)?);
        }
        let description = format!(
            "{} squares (sides {:?}) and {} random {}-gons, seed {}",
            SQUARE_CENTERS * SQUARE_SIDES.len(),
            SQUARE_SIDES.map(|s| s * shrink),
            RANDOM_POLYGONS,
            if m == 1 { 2 } else { POLYGON_VERTICES },
            seed
        );
        Ok(LoopFamily { description, loops })
    }

    /// One full turn around the periodic coordinate, other coordinates fixed
    /// at the region centre.
    pub fn circle(region: &Region) -> Result<Self> {
        let (index, curve) = revolution(region)?;
        let name = region.chart().name(index).to_string();
        Ok(LoopFamily::new(
            &format!("one revolution in {name}"),
            vec![curve],
        ))
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }
}

/// The single periodic base coordinate (chart index) and a one-turn curve.
fn revolution(region: &Region) -> Result<(usize, BaseCurve)> {
    let chart = region.chart();
    let periodic: Vec<usize> = (1..chart.dim())
        .filter(|&i| chart.period(i).is_some())
        .collect();
    let [index] = periodic[..] else {
        return Err(Error::Unsupported {
            needed: "exactly one periodic base coordinate",
            reason: format!("found {}", periodic.len()),
        });
    };
    let period = chart.period(index).expect("periodic");
    let center = region.center();
    let coords = (1..chart.dim())
        .map(|i| {
            let c = Expression::constant(center.values()[i]);
            if i == index {
                c.add(&Expression::constant(period).mul(&Expression::var("t")))
            } else {
                c
            }
        })
        .collect();
    Ok((index, BaseCurve::parametric(chart, "t", coords, 0.0, 1.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Holds,
    Violated,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::Holds => "holds",
            Hypothesis::Violated => "violated",
        })
    }
}

/// Outcome for one loop of a Jauch test.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub closure_gap: f64,
    pub delta_u: f64,
    /// `∫ ω` along the lift, by quadrature over the lifted nodes.
    pub work: f64,
    pub error_estimate: f64,
    /// `|∫ω + ΔU| ≤ 2 × error estimate`.
    pub identity_holds: bool,
    pub verdict: Hypothesis,
}

#[derive(Debug, Clone)]
pub struct JauchReport {
    pub system: String,
    pub family: String,
    pub u0: f64,
    pub tolerance: f64,
    pub loops: Vec<LoopOutcome>,
    pub verdict: Hypothesis,
}

impl JauchReport {
    pub fn holds(&self) -> bool {
        self.verdict == Hypothesis::Holds
    }

    /// Largest `|ΔU|` over the family, the closed-lift (holonomy) criterion.
    pub fn max_delta_u(&self) -> f64 {
        self.loops
            .iter()
            .map(|l| l.delta_u.abs())
            .fold(0.0, f64::max)
    }

    pub fn identity_holds(&self) -> bool {
        self.loops.iter().all(|l| l.identity_holds)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "loop,closure_gap,delta_u,work,error_estimate,identity,verdict"
        )?;
        for (k, l) in self.loops.iter().enumerate() {
            writeln!(
                out,
                "{k},{:?},{:?},{:?},{:?},{},{}",
                l.closure_gap, l.delta_u, l.work, l.error_estimate, l.identity_holds, l.verdict
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for JauchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system: {}", self.system)?;
        writeln!(f, "loops: {} ({})", self.loops.len(), self.family)?;
        writeln!(f, "max |dU| = {:?}", self.max_delta_u())?;
        let max_work = self.loops.iter().map(|l| l.work.abs()).fold(0.0, f64::max);
        writeln!(f, "max |work| = {max_work:?}")?;
        writeln!(
            f,
            "work identity: {}",
            if self.identity_holds() {
                "ok"
            } else {
                "broken"
            }
        )?;
        write!(
            f,
            "hypothesis: {} (tolerance {:e})",
            self.verdict, self.tolerance
        )
    }
}

/// Lift every loop from energy `u0` and test whether closed adiabats do no
/// net work: the hypothesis holds when every `|∫ω| ≤ tolerance`.
pub fn jauch_test(
    system: &WorkSystem,
    family: &LoopFamily,
    u0: f64,
    tolerance: f64,
) -> Result<JauchReport> {
    for curve in &family.loops {
        let gap = curve.closure_gap()?;
        if gap > crate::lift::CLOSURE_TOLERANCE {
            return Err(Error::NotClosed { gap });
        }
    }
    let results: Vec<Result<LoopOutcome>> = family
        .loops
        .par_iter()
        .map(|curve| {
            let lifted = lift_from(system, curve, u0, &LiftOptions::default())?;
            let work = work_integral(system, &lifted)?;
            Ok(LoopOutcome {
                closure_gap: curve.closure_gap()?,
                delta_u: lifted.delta_u,
                work,
                error_estimate: lifted.error_estimate,
                identity_holds: (work + lifted.delta_u).abs() <= 2.0 * lifted.error_estimate,
                verdict: if work.abs() <= tolerance {
                    Hypothesis::Holds
                } else {
                    Hypothesis::Violated
                },
            })
        })
        .collect();
    let loops = results.into_iter().collect::<Result<Vec<_>>>()?;
    let verdict = if loops.iter().all(|l| l.verdict == Hypothesis::Holds) {
        Hypothesis::Holds
    } else {
        Hypothesis::Violated
    };
    Ok(JauchReport {
        system: system.name().to_string(),
        family: family.description.clone(),
        u0,
        tolerance,
        loops,
        verdict,
    })
}

/// Whether every loop's lift returns to its starting energy: `|ΔU| ≤ tolerance`.
pub fn holonomy_closure(
    system: &WorkSystem,
    family: &LoopFamily,
    u0: f64,
    tolerance: f64,
) -> Result<(bool, f64)> {
    let results: Vec<Result<f64>> = family
        .loops
        .par_iter()
        .map(|curve| {
            let gap = curve.closure_gap()?;
            if gap > crate::lift::CLOSURE_TOLERANCE {
                return Err(Error::NotClosed { gap });
            }
            let lifted = lift_from(system, curve, u0, &LiftOptions::default())?;
            Ok((lifted.end_energy() - lifted.start_energy()).abs())
        })
        .collect();
    let worst = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= tolerance, worst))
}

/// The three computable integrability criteria side by side.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub system: String,
    pub residual: ResidualSummary,
    pub flatness: FlatnessReport,
    pub max_holonomy: f64,
    /// Entropy residual below tolerance with no path dependence.
    pub residual_pass: bool,
    /// Curvature and Frobenius defect below tolerance on the grid.
    pub flatness_pass: bool,
    /// Every lifted loop of the family closes.
    pub closure_pass: bool,
}

impl EquivalenceReport {
    pub fn verdicts(&self) -> [bool; 3] {
        [self.residual_pass, self.flatness_pass, self.closure_pass]
    }

    pub fn agree(&self) -> bool {
        let v = self.verdicts();
        v.iter().all(|&x| x == v[0])
    }

    /// `agreement[a][b]` is true when criteria `a` and `b` give the same verdict.
    pub fn agreement_matrix(&self) -> [[bool; 3]; 3] {
        let v = self.verdicts();
        let mut m = [[false; 3]; 3];
        for (a, row) in m.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = v[a] == v[b];
            }
        }
        m
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = |b: bool| if b { "pass" } else { "fail" };
        writeln!(f, "system: {}", self.system)?;
        writeln!(
            f,
            "entropy residual: {} (max {:e}, path gap {:e})",
            word(self.residual_pass),
            self.residual.max_residual,
            self.residual.max_path_gap
        )?;
        writeln!(
            f,
            "flatness: {} (max |F| = {:?}, max defect = {:?})",
            word(self.flatness_pass),
            self.flatness.max_curvature,
            self.flatness.max_defect
        )?;
        writeln!(
            f,
            "holonomy closure: {} (max |dU| = {:e})",
            word(self.closure_pass),
            self.max_holonomy
        )?;
        write!(f, "agreement: {}", if self.agree() { "yes" } else { "no" })
    }
}

/// Entropy residual, flatness and loop closure for one system. Loops start
/// at the energy of the region centre; the entropy reference is the base
/// centre.
pub fn equivalence_test(
    system: &WorkSystem,
    region: &Region,
    grid: usize,
    family: &LoopFamily,
    tolerances: &Tolerances,
) -> Result<EquivalenceReport> {
    let center = region.center();
    let reference = &center.values()[1..];
    let residual = reconstruct(system, reference, region, grid)?
        .with_tolerance(tolerances.residual)
        .summary();
    let flat = flatness(system, region, grid, tolerances.flatness)?;
    let (closure_pass, max_holonomy) =
        holonomy_closure(system, family, center.values()[0], tolerances.holonomy)?;
    Ok(EquivalenceReport {
        system: system.name().to_string(),
        residual_pass: residual.passed,
        flatness_pass: flat.is_flat(),
        closure_pass,
        max_holonomy,
        residual,
        flatness: flat,
    })
}

/// Energy accumulated over successive turns of the periodic coordinate.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub system: String,
    pub coordinate: String,
    pub u0: f64,
    /// `ΔU` of each single revolution.
    pub per_revolution: Vec<f64>,
    /// Running total after each revolution.
    pub cumulative: Vec<f64>,
    pub error_estimate: f64,
    pub locally_flat: bool,
    pub max_curvature: f64,
    /// `|ΔU|` of one revolution within tolerance.
    pub closes: bool,
    pub tolerance: f64,
}

impl PhaseReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "revolution,delta_u,cumulative")?;
        for (k, (d, c)) in self.per_revolution.iter().zip(&self.cumulative).enumerate() {
            writeln!(out, "{},{d:?},{c:?}", k + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for PhaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system: {}", self.system)?;
        writeln!(f, "periodic coordinate: {}", self.coordinate)?;
        for (k, c) in self.cumulative.iter().enumerate() {
            writeln!(f, "after {} revolution(s): dU = {c:?}", k + 1)?;
        }
        writeln!(
            f,
            "local flatness: {} (max |F| = {:?})",
            if self.locally_flat { "flat" } else { "curved" },
            self.max_curvature
        )?;
        write!(
            f,
            "global closure: {} (tolerance {:e})",
            if self.closes { "closes" } else { "fails" },
            self.tolerance
        )
    }
}

/// Lift `revolutions` full turns of the single periodic base coordinate,
/// chaining each turn from the previous end energy.
pub fn phase_demo(
    system: &WorkSystem,
    region: &Region,
    revolutions: usize,
    u0: f64,
    grid: usize,
    tolerances: &Tolerances,
) -> Result<PhaseReport> {
    if region.chart() != system.chart() {
        return Err(Error::ChartMismatch);
    }
    let (index, curve) = revolution(region)?;
    let flat = flatness(system, region, grid, tolerances.flatness)?;
    let mut per_revolution = Vec::with_capacity(revolutions);
    let mut cumulative = Vec::with_capacity(revolutions);
    let mut u = u0;
    let mut error_estimate = 0.0;
    for _ in 0..revolutions {
        let lifted = lift_from(system, &curve, u, &LiftOptions::default())?;
        per_revolution.push(lifted.delta_u);
        u = lifted.end_energy();
        cumulative.push(u - u0);
        error_estimate += lifted.error_estimate;
    }
    let first = match per_revolution.first() {
        Some(&d) => d,
        None => lift_from(system, &curve, u0, &LiftOptions::default())?.delta_u,
    };
    Ok(PhaseReport {
        system: system.name().to_string(),
        coordinate: chart_name(region.chart(), index),
        u0,
        per_revolution,
        cumulative,
        error_estimate,
        locally_flat: flat.is_flat(),
        max_curvature: flat.max_curvature,
        closes: first.abs() <= tolerances.holonomy,
        tolerance: tolerances.holonomy,
    })
}

fn chart_name(chart: &Chart, index: usize) -> String {
    chart.name(index).to_string()
}
