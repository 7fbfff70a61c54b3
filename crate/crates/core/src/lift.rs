//! Horizontal (adiabatic) lifts of base curves.
//!
//! Along a base curve `V(t)` the lift solves `dU/dt = Σ P_i(U, V) V_i'(t)`,
//! which keeps the tangent in `ker ξ`. Each smooth piece is integrated with
//! classical RK4; the step count is doubled until two successive answers
//! agree to the requested tolerance per unit parameter, and the finer answer
//! is kept.

use std::io::{self, Write};

use crate::bundle::WorkSystem;
use crate::error::{Error, Result};
use crate::expr::{Compiled, Expression, Point};
use crate::geometry::Chart;

/// Closure tolerance for base loops, after reduction modulo periods.
pub const CLOSURE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum CurveKind {
    Parametric {
        param: String,
        coords: Vec<Expression>,
        velocity: Vec<Expression>,
        t0: f64,
        t1: f64,
    },
    Polyline {
        vertices: Vec<Vec<f64>>,
        knots: Vec<f64>,
    },
}

/// A piecewise-smooth curve in the base.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseCurve {
    chart: Chart,
    kind: CurveKind,
}

impl BaseCurve {
    /// `V_i = coords[i](param)` for `param ∈ [t0, t1]`.
    pub fn parametric(
        chart: &Chart,
        param: &str,
        coords: Vec<Expression>,
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        if coords.len() != chart.base_dim() {
            return Err(Error::Curve(format!(
                "{} coordinate expressions for {} base coordinates",
                coords.len(),
                chart.base_dim()
            )));
        }
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::Curve(format!("bad parameter range [{t0}, {t1}]")));
        }
        for c in &coords {
            if let Some(v) = c.variables().into_iter().find(|v| v != param) {
                return Err(Error::Curve(format!(
                    "curve expression `{c}` depends on `{v}`, expected only `{param}`"
                )));
            }
        }
        let velocity: Vec<Expression> = coords.iter().map(|c| c.differentiate(param)).collect();
        // evaluable on the whole interval (checked on a fine sample)
        for k in 0..=64 {
            let t = t0 + (t1 - t0) * k as f64 / 64.0;
            for e in coords.iter().chain(&velocity) {
                e.evaluate(&[(param, t)])
                    .map_err(|err| Error::Curve(format!("`{e}` fails at {param} = {t}: {err}")))?;
            }
        }
        Ok(BaseCurve {
            chart: chart.clone(),
            kind: CurveKind::Parametric {
                param: param.to_string(),
                coords,
                velocity,
                t0,
                t1,
            },
        })
    }

    /// Straight segments through `vertices`, segment `k` spanning `t ∈ [k, k+1]`.
    pub fn polyline(chart: &Chart, vertices: Vec<Vec<f64>>) -> Result<Self> {
        let knots = (0..vertices.len()).map(|k| k as f64).collect();
        BaseCurve::polyline_with_knots(chart, vertices, knots)
    }

    /// Straight segments with explicit, strictly increasing parameter knots.
    pub fn polyline_with_knots(
        chart: &Chart,
        vertices: Vec<Vec<f64>>,
        knots: Vec<f64>,
    ) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Curve(
                "a polyline needs at least two vertices".into(),
            ));
        }
        if knots.len() != vertices.len() {
            return Err(Error::Curve("one knot per vertex is required".into()));
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != chart.base_dim()) {
            return Err(Error::Curve(format!(
                "vertex {v:?} does not have {} base coordinates",
                chart.base_dim()
            )));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Curve("non-finite vertex coordinate".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Curve(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        Ok(BaseCurve {
            chart: chart.clone(),
            kind: CurveKind::Polyline { vertices, knots },
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn segment_count(&self) -> usize {
        match &self.kind {
            CurveKind::Parametric { .. } => 1,
            CurveKind::Polyline { vertices, .. } => vertices.len() - 1,
        }
    }

    pub fn segment_interval(&self, k: usize) -> (f64, f64) {
        match &self.kind {
            CurveKind::Parametric { t0, t1, .. } => (*t0, *t1),
            CurveKind::Polyline { knots, .. } => (knots[k], knots[k + 1]),
        }
    }

    pub fn parameter_range(&self) -> (f64, f64) {
        let n = self.segment_count();
        (self.segment_interval(0).0, self.segment_interval(n - 1).1)
    }

    /// Base position on segment `k` at parameter `t`.
    pub fn position(&self, k: usize, t: f64) -> Result<Vec<f64>> {
        match &self.kind {
            CurveKind::Parametric { param, coords, .. } => eval_all(coords, param, t),
            CurveKind::Polyline { vertices, knots } => {
                let s = (t - knots[k]) / (knots[k + 1] - knots[k]);
                Ok(vertices[k]
                    .iter()
                    .zip(&vertices[k + 1])
                    .map(|(a, b)| a + s * (b - a))
                    .collect())
            }
        }
    }

    /// Base velocity on segment `k` at parameter `t`.
    pub fn velocity(&self, k: usize, t: f64) -> Result<Vec<f64>> {
        match &self.kind {
            CurveKind::Parametric {
                param, velocity, ..
            } => eval_all(velocity, param, t),
            CurveKind::Polyline { vertices, knots } => {
                let dt = knots[k + 1] - knots[k];
                Ok(vertices[k]
                    .iter()
                    .zip(&vertices[k + 1])
                    .map(|(a, b)| (b - a) / dt)
                    .collect())
            }
        }
    }

    pub fn start(&self) -> Result<Vec<f64>> {
        self.position(0, self.parameter_range().0)
    }

    pub fn end(&self) -> Result<Vec<f64>> {
        let n = self.segment_count();
        self.position(n - 1, self.parameter_range().1)
    }

    /// Largest per-coordinate distance between the endpoints, modulo periods.
    pub fn closure_gap(&self) -> Result<f64> {
        let (a, b) = (self.start()?, self.end()?);
        Ok(a.iter()
            .zip(&b)
            .enumerate()
            .map(|(i, (x, y))| self.chart.coordinate_gap(i + 1, *x, *y))
            .fold(0.0, f64::max))
    }

    pub fn is_closed(&self) -> Result<bool> {
        Ok(self.closure_gap()? <= CLOSURE_TOLERANCE)
    }

    /// The same path traversed backwards over the same parameter range.
    pub fn reversed(&self) -> BaseCurve {
        let kind = match &self.kind {
            CurveKind::Parametric {
                param,
                coords,
                t0,
                t1,
                ..
            } => {
                let flipped = Expression::constant(t0 + t1).sub(&Expression::var(param));
                let coords: Vec<Expression> = coords
                    .iter()
                    .map(|c| c.substitute(param, &flipped))
                    .collect();
                let velocity = coords.iter().map(|c| c.differentiate(param)).collect();
                CurveKind::Parametric {
                    param: param.clone(),
                    coords,
                    velocity,
                    t0: *t0,
                    t1: *t1,
                }
            }
            CurveKind::Polyline { vertices, knots } => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                CurveKind::Polyline {
                    vertices: vertices.iter().rev().cloned().collect(),
                    knots: knots.iter().rev().map(|k| first + last - k).collect(),
                }
            }
        };
        BaseCurve {
            chart: self.chart.clone(),
            kind,
        }
    }

    /// Vertices of a polyline (`None` for parametric curves).
    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        match &self.kind {
            CurveKind::Polyline { vertices, .. } => Some(vertices),
            CurveKind::Parametric { .. } => None,
        }
    }

    /// Join two polylines whose endpoints meet; knots restart from segment index.
    pub fn concat(&self, other: &BaseCurve) -> Result<BaseCurve> {
        let (Some(a), Some(b)) = (self.vertices(), other.vertices()) else {
            return Err(Error::Curve("only polylines can be concatenated".into()));
        };
        let gap = a[a.len() - 1]
            .iter()
            .zip(&b[0])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if gap > CLOSURE_TOLERANCE {
            return Err(Error::Curve(format!("polylines do not meet (gap {gap:e})")));
        }
        let vertices = a.iter().chain(&b[1..]).cloned().collect();
        BaseCurve::polyline(&self.chart, vertices)
    }
}

fn eval_all(exprs: &[Expression], param: &str, t: f64) -> Result<Vec<f64>> {
    exprs
        .iter()
        .map(|e| {
            e.evaluate(&[(param, t)]).map_err(|err| Error::Integration {
                t,
                source: Box::new(Error::Curve(format!("`{e}`: {err}"))),
            })
        })
        .collect()
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    /// Accepted difference between step `h` and `h/2` per unit parameter.
    pub tolerance: f64,
    pub initial_steps: usize,
    pub max_halvings: usize,
    /// Skip refinement and use exactly this many RK4 steps per segment.
    pub fixed_steps: Option<usize>,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions {
            tolerance: 1e-10,
            initial_steps: 8,
            max_halvings: 20,
            fixed_steps: None,
        }
    }
}

/// One recorded node of a lifted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftSample {
    pub t: f64,
    /// Full chart coordinates, energy first.
    pub point: Vec<f64>,
    /// Cumulative `∫ ω` from the start.
    pub work: f64,
    /// Cumulative `∫ ξ` from the start.
    pub heat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftResult {
    pub curve: BaseCurve,
    pub samples: Vec<LiftSample>,
    /// Inclusive sample index range of each segment (neighbours share a node).
    pub segments: Vec<(usize, usize)>,
    /// RK4 steps used per segment in the returned solution.
    pub steps: Vec<usize>,
    pub delta_u: f64,
    pub work_integral: f64,
    pub heat_integral: f64,
    /// Step-doubling difference summed over segments, plus a rounding floor.
    pub error_estimate: f64,
}

impl LiftResult {
    pub fn start_energy(&self) -> f64 {
        self.samples[0].point[0]
    }

    pub fn end_energy(&self) -> f64 {
        self.samples[self.samples.len() - 1].point[0]
    }

    pub fn end_point(&self) -> Point {
        self.curve
            .chart()
            .point(self.samples[self.samples.len() - 1].point.clone())
    }

    /// Columns: `t`, base coordinates, energy, cumulative work, cumulative heat.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let chart = self.curve.chart();
        let mut header = vec!["t".to_string()];
        header.extend(chart.base_names().iter().cloned());
        header.push(chart.energy_name().to_string());
        header.push("work".into());
        header.push("heat".into());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![format!("{:?}", s.t)];
            row.extend(s.point[1..].iter().map(|v| format!("{v:?}")));
            row.push(format!("{:?}", s.point[0]));
            row.push(format!("{:?}", s.work));
            row.push(format!("{:?}", s.heat));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct Rate {
    chart: Chart,
    coefficients: Vec<Compiled>,
    values: Vec<f64>,
    stack: Vec<f64>,
}

impl Rate {
    fn new(system: &WorkSystem) -> Result<Rate> {
        let chart = system.chart().clone();
        let coefficients = system
            .coefficients()
            .iter()
            .map(|p| p.compile(chart.names()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::eval(&chart.point(vec![0.0; chart.dim()]), e))?;
        Ok(Rate {
            values: vec![0.0; chart.dim()],
            chart,
            coefficients,
            stack: Vec::new(),
        })
    }

    /// `Σ P_i(U, V) V_i'`.
    fn eval(&mut self, t: f64, u: f64, base: &[f64], velocity: &[f64]) -> Result<f64> {
        self.values[0] = u;
        self.values[1..].copy_from_slice(base);
        let mut sum = 0.0;
        for (p, &dv) in self.coefficients.iter().zip(velocity) {
            if dv == 0.0 {
                continue;
            }
            let pv = p
                .evaluate_with(&self.values, &mut self.stack)
                .map_err(|e| {
                    let point = self.chart.point(self.values.clone());
                    Error::Integration {
                        t,
                        source: Box::new(Error::eval(&point, e)),
                    }
                })?;
            sum += pv * dv;
        }
        Ok(sum)
    }
}

struct SegmentRun {
    u_end: f64,
    /// Σ |ΔU| over steps, for the rounding floor.
    variation: f64,
    samples: Vec<LiftSample>,
}

#[allow(clippy::too_many_arguments)]
fn rk4_segment(
    rate: &mut Rate,
    curve: &BaseCurve,
    k: usize,
    u0: f64,
    steps: usize,
    work0: f64,
    heat0: f64,
    record: bool,
) -> Result<SegmentRun> {
    let (a, b) = curve.segment_interval(k);
    let h = (b - a) / steps as f64;
    let mut u = u0;
    let (mut work, mut heat) = (work0, heat0);
    let mut variation = 0.0;
    let mut samples = Vec::with_capacity(if record { steps + 1 } else { 0 });
    let sample = |t: f64, u: f64, base: Vec<f64>, work: f64, heat: f64| {
        let mut point = Vec::with_capacity(base.len() + 1);
        point.push(u);
        point.extend(base);
        LiftSample {
            t,
            point,
            work,
            heat,
        }
    };
    if record {
        samples.push(sample(a, u, curve.position(k, a)?, work, heat));
    }
    for n in 0..steps {
        let t = a + n as f64 * h;
        let tm = t + 0.5 * h;
        let te = if n + 1 == steps { b } else { t + h };
        let (x0, xm, x1) = (
            curve.position(k, t)?,
            curve.position(k, tm)?,
            curve.position(k, te)?,
        );
        let (v0, vm, v1) = (
            curve.velocity(k, t)?,
            curve.velocity(k, tm)?,
            curve.velocity(k, te)?,
        );
        let k1 = rate.eval(t, u, &x0, &v0)?;
        let k2 = rate.eval(tm, u + 0.5 * h * k1, &xm, &vm)?;
        let k3 = rate.eval(tm, u + 0.5 * h * k2, &xm, &vm)?;
        let k4 = rate.eval(te, u + h * k3, &x1, &v1)?;
        let du = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        // ω(γ') = -Σ P_i V_i' at each stage, same weights
        let dw = -(h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u += du;
        work += dw;
        heat += du + dw;
        variation += du.abs();
        if record {
            samples.push(sample(te, u, x1, work, heat));
        }
    }
    Ok(SegmentRun {
        u_end: u,
        variation,
        samples,
    })
}

/// Lift `curve` starting from energy `u0` over its first point.
pub fn lift_from(
    system: &WorkSystem,
    curve: &BaseCurve,
    u0: f64,
    options: &LiftOptions,
) -> Result<LiftResult> {
    if curve.chart() != system.chart() {
        return Err(Error::ChartMismatch);
    }
    let mut rate = Rate::new(system)?;
    let mut samples: Vec<LiftSample> = Vec::new();
    let mut segments = Vec::new();
    let mut steps_used = Vec::new();
    let mut error_estimate = 0.0;
    let (mut u, mut work, mut heat) = (u0, 0.0, 0.0);
    for k in 0..curve.segment_count() {
        let (a, b) = curve.segment_interval(k);
        let (run, steps, diff) = match options.fixed_steps {
            Some(n) => {
                let n = n.max(2);
                let fine = rk4_segment(&mut rate, curve, k, u, n, work, heat, true)?;
                let coarse = rk4_segment(&mut rate, curve, k, u, n / 2, work, heat, true)?;
                let diff = (fine.u_end - coarse.u_end).abs();
                (fine, n, diff)
            }
            None => {
                let mut n = options.initial_steps.max(1);
                let mut coarse = rk4_segment(&mut rate, curve, k, u, n, work, heat, true)?;
                let mut accepted = None;
                let mut last_diff = f64::INFINITY;
                for _ in 0..options.max_halvings {
                    let fine = rk4_segment(&mut rate, curve, k, u, 2 * n, work, heat, true)?;
                    let diff = (fine.u_end - coarse.u_end).abs();
                    last_diff = diff;
                    n *= 2;
                    if diff <= options.tolerance * (b - a) {
                        accepted = Some((fine, n, diff));
                        break;
                    }
                    coarse = fine;
                }
                accepted.ok_or(Error::NoConvergence {
                    halvings: options.max_halvings,
                    difference: last_diff,
                })?
            }
        };
        let floor = 16.0 * f64::EPSILON * (u.abs() + run.u_end.abs() + run.variation);
        error_estimate += diff + floor;
        let first = if samples.is_empty() {
            0
        } else {
            samples.len() - 1
        };
        let mut new_samples = run.samples.into_iter();
        if !samples.is_empty() {
            new_samples.next();
        }
        samples.extend(new_samples);
        segments.push((first, samples.len() - 1));
        steps_used.push(steps);
        u = run.u_end;
        let last = &samples[samples.len() - 1];
        work = last.work;
        heat = last.heat;
    }
    Ok(LiftResult {
        curve: curve.clone(),
        delta_u: u - u0,
        work_integral: work,
        heat_integral: heat,
        error_estimate,
        samples,
        segments,
        steps: steps_used,
    })
}

/// End energy of a fixed-step lift, without samples or an error estimate.
pub(crate) fn transport_energy(
    system: &WorkSystem,
    curve: &BaseCurve,
    u0: f64,
    steps: usize,
) -> Result<f64> {
    let mut rate = Rate::new(system)?;
    let mut u = u0;
    for k in 0..curve.segment_count() {
        u = rk4_segment(&mut rate, curve, k, u, steps, 0.0, 0.0, false)?.u_end;
    }
    Ok(u)
}

/// Horizontal lift of `curve` through `start`, whose base coordinates must
/// match the curve's first point.
pub fn lift_curve(system: &WorkSystem, curve: &BaseCurve, start: &Point) -> Result<LiftResult> {
    let base = curve.start()?;
    let chart = system.chart();
    if start.values().len() != chart.dim() {
        return Err(Error::Curve(
            "start point has the wrong number of coordinates".into(),
        ));
    }
    let gap = base
        .iter()
        .zip(&start.values()[1..])
        .enumerate()
        .map(|(i, (a, b))| chart.coordinate_gap(i + 1, *a, *b))
        .fold(0.0, f64::max);
    if gap > CLOSURE_TOLERANCE {
        return Err(Error::Curve(format!(
            "start point {start} is not over the curve's first point {base:?}"
        )));
    }
    lift_from(system, curve, start.values()[0], &LiftOptions::default())
}

/// Lift a closed base loop from energy `u0` and return the result; its
/// `delta_u` is the holonomy displacement.
pub fn lift_loop(system: &WorkSystem, curve: &BaseCurve, u0: f64) -> Result<LiftResult> {
    let gap = curve.closure_gap()?;
    if gap > CLOSURE_TOLERANCE {
        return Err(Error::NotClosed { gap });
    }
    lift_from(system, curve, u0, &LiftOptions::default())
}

/// Fibre displacement `ΔU` after lifting a closed loop from `u0`.
pub fn loop_holonomy(system: &WorkSystem, curve: &BaseCurve, u0: f64) -> Result<f64> {
    Ok(lift_loop(system, curve, u0)?.delta_u)
}

/// Counter-clockwise axis-aligned square in the `(i, j)` base plane with
/// lower-left corner `corner` and side `side`.
pub fn square_loop(
    chart: &Chart,
    corner: &[f64],
    i: usize,
    j: usize,
    side: f64,
) -> Result<BaseCurve> {
    let mut v = vec![corner.to_vec(); 5];
    v[1][i] += side;
    v[2][i] += side;
    v[2][j] += side;
    v[3][j] += side;
    BaseCurve::polyline(chart, v)
}

/// Lift the rectangle `φ^Y_{-t} ∘ φ^X_{-t} ∘ φ^Y_t ∘ φ^X_t` built from the
/// coordinate flows of base directions `i` and `j` through `p`, and return
/// `ΔU / t²`, which tends to `F_ij(p)` as `t → 0`.
pub fn commutator_probe(system: &WorkSystem, p: &Point, i: usize, j: usize, t: f64) -> Result<f64> {
    let m = system.base_dim();
    if m < 2 {
        return Err(Error::Unsupported {
            needed: "two base coordinates",
            reason: format!("`{}` has {m}", system.name()),
        });
    }
    for idx in [i, j] {
        if idx >= m {
            return Err(Error::BaseIndex {
                index: idx,
                count: m,
            });
        }
    }
    if i == j {
        return Err(Error::Unsupported {
            needed: "two distinct directions",
            reason: format!("i = j = {i}"),
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Curve(format!(
            "probe size must be positive, got {t}"
        )));
    }
    let curve = square_loop(system.chart(), &p.values()[1..], i, j, t)?;
    let lifted = lift_from(system, &curve, p.values()[0], &LiftOptions::default())?;
    Ok(lifted.delta_u / (t * t))
}

/// `∫ ω` along a lifted curve, recomputed from the recorded nodes with
/// extrapolated Simpson per segment (independent of the RK4 bookkeeping).
pub fn work_integral(system: &WorkSystem, lifted: &LiftResult) -> Result<f64> {
    let chart = system.chart();
    let coefficients = system
        .coefficients()
        .iter()
        .map(|p| p.compile(chart.names()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::eval(&chart.point(vec![0.0; chart.dim()]), e))?;
    let mut stack = Vec::new();
    let mut total = 0.0;
    for (k, &(first, last)) in lifted.segments.iter().enumerate() {
        let nodes = &lifted.samples[first..=last];
        let integrand = nodes
            .iter()
            .map(|s| {
                let vel = lifted.curve.velocity(k, s.t)?;
                let mut w = 0.0;
                for (p, dv) in coefficients.iter().zip(&vel) {
                    if *dv != 0.0 {
                        let pv = p
                            .evaluate_with(&s.point, &mut stack)
                            .map_err(|e| Error::eval(&chart.point(s.point.clone()), e))?;
                        w -= pv * dv;
                    }
                }
                Ok(w)
            })
            .collect::<Result<Vec<f64>>>()?;
        total += simpson(nodes, &integrand);
    }
    Ok(total)
}

/// Composite Simpson on uniformly spaced nodes, with one Richardson step
/// against the half-resolution rule when the interval count allows it.
fn simpson(nodes: &[LiftSample], f: &[f64]) -> f64 {
    let n = f.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let h = (nodes[n].t - nodes[0].t) / n as f64;
    let fine = composite_simpson(f, h);
    if !n.is_multiple_of(4) {
        return fine;
    }
    let coarse: Vec<f64> = f.iter().step_by(2).copied().collect();
    let coarse = composite_simpson(&coarse, 2.0 * h);
    fine + (fine - coarse) / 15.0
}

/// Simpson pairs; a trapezoid closes a leftover odd interval.
fn composite_simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let mut sum = 0.0;
    for p in 0..n / 2 {
        let i = 2 * p;
        sum += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
    }
    if n % 2 == 1 {
        sum += 0.5 * h * (f[n - 1] + f[n]);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{contact3, flat3, wankel, zero_work};
    use crate::expr::parse;
    use std::f64::consts::TAU;

    fn circle(system: &WorkSystem, revolutions: f64) -> BaseCurve {
        BaseCurve::parametric(
            system.chart(),
            "t",
            vec![Expression::constant(TAU).mul(&Expression::var("t"))],
            0.0,
            revolutions,
        )
        .unwrap()
    }

    #[test]
    fn zero_work_keeps_energy_constant() {
        let s = zero_work(2).unwrap();
        let c = BaseCurve::polyline(
            s.chart(),
            vec![vec![0.0, 0.0], vec![1.0, -2.0], vec![3.0, 1.0]],
        )
        .unwrap();
        let r = lift_curve(&s, &c, &s.chart().point(vec![0.7, 0.0, 0.0])).unwrap();
        assert_eq!(r.delta_u, 0.0);
        assert_eq!(work_integral(&s, &r).unwrap(), 0.0);
        assert!(r.samples.iter().all(|x| x.point[0] == 0.7));
    }

    #[test]
    fn wankel_constant_torque_full_turn() {
        let s = wankel(Expression::one()).unwrap();
        let c = circle(&s, 1.0);
        assert!(c.is_closed().unwrap());
        let r = lift_curve(&s, &c, &s.chart().point(vec![0.0, 0.0])).unwrap();
        assert!((r.delta_u - TAU).abs() < 1e-9, "{}", r.delta_u);
        assert!((work_integral(&s, &r).unwrap() + TAU).abs() < 1e-9);
    }

    #[test]
    fn wankel_with_modulated_torque() {
        let s = wankel(parse("1 + 0.5*cos(theta)").unwrap()).unwrap();
        let du = loop_holonomy(&s, &circle(&s, 1.0), 0.0).unwrap();
        assert!((du - TAU).abs() < 1e-8, "{du}");
    }

    #[test]
    fn contact3_small_square() {
        let s = contact3();
        let c = square_loop(s.chart(), &[0.0, 0.0], 0, 1, 0.1).unwrap();
        let du = loop_holonomy(&s, &c, 0.0).unwrap();
        assert!((du.abs() - 0.01).abs() < 0.02 * 0.01, "{du}");
        let c = square_loop(s.chart(), &[0.0, 0.0], 0, 1, 0.5).unwrap();
        let du = loop_holonomy(&s, &c, 0.0).unwrap();
        assert!((du.abs() - 0.25).abs() < 0.02 * 0.25, "{du}");
    }

    /// Brute-force oracle: forward Euler at h = 1e-5 along the same square.
    #[test]
    fn contact3_square_agrees_with_fine_euler() {
        let s = contact3();
        let side: f64 = 0.1;
        let corners = [
            [0.0, 0.0],
            [side, 0.0],
            [side, side],
            [0.0, side],
            [0.0, 0.0],
        ];
        let h: f64 = 1e-5;
        let mut u: f64 = 0.0;
        for w in corners.windows(2) {
            let n = (side / h).round() as usize;
            for step in 0..n {
                let s_ = step as f64 / n as f64;
                let v2 = w[0][1] + s_ * (w[1][1] - w[0][1]);
                let dv1 = (w[1][0] - w[0][0]) / n as f64;
                u += -v2 * dv1;
            }
        }
        let c = square_loop(s.chart(), &[0.0, 0.0], 0, 1, side).unwrap();
        let du = loop_holonomy(&s, &c, 0.0).unwrap();
        assert!((du - u).abs() < 1e-6, "{du} vs {u}");
    }

    #[test]
    fn flat3_loops_close() {
        let s = flat3();
        let c = BaseCurve::polyline(
            s.chart(),
            vec![
                vec![0.1, 0.2],
                vec![0.9, -0.4],
                vec![-0.5, 0.7],
                vec![-0.8, -0.9],
                vec![0.1, 0.2],
            ],
        )
        .unwrap();
        assert!(loop_holonomy(&s, &c, 0.3).unwrap().abs() < 1e-8);
    }

    #[test]
    fn open_loop_is_rejected() {
        let s = contact3();
        let c = BaseCurve::polyline(s.chart(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            loop_holonomy(&s, &c, 0.0),
            Err(Error::NotClosed { .. })
        ));
    }

    #[test]
    fn start_point_must_lie_over_curve() {
        let s = contact3();
        let c = BaseCurve::polyline(s.chart(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(lift_curve(&s, &c, &s.chart().point(vec![0.0, 0.5, 0.0])).is_err());
    }

    #[test]
    fn probe_examples() {
        let s = contact3();
        let origin = s.chart().point(vec![0.0, 0.0, 0.0]);
        for t in [0.1, 0.05, 0.025] {
            let q = commutator_probe(&s, &origin, 0, 1, t).unwrap();
            assert!((q - 1.0).abs() < 1e-9, "{t}: {q}");
        }
        let f = flat3();
        let p = f.chart().point(vec![0.2, -0.3, 0.6]);
        assert!(commutator_probe(&f, &p, 0, 1, 0.05).unwrap().abs() < 1e-6);

        let w = wankel(Expression::one()).unwrap();
        assert!(matches!(
            commutator_probe(&w, &w.chart().point(vec![0.0, 0.0]), 0, 1, 0.1),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn definitional_identity_and_adiabaticity() {
        let s = crate::bundle::random_curved(3).system;
        let c = BaseCurve::polyline(
            s.chart(),
            vec![vec![-0.5, 0.2], vec![0.4, 0.9], vec![0.8, -0.6]],
        )
        .unwrap();
        let r = lift_from(&s, &c, 1.0, &LiftOptions::default()).unwrap();
        assert!((r.heat_integral - (r.delta_u + r.work_integral)).abs() <= 1e-12);
        assert!(r.heat_integral.abs() <= r.error_estimate);
        let w = work_integral(&s, &r).unwrap();
        assert!(
            (w + r.delta_u).abs() <= 2.0 * r.error_estimate,
            "{w} {}",
            r.delta_u
        );
    }

    #[test]
    fn reversal_returns_to_start() {
        let s = crate::bundle::random_curved(5).system;
        let c = BaseCurve::parametric(
            s.chart(),
            "t",
            vec![parse("0.8*cos(t)").unwrap(), parse("0.5*sin(2*t)").unwrap()],
            0.0,
            2.0,
        )
        .unwrap();
        let fwd = lift_from(&s, &c, 0.9, &LiftOptions::default()).unwrap();
        let back = lift_from(&s, &c.reversed(), fwd.end_energy(), &LiftOptions::default()).unwrap();
        assert!(
            (back.delta_u + fwd.delta_u).abs() <= 2.0 * (fwd.error_estimate + back.error_estimate)
        );
    }

    #[test]
    fn concatenation_adds() {
        let s = contact3();
        let a = BaseCurve::polyline(s.chart(), vec![vec![0.0, 0.0], vec![0.5, 0.3]]).unwrap();
        let b = BaseCurve::polyline(s.chart(), vec![vec![0.5, 0.3], vec![-0.2, 0.8]]).unwrap();
        let ab = a.concat(&b).unwrap();
        let ra = lift_from(&s, &a, 0.0, &LiftOptions::default()).unwrap();
        let rb = lift_from(&s, &b, ra.end_energy(), &LiftOptions::default()).unwrap();
        let rab = lift_from(&s, &ab, 0.0, &LiftOptions::default()).unwrap();
        let tol = ra.error_estimate + rb.error_estimate + rab.error_estimate;
        assert!((rab.delta_u - ra.delta_u - rb.delta_u).abs() <= tol);
    }

    #[test]
    fn csv_layout() {
        let s = contact3();
        let c = BaseCurve::polyline(s.chart(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let r = lift_from(
            &s,
            &c,
            0.0,
            &LiftOptions {
                fixed_steps: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,V1,V2,U,work,heat\n0.0,0.0,0.0,0.0,0.0,0.0\n0.5,0.5,0.0,0.0,0.0,0.0\n1.0,1.0,0.0,0.0,0.0,0.0\n"
        );
    }

    #[test]
    fn curve_validation() {
        let s = contact3();
        assert!(BaseCurve::polyline(s.chart(), vec![vec![0.0, 0.0]]).is_err());
        assert!(BaseCurve::polyline(s.chart(), vec![vec![0.0], vec![1.0]]).is_err());
        assert!(BaseCurve::parametric(
            s.chart(),
            "t",
            vec![parse("x").unwrap(), parse("t").unwrap()],
            0.0,
            1.0
        )
        .is_err());
        assert!(BaseCurve::parametric(
            s.chart(),
            "t",
            vec![parse("log(t)").unwrap(), parse("t").unwrap()],
            0.0,
            1.0
        )
        .is_err());
        assert!(BaseCurve::parametric(
            s.chart(),
            "t",
            vec![parse("t").unwrap(), parse("t").unwrap()],
            1.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn domain_error_reports_parameter() {
        let chart = Chart::new("U", &["V"]).unwrap();
        let s = WorkSystem::from_texts("sing", &chart, &["1/V"]).unwrap();
        let c = BaseCurve::polyline(&chart, vec![vec![-1.0], vec![1.0]]).unwrap();
        match lift_from(&s, &c, 0.0, &LiftOptions::default()) {
            Err(Error::Integration { t, .. }) => assert!((0.0..=1.0).contains(&t)),
            other => panic!("expected integration error, got {other:?}"),
        }
    }
}
