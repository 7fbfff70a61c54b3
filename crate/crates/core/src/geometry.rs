//! Exterior calculus on a single global chart.
//!
//! Coordinate 0 of every [`Chart`] is the vertical (energy) coordinate; the
//! remaining coordinates parametrise the base. Forms store one expression per
//! strictly increasing index tuple, so antisymmetry is built into the
//! representation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{Expression, Point};

/// Highest form degree the crate works with.
pub const MAX_DEGREE: usize = 3;

#[derive(Debug, PartialEq)]
struct ChartInner {
    names: Arc<[String]>,
    periods: Vec<Option<f64>>,
}

/// Ordered coordinate names; the first is the energy coordinate.
#[derive(Debug, Clone)]
pub struct Chart(Arc<ChartInner>);

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && crate::expr::Func::from_name(name).is_none()
}

impl Chart {
    pub fn new(energy: &str, base: &[&str]) -> Result<Chart> {
        Chart::with_periods(energy, &base.iter().map(|b| (*b, None)).collect::<Vec<_>>())
    }

    /// Chart whose base coordinates may carry a period.
    pub fn with_periods(energy: &str, base: &[(&str, Option<f64>)]) -> Result<Chart> {
        if base.is_empty() {
            return Err(Error::InvalidChart(
                "at least one base coordinate is required".into(),
            ));
        }
        let mut names: Vec<String> = Vec::with_capacity(base.len() + 1);
        let mut periods = vec![None];
        names.push(energy.to_string());
        for (name, period) in base {
            names.push(name.to_string());
            if let Some(p) = period {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::InvalidChart(format!(
                        "period of `{name}` must be positive, got {p}"
                    )));
                }
            }
            periods.push(*period);
        }
        for (i, n) in names.iter().enumerate() {
            if !valid_name(n) {
                return Err(Error::InvalidChart(format!(
                    "`{n}` is not a valid coordinate name"
                )));
            }
            if names[..i].contains(n) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{n}`")));
            }
        }
        Ok(Chart(Arc::new(ChartInner {
            names: names.into(),
            periods,
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.names.len()
    }

    /// Number of base coordinates, `dim() - 1`.
    pub fn base_dim(&self) -> usize {
        self.dim() - 1
    }

    pub fn names(&self) -> &[String] {
        &self.0.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.0.names[index]
    }

    pub fn energy_name(&self) -> &str {
        self.name(0)
    }

    pub fn base_names(&self) -> &[String] {
        &self.0.names[1..]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.names.iter().position(|n| n == name)
    }

    pub fn period(&self, index: usize) -> Option<f64> {
        self.0.periods[index]
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.0.periods
    }

    /// Build a point; `values` follow the chart's coordinate order.
    pub fn point(&self, values: Vec<f64>) -> Point {
        assert_eq!(values.len(), self.dim(), "point arity mismatch");
        Point::new(self.0.names.clone(), values)
    }

    /// Point from a base position and an energy value.
    pub fn point_over(&self, energy: f64, base: &[f64]) -> Point {
        let mut v = Vec::with_capacity(self.dim());
        v.push(energy);
        v.extend_from_slice(base);
        self.point(v)
    }

    /// Distance between two values of coordinate `index`, reduced modulo its
    /// period when it has one.
    pub fn coordinate_gap(&self, index: usize, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.period(index) {
            Some(p) => {
                let r = d.rem_euclid(p);
                r.min(p - r)
            }
            None => d,
        }
    }

    /// Check that every variable of `e` is a coordinate of this chart.
    pub fn check_expression(&self, e: &Expression) -> Result<()> {
        for v in e.variables() {
            if self.index_of(&v).is_none() {
                return Err(Error::InvalidSystem(format!(
                    "expression `{e}` uses `{v}`, which is not a chart coordinate"
                )));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    chart: Chart,
    bounds: Vec<(f64, f64)>,
}

impl Region {
    pub fn new(chart: &Chart, bounds: Vec<(f64, f64)>) -> Result<Region> {
        if bounds.len() != chart.dim() {
            return Err(Error::InvalidRegion(format!(
                "expected {} intervals, got {}",
                chart.dim(),
                bounds.len()
            )));
        }
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidRegion(format!(
                    "bad interval [{lo}, {hi}] for `{}`",
                    chart.name(i)
                )));
            }
        }
        Ok(Region {
            chart: chart.clone(),
            bounds,
        })
    }

    /// The same interval for every coordinate.
    pub fn cube(chart: &Chart, lo: f64, hi: f64) -> Result<Region> {
        Region::new(chart, vec![(lo, hi); chart.dim()])
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn interval(&self, index: usize) -> (f64, f64) {
        self.bounds[index]
    }

    pub fn base_bounds(&self) -> &[(f64, f64)] {
        &self.bounds[1..]
    }

    pub fn center(&self) -> Point {
        self.chart
            .point(self.bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn contains_base(&self, base: &[f64]) -> bool {
        base.iter()
            .zip(self.base_bounds())
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.chart.point(
            self.bounds
                .iter()
                .map(|&(lo, hi)| {
                    if lo == hi {
                        lo
                    } else {
                        rng.random_range(lo..=hi)
                    }
                })
                .collect(),
        )
    }

    /// Tensor grid with `nodes` per axis (the midpoint when `nodes == 1`),
    /// last coordinate varying fastest.
    pub fn grid(&self, nodes: usize) -> Vec<Point> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, nodes))
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            out.push(
                self.chart
                    .point(idx.iter().zip(&axes).map(|(i, a)| a[*i]).collect()),
            );
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// A differential form of degree 0..=3.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialForm {
    chart: Chart,
    degree: usize,
    components: BTreeMap<Vec<usize>, Expression>,
}

/// Sort `indices` in place; `None` if an index repeats, otherwise the sign of
/// the sorting permutation.
fn sort_with_sign(indices: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..indices.len() {
        let mut j = i;
        while j > 0 && indices[j - 1] > indices[j] {
            indices.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if indices.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

impl DifferentialForm {
    pub fn zero(chart: &Chart, degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::DegreeOverflow(degree));
        }
        Ok(DifferentialForm {
            chart: chart.clone(),
            degree,
            components: BTreeMap::new(),
        })
    }

    /// A scalar field viewed as a 0-form.
    pub fn scalar(chart: &Chart, f: Expression) -> Self {
        let mut form = DifferentialForm::zero(chart, 0).expect("degree 0");
        form.insert(Vec::new(), f);
        form
    }

    /// The coordinate 1-form `dx^index`.
    pub fn basis(chart: &Chart, index: usize) -> Self {
        assert!(index < chart.dim(), "coordinate index out of range");
        let mut form = DifferentialForm::zero(chart, 1).expect("degree 1");
        form.insert(vec![index], Expression::one());
        form
    }

    /// Build from components; tuples may be given in any order and are
    /// normalised (with sign) to strictly increasing form.
    pub fn from_components(
        chart: &Chart,
        degree: usize,
        components: impl IntoIterator<Item = (Vec<usize>, Expression)>,
    ) -> Result<Self> {
        let mut form = DifferentialForm::zero(chart, degree)?;
        for (mut tuple, e) in components {
            if tuple.len() != degree || tuple.iter().any(|&i| i >= chart.dim()) {
                return Err(Error::InvalidTuple(tuple));
            }
            chart.check_expression(&e)?;
            let Some(sign) = sort_with_sign(&mut tuple) else {
                return Err(Error::InvalidTuple(tuple));
            };
            let e = if sign < 0.0 { e.neg() } else { e };
            form.accumulate(tuple, e);
        }
        Ok(form)
    }

    fn insert(&mut self, tuple: Vec<usize>, e: Expression) {
        if e.is_zero() {
            self.components.remove(&tuple);
        } else {
            self.components.insert(tuple, e);
        }
    }

    fn accumulate(&mut self, tuple: Vec<usize>, e: Expression) {
        let sum = match self.components.get(&tuple) {
            Some(prev) => prev.add(&e),
            None => e,
        };
        self.insert(tuple, sum);
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Nonzero components keyed by strictly increasing index tuples.
    pub fn components(&self) -> &BTreeMap<Vec<usize>, Expression> {
        &self.components
    }

    /// Component on `tuple` (must be strictly increasing); zero if absent.
    pub fn component(&self, tuple: &[usize]) -> Expression {
        self.components
            .get(tuple)
            .cloned()
            .unwrap_or_else(Expression::zero)
    }

    /// True when every component is the literal zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.components.is_empty()
    }

    fn same_chart(&self, other_chart: &Chart) -> Result<()> {
        if &self.chart == other_chart {
            Ok(())
        } else {
            Err(Error::ChartMismatch)
        }
    }

    pub fn add(&self, other: &DifferentialForm) -> Result<Self> {
        self.same_chart(&other.chart)?;
        if self.degree != other.degree {
            return Err(Error::WrongDegree {
                expected: self.degree,
                found: other.degree,
            });
        }
        let mut out = self.clone();
        for (t, e) in &other.components {
            out.accumulate(t.clone(), e.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DifferentialForm) -> Result<Self> {
        self.add(&other.scale(&Expression::constant(-1.0)))
    }

    /// Multiply every component by a scalar field.
    pub fn scale(&self, f: &Expression) -> Self {
        let mut out = DifferentialForm {
            chart: self.chart.clone(),
            degree: self.degree,
            components: BTreeMap::new(),
        };
        for (t, e) in &self.components {
            out.insert(t.clone(), f.mul(e));
        }
        out
    }

    /// Apply `f` to every component expression.
    pub fn map_components(&self, mut f: impl FnMut(&Expression) -> Expression) -> Self {
        let mut out = DifferentialForm {
            chart: self.chart.clone(),
            degree: self.degree,
            components: BTreeMap::new(),
        };
        for (t, e) in &self.components {
            out.insert(t.clone(), f(e));
        }
        out
    }

    /// `d` of this form, computed symbolically in coordinates.
    pub fn exterior_derivative(&self) -> Result<Self> {
        if self.degree + 1 > MAX_DEGREE {
            return Err(Error::DegreeOverflow(self.degree + 1));
        }
        let mut out = DifferentialForm::zero(&self.chart, self.degree + 1)?;
        for (tuple, e) in &self.components {
            for c in 0..self.chart.dim() {
                if tuple.contains(&c) {
                    continue;
                }
                let partial = e.differentiate(self.chart.name(c));
                if partial.is_zero() {
                    continue;
                }
                // dx^c ∧ dx^J: moving c into place costs one swap per smaller index
                let pos = tuple.iter().filter(|&&j| j < c).count();
                let mut t = tuple.clone();
                t.insert(pos, c);
                let term = if pos % 2 == 1 { partial.neg() } else { partial };
                out.accumulate(t, term);
            }
        }
        Ok(out)
    }

    pub fn wedge(&self, other: &DifferentialForm) -> Result<Self> {
        self.same_chart(&other.chart)?;
        let degree = self.degree + other.degree;
        if degree > MAX_DEGREE {
            return Err(Error::DegreeOverflow(degree));
        }
        let mut out = DifferentialForm::zero(&self.chart, degree)?;
        for (a_t, a) in &self.components {
            for (b_t, b) in &other.components {
                let mut t: Vec<usize> = a_t.iter().chain(b_t).copied().collect();
                if let Some(sign) = sort_with_sign(&mut t) {
                    let prod = a.mul(b);
                    out.accumulate(t, if sign < 0.0 { prod.neg() } else { prod });
                }
            }
        }
        Ok(out)
    }

    /// Contract a 1-form with a vector field: `Σ α_i X^i`.
    pub fn pair(&self, field: &VectorField) -> Result<Expression> {
        self.same_chart(&field.chart)?;
        if self.degree != 1 {
            return Err(Error::WrongDegree {
                expected: 1,
                found: self.degree,
            });
        }
        let terms: Vec<Expression> = self
            .components
            .iter()
            .map(|(t, e)| e.mul(&field.components[t[0]]))
            .collect();
        Ok(Expression::sum(&terms))
    }

    /// Numeric component values at `p`, in tuple order.
    pub fn evaluate(&self, p: &Point) -> Result<Vec<(Vec<usize>, f64)>> {
        self.components
            .iter()
            .map(|(t, e)| {
                e.evaluate(p)
                    .map(|v| (t.clone(), v))
                    .map_err(|err| Error::eval(p, err))
            })
            .collect()
    }

    /// Largest absolute component at `p` (zero for the zero form).
    pub fn max_abs_at(&self, p: &Point) -> Result<f64> {
        Ok(self
            .evaluate(p)?
            .into_iter()
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs())))
    }
}

impl fmt::Display for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        for (k, (t, e)) in self.components.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if t.is_empty() {
                write!(f, "{e}")?;
                continue;
            }
            write!(f, "({e}) ")?;
            for (j, i) in t.iter().enumerate() {
                if j > 0 {
                    write!(f, "^")?;
                }
                write!(f, "d{}", self.chart.name(*i))?;
            }
        }
        Ok(())
    }
}

/// A vector field with one component expression per chart coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    chart: Chart,
    components: Vec<Expression>,
}

impl VectorField {
    pub fn new(chart: &Chart, components: Vec<Expression>) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::InvalidSystem(format!(
                "vector field needs {} components, got {}",
                chart.dim(),
                components.len()
            )));
        }
        for c in &components {
            chart.check_expression(c)?;
        }
        Ok(VectorField {
            chart: chart.clone(),
            components,
        })
    }

    /// The coordinate field `∂/∂x^index`.
    pub fn coordinate(chart: &Chart, index: usize) -> Self {
        assert!(index < chart.dim(), "coordinate index out of range");
        let components = (0..chart.dim())
            .map(|i| {
                if i == index {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            })
            .collect();
        VectorField {
            chart: chart.clone(),
            components,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn component(&self, index: usize) -> &Expression {
        &self.components[index]
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch);
        }
        Ok(VectorField {
            chart: self.chart.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn scale(&self, f: &Expression) -> Self {
        VectorField {
            chart: self.chart.clone(),
            components: self.components.iter().map(|c| f.mul(c)).collect(),
        }
    }

    /// Directional derivative `X(f) = Σ X^j ∂_j f`.
    pub fn apply(&self, f: &Expression) -> Expression {
        let terms: Vec<Expression> = self
            .components
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(j, x)| x.mul(&f.differentiate(self.chart.name(j))))
            .collect();
        Expression::sum(&terms)
    }

    /// `[X, Y]^k = X(Y^k) - Y(X^k)`.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<Self> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch);
        }
        let components = (0..self.chart.dim())
            .map(|k| {
                self.apply(&other.components[k])
                    .sub(&other.apply(&self.components[k]))
            })
            .collect();
        Ok(VectorField {
            chart: self.chart.clone(),
            components,
        })
    }

    pub fn evaluate(&self, p: &Point) -> Result<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.evaluate(p).map_err(|e| Error::eval(p, e)))
            .collect()
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.components.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c}) d/d{}", self.chart.name(i))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chart3() -> Chart {
        Chart::new("U", &["V1", "V2"]).unwrap()
    }

    fn e(s: &str) -> Expression {
        parse(s).unwrap()
    }

    #[test]
    fn chart_validation() {
        assert!(Chart::new("U", &[]).is_err());
        assert!(Chart::new("U", &["U"]).is_err());
        assert!(Chart::new("U", &["1x"]).is_err());
        assert!(Chart::new("U", &["sin"]).is_err());
        assert!(Chart::with_periods("U", &[("theta", Some(0.0))]).is_err());
        let c = chart3();
        assert_eq!(c.dim(), 3);
        assert_eq!(c.base_dim(), 2);
        assert_eq!(c.energy_name(), "U");
    }

    #[test]
    fn periodic_gap() {
        let c = Chart::with_periods("U", &[("theta", Some(std::f64::consts::TAU))]).unwrap();
        assert!(c.coordinate_gap(1, 0.0, std::f64::consts::TAU) < 1e-15);
        assert!(c.coordinate_gap(1, 0.0, 3.0 * std::f64::consts::TAU) < 1e-14);
        assert!((c.coordinate_gap(1, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(
            c.coordinate_gap(0, 0.0, std::f64::consts::TAU),
            std::f64::consts::TAU
        );
    }

    #[test]
    fn d_of_du_is_zero() {
        let c = chart3();
        let du = DifferentialForm::basis(&c, 0);
        let ddu = du.exterior_derivative().unwrap();
        assert_eq!(ddu.degree(), 2);
        assert!(ddu.is_structurally_zero());
    }

    #[test]
    fn d_of_v2_dv1() {
        let c = chart3();
        let form = DifferentialForm::from_components(&c, 1, [(vec![1], e("V2"))]).unwrap();
        let d = form.exterior_derivative().unwrap();
        assert_eq!(d.component(&[1, 2]).as_const(), Some(-1.0));
        assert_eq!(d.components().len(), 1);
    }

    #[test]
    fn d_of_ideal_gas_work_term() {
        let c = Chart::new("U", &["V"]).unwrap();
        let form = DifferentialForm::from_components(&c, 1, [(vec![1], e("2*U/(3*V)"))]).unwrap();
        let d = form.exterior_derivative().unwrap();
        let expected = e("2/(3*V)");
        for (u, v) in [(1.0, 1.0), (2.0, 0.5), (-1.0, 3.0)] {
            let p = c.point(vec![u, v]);
            let got = d.component(&[0, 1]).evaluate(&p).unwrap();
            assert!((got - expected.evaluate(&p).unwrap()).abs() < 1e-15);
        }
    }

    /// Circulation of `V2 dV1` around a small counter-clockwise square in the
    /// (V1, V2) plane must match the dV1^dV2 component times the area.
    #[test]
    fn d_matches_small_square_circulation() {
        let c = chart3();
        let form = DifferentialForm::from_components(&c, 1, [(vec![1], e("V2"))]).unwrap();
        let d = form.exterior_derivative().unwrap();
        let (x0, y0, h) = (0.3, -0.2, 1e-3);
        // only the horizontal edges contribute for V2 dV1
        let bottom = y0 * h;
        let top = -(y0 + h) * h;
        let circulation = bottom + top;
        let flux = d
            .component(&[1, 2])
            .evaluate(&c.point(vec![0.0, x0, y0]))
            .unwrap()
            * h
            * h;
        assert!((circulation - flux).abs() < 1e-12);
    }

    #[test]
    fn wedge_examples() {
        let c = chart3();
        let du = DifferentialForm::basis(&c, 0);
        let dv1 = DifferentialForm::basis(&c, 1);
        assert!(du.wedge(&du).unwrap().is_structurally_zero());
        assert_eq!(
            du.wedge(&dv1).unwrap().component(&[0, 1]).as_const(),
            Some(1.0)
        );
        assert_eq!(
            dv1.wedge(&du).unwrap().component(&[0, 1]).as_const(),
            Some(-1.0)
        );

        // xi = dU + V2 dV1, xi ^ dxi = -dU^dV1^dV2
        let xi = du
            .add(&DifferentialForm::from_components(&c, 1, [(vec![1], e("V2"))]).unwrap())
            .unwrap();
        let defect = xi.wedge(&xi.exterior_derivative().unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let region = Region::cube(&c, -2.0, 2.0).unwrap();
        for _ in 0..20 {
            let p = region.random_point(&mut rng);
            let vals = defect.evaluate(&p).unwrap();
            assert_eq!(vals, vec![(vec![0, 1, 2], -1.0)]);
        }
    }

    #[test]
    fn degree_overflow_is_rejected() {
        let c = Chart::new("U", &["V1", "V2", "V3"]).unwrap();
        let two = DifferentialForm::basis(&c, 0)
            .wedge(&DifferentialForm::basis(&c, 1))
            .unwrap();
        assert!(matches!(two.wedge(&two), Err(Error::DegreeOverflow(4))));
        let three = two.wedge(&DifferentialForm::basis(&c, 2)).unwrap();
        assert!(matches!(
            three.exterior_derivative(),
            Err(Error::DegreeOverflow(4))
        ));
        assert!(DifferentialForm::zero(&c, 4).is_err());
    }

    #[test]
    fn three_forms_vanish_on_two_dimensional_charts() {
        let c = Chart::new("U", &["V"]).unwrap();
        let f = DifferentialForm::from_components(&c, 1, [(vec![1], e("U*V"))]).unwrap();
        let defect = f.wedge(&f.exterior_derivative().unwrap()).unwrap();
        assert_eq!(defect.degree(), 3);
        assert!(defect.is_structurally_zero());
    }

    #[test]
    fn pair_examples() {
        let c = chart3();
        let du = DifferentialForm::basis(&c, 0);
        let dv1 = DifferentialForm::basis(&c, 1);
        let d_u = VectorField::coordinate(&c, 0);
        assert_eq!(du.pair(&d_u).unwrap().as_const(), Some(1.0));
        assert!(dv1.pair(&d_u).unwrap().is_zero());

        let xi = DifferentialForm::from_components(&c, 1, [(vec![0], e("1")), (vec![1], e("V2"))])
            .unwrap();
        let x1 = VectorField::new(&c, vec![e("-V2"), e("1"), e("0")]).unwrap();
        let pairing = xi.pair(&x1).unwrap();
        for v2 in [-1.0, 0.3, 2.0] {
            assert_eq!(pairing.evaluate(&c.point(vec![0.0, 0.0, v2])).unwrap(), 0.0);
        }
    }

    #[test]
    fn chart_mismatch_is_reported() {
        let a = chart3();
        let b = Chart::new("E", &["V1", "V2"]).unwrap();
        let du = DifferentialForm::basis(&a, 0);
        assert_eq!(
            du.pair(&VectorField::coordinate(&b, 0)),
            Err(Error::ChartMismatch)
        );
        assert!(VectorField::coordinate(&a, 0)
            .lie_bracket(&VectorField::coordinate(&b, 0))
            .is_err());
    }

    #[test]
    fn lie_bracket_examples() {
        let c = chart3();
        let d1 = VectorField::coordinate(&c, 1);
        let d2 = VectorField::coordinate(&c, 2);
        let b = d1.lie_bracket(&d2).unwrap();
        assert!(b.components().iter().all(Expression::is_zero));

        let x1 = VectorField::new(&c, vec![e("-V2"), e("1"), e("0")]).unwrap();
        let b = x1.lie_bracket(&d2).unwrap();
        assert_eq!(b.component(0).as_const(), Some(1.0));
        assert!(b.component(1).is_zero() && b.component(2).is_zero());

        let x = VectorField::new(&c, vec![e("U*V1"), e("sin(V2)"), e("V1^2")]).unwrap();
        let b = x.lie_bracket(&x).unwrap();
        let p = c.point(vec![0.4, -1.2, 0.8]);
        assert!(b.evaluate(&p).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn grid_enumerates_all_nodes() {
        let c = chart3();
        let r = Region::new(&c, vec![(0.0, 1.0), (-1.0, 1.0), (2.0, 2.0)]).unwrap();
        let g = r.grid(3);
        assert_eq!(g.len(), 27);
        assert_eq!(g[0].values(), &[0.0, -1.0, 2.0]);
        assert_eq!(g[26].values(), &[1.0, 1.0, 2.0]);
        assert_eq!(r.grid(1)[0].values(), &[0.5, 0.0, 2.0]);
        assert!(Region::new(&c, vec![(1.0, 0.0); 3]).is_err());
    }
}
