#![allow(dead_code)]

use heatgauge::bundle::{catalog, random_curved, random_flat, CatalogEntry};
use heatgauge::expr::{Bindings, Expression, Func};
use heatgauge::geometry::{Chart, DifferentialForm, VectorField};
use heatgauge::Point;
use rand::Rng;

/// Random expression over `vars` that is finite on `[-1, 1]^n`. Arguments of
/// `log`, `sqrt`, `tan` and denominators are shaped to stay in the domain.
pub fn random_expression<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Expression {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.6) {
            Expression::var(vars[rng.random_range(0..vars.len())])
        } else {
            Expression::constant((rng.random_range(-3.0f64..3.0) * 4.0).round() / 4.0)
        };
    }
    let sub = |rng: &mut R| random_expression(rng, vars, depth - 1);
    let one = Expression::one();
    let c = |x: f64| Expression::constant(x);
    match rng.random_range(0..13) {
        0 => sub(rng).add(&sub(rng)),
        1 => sub(rng).sub(&sub(rng)),
        2 | 3 => sub(rng).mul(&sub(rng)),
        4 => {
            let den = one.add(&sub(rng).pow(&c(2.0)));
            sub(rng).div(&den)
        }
        5 => sub(rng).pow(&c(rng.random_range(2..4) as f64)),
        6 => {
            // positive base, variable exponent
            let base = c(1.5).add(&Expression::call(Func::Sin, &sub(rng)));
            base.pow(&Expression::call(Func::Cos, &sub(rng)))
        }
        7 => Expression::call(Func::Sin, &sub(rng)),
        8 => Expression::call(Func::Cos, &sub(rng)),
        9 => Expression::call(Func::Exp, &Expression::call(Func::Sin, &sub(rng))),
        10 => Expression::call(
            Func::Log,
            &c(2.0).add(&Expression::call(Func::Cos, &sub(rng))),
        ),
        11 => Expression::call(Func::Sqrt, &one.add(&sub(rng).pow(&c(2.0)))),
        _ => Expression::call(
            Func::Tan,
            &c(0.5).mul(&Expression::call(Func::Sin, &sub(rng))),
        ),
    }
}

pub fn random_values<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central difference with one Richardson step.
pub fn numeric_derivative(e: &Expression, chart: &Chart, at: &[f64], index: usize) -> Option<f64> {
    let x = at[index];
    let h = 1e-3 * x.abs().max(1.0);
    let eval = |x: f64| {
        let mut v = at.to_vec();
        v[index] = x;
        e.evaluate(&chart.point(v)).ok()
    };
    let d = |h: f64| Some((eval(x + h)? - eval(x - h)?) / (2.0 * h));
    let (coarse, fine) = (d(h)?, d(h / 2.0)?);
    Some((4.0 * fine - coarse) / 3.0)
}

pub fn chart3() -> Chart {
    Chart::new("U", &["V1", "V2"]).unwrap()
}

pub fn random_form<R: Rng>(
    rng: &mut R,
    chart: &Chart,
    degree: usize,
    depth: u32,
) -> DifferentialForm {
    let names: Vec<&str> = chart.names().iter().map(String::as_str).collect();
    let n = chart.dim();
    let tuples: Vec<Vec<usize>> = match degree {
        0 => vec![vec![]],
        1 => (0..n).map(|i| vec![i]).collect(),
        2 => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| vec![i, j]))
            .collect(),
        _ => vec![(0..degree).collect()],
    };
    let components = tuples
        .into_iter()
        .map(|t| (t, random_expression(rng, &names, depth)));
    DifferentialForm::from_components(chart, degree, components).unwrap()
}

pub fn random_field<R: Rng>(rng: &mut R, chart: &Chart, depth: u32) -> VectorField {
    let names: Vec<&str> = chart.names().iter().map(String::as_str).collect();
    let components = (0..chart.dim())
        .map(|_| random_expression(rng, &names, depth))
        .collect();
    VectorField::new(chart, components).unwrap()
}

/// Largest componentwise difference between two forms at `p`, relative to
/// `max(1, largest component magnitude)`. `None` if either side fails.
pub fn form_gap(a: &DifferentialForm, b: &DifferentialForm, p: &Point) -> Option<f64> {
    let diff = a.sub(b).ok()?.max_abs_at(p).ok()?;
    let scale = a.max_abs_at(p).ok()?.max(b.max_abs_at(p).ok()?).max(1.0);
    Some(diff / scale)
}

pub fn value<B: Bindings + ?Sized>(e: &Expression, at: &B) -> f64 {
    e.evaluate(at).unwrap()
}

pub fn randomized_systems() -> Vec<(CatalogEntry, bool)> {
    (0..10)
        .map(|k| (random_flat(k), true))
        .chain((0..10).map(|k| (random_curved(k), false)))
        .collect()
}

/// Catalogued systems followed by the twenty randomized ones.
pub fn all_systems() -> Vec<CatalogEntry> {
    catalog()
        .into_iter()
        .chain(randomized_systems().into_iter().map(|(e, _)| e))
        .collect()
}
