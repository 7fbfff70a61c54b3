//! Work line bundles: a chart with a distinguished energy coordinate, the work
//! form `ω = -Σ P_i dV_i`, the heat form `ξ = dU + ω`, and fibre-wise affine
//! gauge changes `U ↦ aU + b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{parse, Expression, Func, Point};
use crate::geometry::{Chart, DifferentialForm, Region, VectorField};

/// A thermodynamic system in one chart `(U, V_1, ..., V_m)`.
///
/// Coefficients follow the sign convention `ω = -Σ P_i dV_i`, so a gas with
/// physical pressure `p > 0` has `P_V = -p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkSystem {
    name: String,
    chart: Chart,
    work: DifferentialForm,
    coefficients: Vec<Expression>,
}

impl WorkSystem {
    pub fn new(name: &str, chart: &Chart, coefficients: Vec<Expression>) -> Result<Self> {
        if coefficients.len() != chart.base_dim() {
            return Err(Error::InvalidSystem(format!(
                "{} work coefficients given for {} base coordinates",
                coefficients.len(),
                chart.base_dim()
            )));
        }
        let work = DifferentialForm::from_components(
            chart,
            1,
            coefficients
                .iter()
                .enumerate()
                .map(|(i, p)| (vec![i + 1], p.neg())),
        )?;
        Ok(WorkSystem {
            name: name.to_string(),
            chart: chart.clone(),
            work,
            coefficients,
        })
    }

    /// Parse coefficient texts and build the system.
    pub fn from_texts(name: &str, chart: &Chart, coefficients: &[&str]) -> Result<Self> {
        let parsed = coefficients
            .iter()
            .map(|s| parse(s).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        WorkSystem::new(name, chart, parsed)
    }

    /// Build from an arbitrary 1-form. Nothing stops `ω` from having a `dU`
    /// component here; [`WorkSystem::verify_kernel_condition`] reports it.
    pub fn from_raw_work_form(name: &str, work: DifferentialForm) -> Result<Self> {
        if work.degree() != 1 {
            return Err(Error::WrongDegree {
                expected: 1,
                found: work.degree(),
            });
        }
        let chart = work.chart().clone();
        let coefficients = (1..chart.dim())
            .map(|i| work.component(&[i]).neg())
            .collect();
        Ok(WorkSystem {
            name: name.to_string(),
            chart,
            work,
            coefficients,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base_dim(&self) -> usize {
        self.chart.base_dim()
    }

    /// `P_i` for base index `i` (0-based).
    pub fn coefficient(&self, i: usize) -> &Expression {
        &self.coefficients[i]
    }

    pub fn coefficients(&self) -> &[Expression] {
        &self.coefficients
    }

    pub fn work_form(&self) -> &DifferentialForm {
        &self.work
    }

    /// `ξ = dU + ω`.
    pub fn heat_form(&self) -> DifferentialForm {
        DifferentialForm::basis(&self.chart, 0)
            .add(&self.work)
            .expect("same chart and degree")
    }

    /// `∂/∂U`.
    pub fn vertical_field(&self) -> VectorField {
        VectorField::coordinate(&self.chart, 0)
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Check that `ω(∂/∂U) = 0`: structurally, then at `samples` random
    /// points of `region`.
    pub fn verify_kernel_condition(
        &self,
        region: &Region,
        samples: usize,
        seed: u64,
    ) -> Result<KernelCheck> {
        let pairing = self.work.pair(&self.vertical_field())?;
        let structural = pairing.is_zero();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violation = None;
        let mut violations = 0;
        for _ in 0..samples {
            let p = region.random_point(&mut rng);
            let v = pairing.evaluate(&p).map_err(|e| Error::eval(&p, e))?;
            if v != 0.0 {
                violations += 1;
                if violation.is_none() {
                    violation = Some((p, v));
                }
            }
        }
        Ok(KernelCheck {
            pairing,
            structural,
            samples,
            violations,
            first_violation: violation,
        })
    }

    /// Rewrite the system in the gauge `U' = aU + b`. The heat form becomes
    /// `ξ' = a ξ`, so `P'_i = a P_i + U ∂_i a + ∂_i b` with `U = (U' - b)/a`.
    /// The energy coordinate keeps its name.
    pub fn apply_gauge(&self, gauge: &GaugeTransform, region: &Region) -> Result<WorkSystem> {
        gauge.validate(&self.chart, region)?;
        let u_name = self.chart.energy_name();
        let u = Expression::var(u_name);
        let old_u = u.sub(&gauge.shift).div(&gauge.scale);
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = self.chart.name(i + 1);
                let transformed = gauge
                    .scale
                    .mul(p)
                    .add(&u.mul(&gauge.scale.differentiate(v)))
                    .add(&gauge.shift.differentiate(v));
                transformed.substitute(u_name, &old_u)
            })
            .collect();
        WorkSystem::new(&format!("{}[gauged]", self.name), &self.chart, coefficients)
    }
}

/// Outcome of [`WorkSystem::verify_kernel_condition`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    /// `ω(∂/∂U)` as an expression.
    pub pairing: Expression,
    /// The pairing is the literal zero.
    pub structural: bool,
    pub samples: usize,
    pub violations: usize,
    pub first_violation: Option<(Point, f64)>,
}

impl KernelCheck {
    pub fn holds(&self) -> bool {
        self.structural || self.violations == 0
    }
}

/// A fibre-wise affine change of energy coordinate `U' = a U + b`, with `a`
/// and `b` functions of the base only.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    scale: Expression,
    shift: Expression,
}

impl GaugeTransform {
    pub fn new(scale: Expression, shift: Expression) -> Self {
        GaugeTransform { scale, shift }
    }

    pub fn identity() -> Self {
        GaugeTransform::constant(1.0, 0.0)
    }

    pub fn constant(a: f64, b: f64) -> Self {
        GaugeTransform::new(Expression::constant(a), Expression::constant(b))
    }

    pub fn scale(&self) -> &Expression {
        &self.scale
    }

    pub fn shift(&self) -> &Expression {
        &self.shift
    }

    /// `a⁻¹ = 1/a`, `b⁻¹ = -b/a`.
    pub fn inverse(&self) -> Self {
        GaugeTransform {
            scale: Expression::one().div(&self.scale),
            shift: self.shift.neg().div(&self.scale),
        }
    }

    /// `a` and `b` must not involve the energy coordinate, and `a` must stay
    /// away from zero on every node of a 11-per-axis grid over `region`.
    pub fn validate(&self, chart: &Chart, region: &Region) -> Result<()> {
        chart.check_expression(&self.scale)?;
        chart.check_expression(&self.shift)?;
        let u = chart.energy_name();
        if self.scale.depends_on(u) || self.shift.depends_on(u) {
            return Err(Error::Gauge(format!(
                "a and b must be functions of the base only, not of `{u}`"
            )));
        }
        for p in region.grid(11) {
            let a = self.scale.evaluate(&p).map_err(|e| Error::eval(&p, e))?;
            if a.abs() < 1e-12 {
                return Err(Error::Gauge(format!("scale a vanishes at {p}")));
            }
        }
        Ok(())
    }

    /// Image of a point under `U ↦ aU + b`.
    pub fn map_point(&self, p: &Point) -> Result<Point> {
        let a = self.scale.evaluate(p).map_err(|e| Error::eval(p, e))?;
        let b = self.shift.evaluate(p).map_err(|e| Error::eval(p, e))?;
        let mut values = p.values().to_vec();
        values[0] = a * values[0] + b;
        Ok(p.with_values(values))
    }

    /// Pull a form written in gauged coordinates back to the original ones.
    pub fn pull_back(&self, form: &DifferentialForm) -> Result<DifferentialForm> {
        let chart = form.chart();
        let u_name = chart.energy_name();
        let u = Expression::var(u_name);
        let new_u = self.scale.mul(&u).add(&self.shift);
        // differentials of the coordinate map (U, V) ↦ (aU + b, V)
        let mut d_new_u = DifferentialForm::basis(chart, 0).scale(&self.scale);
        for i in 1..chart.dim() {
            let v = chart.name(i);
            let c = u
                .mul(&self.scale.differentiate(v))
                .add(&self.shift.differentiate(v));
            d_new_u = d_new_u.add(&DifferentialForm::basis(chart, i).scale(&c))?;
        }
        let image = |i: usize| {
            if i == 0 {
                d_new_u.clone()
            } else {
                DifferentialForm::basis(chart, i)
            }
        };
        let mut out = DifferentialForm::zero(chart, form.degree())?;
        for (tuple, c) in form.components() {
            let mut basis = DifferentialForm::scalar(chart, c.substitute(u_name, &new_u));
            for &i in tuple {
                basis = basis.wedge(&image(i))?;
            }
            out = out.add(&basis)?;
        }
        Ok(out)
    }
}

/// A named system together with the region it is usually studied on.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub system: WorkSystem,
    pub region: Region,
}

fn e(src: &str) -> Expression {
    parse(src).expect("catalog expression")
}

/// Monatomic ideal gas, `U = (3/2) nr T`, `PV = nr T`. The physical pressure
/// is `2U/(3V)` whatever `nr` is; `nr` only fixes the temperature scale
/// `T = 2U/(3 nr)` and is recorded in the name.
pub fn ideal_gas(nr: f64) -> WorkSystem {
    let chart = Chart::new("U", &["V"]).expect("static chart");
    WorkSystem::new(
        &format!("ideal_gas(nr={nr:?})"),
        &chart,
        vec![e("-2*U/(3*V)")],
    )
    .expect("static system")
}

/// `ξ = dU + V2 dV1`: the standard non-integrable example.
pub fn contact3() -> WorkSystem {
    let chart = Chart::new("U", &["V1", "V2"]).expect("static chart");
    WorkSystem::new("contact3", &chart, vec![e("-V2"), e("0")]).expect("static system")
}

/// `ξ = dU + V2 dV1 + V1 dV2 = d(U + V1 V2)`.
pub fn flat3() -> WorkSystem {
    let chart = Chart::new("U", &["V1", "V2"]).expect("static chart");
    WorkSystem::new("flat3", &chart, vec![e("-V2"), e("-V1")]).expect("static system")
}

/// Rotary engine on a circle: `ω = -τ dθ`, so `ξ = dU - τ dθ`.
pub fn wankel(tau: Expression) -> Result<WorkSystem> {
    let chart = Chart::with_periods("U", &[("theta", Some(std::f64::consts::TAU))])?;
    WorkSystem::new(&format!("wankel(tau={tau})"), &chart, vec![tau])
}

/// No work at all: `ξ = dU` over `m` base coordinates `V1..Vm`.
pub fn zero_work(m: usize) -> Result<WorkSystem> {
    let names: Vec<String> = (1..=m).map(|i| format!("V{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let chart = Chart::new("U", &refs)?;
    WorkSystem::new("zero_work", &chart, vec![Expression::zero(); m])
}

/// Default study region for the built-in systems, keyed by base name.
pub fn default_region(system: &WorkSystem) -> Region {
    let chart = system.chart();
    let bounds = match system.name().split('(').next().unwrap_or_default() {
        "ideal_gas" => vec![(1.0, 2.0); chart.dim()],
        "wankel" => vec![(0.0, 1.0), (0.0, std::f64::consts::TAU)],
        _ => vec![(-1.0, 1.0); chart.dim()],
    };
    Region::new(chart, bounds).expect("static region")
}

/// The built-in systems with their default regions.
pub fn catalog() -> Vec<CatalogEntry> {
    let systems = vec![
        ideal_gas(1.0),
        contact3(),
        flat3(),
        wankel(Expression::one()).expect("static system"),
        zero_work(2).expect("static system"),
    ];
    systems
        .into_iter()
        .map(|system| CatalogEntry {
            region: default_region(&system),
            system,
        })
        .collect()
}

/// Look up a built-in system by name. `wankel` takes its torque from `tau`
/// (default `1`).
pub fn builtin(name: &str, tau: Option<&Expression>) -> Option<CatalogEntry> {
    let system = match name {
        "ideal_gas" => ideal_gas(1.0),
        "contact3" => contact3(),
        "flat3" => flat3(),
        "wankel" => wankel(tau.cloned().unwrap_or_else(Expression::one)).ok()?,
        "zero_work" => zero_work(2).ok()?,
        _ => return None,
    };
    Some(CatalogEntry {
        region: default_region(&system),
        system,
    })
}

pub const BUILTIN_NAMES: [&str; 5] = ["ideal_gas", "contact3", "flat3", "wankel", "zero_work"];

// ---------------------------------------------------------------------------
// randomized systems

fn random_quadratic(rng: &mut ChaCha8Rng, vars: &[&str], amplitude: f64) -> Expression {
    let mut terms = vec![Expression::constant(
        rng.random_range(-amplitude..amplitude),
    )];
    for (i, a) in vars.iter().enumerate() {
        let x = Expression::var(a);
        terms.push(Expression::constant(rng.random_range(-amplitude..amplitude)).mul(&x));
        for b in &vars[i..] {
            let y = Expression::var(b);
            terms.push(
                Expression::constant(rng.random_range(-amplitude..amplitude)).mul(&x.mul(&y)),
            );
        }
    }
    Expression::sum(&terms)
}

/// Entropy-like potential `S = exp(q1(V)) U + q2(V) + c U³/3` with random
/// quadratics `q1, q2` and `c ∈ [0, 0.2)`, so `∂S/∂U > 0` everywhere.
fn random_potential(rng: &mut ChaCha8Rng) -> (Chart, Expression) {
    let chart = Chart::new("U", &["V1", "V2"]).expect("static chart");
    let q1 = random_quadratic(rng, &["V1", "V2"], 0.4);
    let q2 = random_quadratic(rng, &["V1", "V2"], 0.8);
    let c = rng.random_range(0.0..0.2);
    let u = Expression::var("U");
    let s = Expression::call(Func::Exp, &q1)
        .mul(&u)
        .add(&q2)
        .add(&Expression::constant(c / 3.0).mul(&u.pow(&Expression::constant(3.0))));
    (chart, s)
}

/// Integrable system built as `ξ = dS / (∂S/∂U)` from a random potential `S`,
/// i.e. `P_i = -(∂S/∂V_i)/(∂S/∂U)`. Region: `U ∈ [0.5, 1.5]`, `V ∈ [-1, 1]²`.
pub fn random_flat(seed: u64) -> CatalogEntry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chart, s) = random_potential(&mut rng);
    let s_u = s.differentiate("U");
    let coefficients = ["V1", "V2"]
        .iter()
        .map(|v| s.differentiate(v).div(&s_u).neg())
        .collect();
    let system = WorkSystem::new(&format!("random_flat({seed})"), &chart, coefficients)
        .expect("generated system");
    CatalogEntry {
        region: Region::new(&chart, vec![(0.5, 1.5), (-1.0, 1.0), (-1.0, 1.0)])
            .expect("static region"),
        system,
    }
}

/// A random flat system with `κ V2` added to `P_1`, `κ ∈ [0.5, 1.5)`, which
/// makes the curvature nonzero.
pub fn random_curved(seed: u64) -> CatalogEntry {
    let flat = random_flat(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let kappa = rng.random_range(0.5..1.5);
    let mut coefficients = flat.system.coefficients().to_vec();
    coefficients[0] = coefficients[0].add(&Expression::constant(kappa).mul(&Expression::var("V2")));
    let system = WorkSystem::new(
        &format!("random_curved({seed})"),
        flat.system.chart(),
        coefficients,
    )
    .expect("generated system");
    CatalogEntry {
        system,
        region: flat.region,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Bindings;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn heat_forms_of_catalog_systems() {
        let gas = ideal_gas(1.0);
        let xi = gas.heat_form();
        let p = gas.chart().point(vec![3.0, 2.0]);
        assert_eq!(xi.component(&[0]).as_const(), Some(1.0));
        assert!(close(xi.component(&[1]).evaluate(&p).unwrap(), 1.0, 1e-15));

        let c3 = contact3().heat_form();
        assert_eq!(c3.component(&[0]).as_const(), Some(1.0));
        assert_eq!(c3.component(&[1]).to_string(), "V2");
        assert!(c3.component(&[2]).is_zero());

        let z = zero_work(2).unwrap().heat_form();
        assert_eq!(z, DifferentialForm::basis(z.chart(), 0));

        let w = wankel(Expression::one()).unwrap().heat_form();
        assert_eq!(w.component(&[1]).as_const(), Some(-1.0));
    }

    #[test]
    fn kernel_condition() {
        for entry in catalog() {
            let check = entry
                .system
                .verify_kernel_condition(&entry.region, 100, 1)
                .unwrap();
            assert!(check.structural && check.holds(), "{}", entry.system.name());
        }

        let chart = Chart::new("U", &["V"]).unwrap();
        let raw = DifferentialForm::from_components(&chart, 1, [(vec![0], e("U"))]).unwrap();
        let bad = WorkSystem::from_raw_work_form("bad", raw).unwrap();
        let region = Region::new(&chart, vec![(0.5, 2.0), (-1.0, 1.0)]).unwrap();
        let check = bad.verify_kernel_condition(&region, 100, 1).unwrap();
        assert!(!check.holds());
        assert_eq!(check.violations, 100);
        let (pt, v) = check.first_violation.unwrap();
        assert_eq!(pt.value("U"), Some(v));

        let raw =
            DifferentialForm::from_components(&chart, 1, [(vec![1], e("-sin(U*V)"))]).unwrap();
        let ok = WorkSystem::from_raw_work_form("ok", raw).unwrap();
        assert!(ok.verify_kernel_condition(&region, 100, 1).unwrap().holds());
        assert_eq!(ok.coefficient(0).to_string(), "sin(U*V)");
    }

    #[test]
    fn coefficient_count_is_checked() {
        let chart = Chart::new("U", &["V1", "V2"]).unwrap();
        assert!(WorkSystem::new("x", &chart, vec![e("1")]).is_err());
        assert!(WorkSystem::from_texts("x", &chart, &["1", "W"]).is_err());
    }

    #[test]
    fn identity_gauge_leaves_system_unchanged() {
        let s = contact3();
        let r = default_region(&s);
        let g = s.apply_gauge(&GaugeTransform::identity(), &r).unwrap();
        assert_eq!(g.coefficients(), s.coefficients());
    }

    #[test]
    fn constant_gauge_on_contact3() {
        let s = contact3();
        let r = default_region(&s);
        let g = s
            .apply_gauge(&GaugeTransform::constant(2.0, 0.0), &r)
            .unwrap();
        let xi = g.heat_form();
        for p in r.grid(3) {
            assert_eq!(xi.component(&[0]).as_const(), Some(1.0));
            let v2 = p.values()[2];
            assert!(close(
                xi.component(&[1]).evaluate(&p).unwrap(),
                2.0 * v2,
                1e-15
            ));
        }
    }

    #[test]
    fn shift_gauge_on_zero_work() {
        let s = zero_work(2).unwrap();
        let r = default_region(&s);
        let gauge = GaugeTransform::new(Expression::one(), Expression::var("V1"));
        let g = s.apply_gauge(&gauge, &r).unwrap();
        let xi = g.heat_form();
        assert_eq!(xi.component(&[1]).as_const(), Some(-1.0));
        assert!(xi.component(&[2]).is_zero());
    }

    #[test]
    fn gauge_validation() {
        let s = contact3();
        let r = default_region(&s);
        let bad = GaugeTransform::new(Expression::var("U"), Expression::zero());
        assert!(matches!(s.apply_gauge(&bad, &r), Err(Error::Gauge(_))));
        let vanishing = GaugeTransform::new(Expression::var("V1"), Expression::zero());
        assert!(matches!(
            s.apply_gauge(&vanishing, &r),
            Err(Error::Gauge(_))
        ));
    }

    #[test]
    fn pull_back_undoes_the_coordinate_change() {
        // the heat form of the gauged system pulled back is a * xi
        let s = contact3();
        let r = default_region(&s);
        let gauge = GaugeTransform::new(e("1 + V1^2/10"), e("V2"));
        let gs = s.apply_gauge(&gauge, &r).unwrap();
        let pulled = gauge.pull_back(&gs.heat_form()).unwrap();
        let expected = s.heat_form().scale(gauge.scale());
        for p in r.grid(4) {
            let a = pulled.evaluate(&p).unwrap();
            let b = expected.evaluate(&p).unwrap();
            assert_eq!(a.len(), b.len());
            for ((ta, va), (tb, vb)) in a.iter().zip(&b) {
                assert_eq!(ta, tb);
                assert!(close(*va, *vb, 1e-12), "{p}: {va} vs {vb}");
            }
        }
    }

    #[test]
    fn random_systems_are_well_formed() {
        for seed in 0..5 {
            let f = random_flat(seed);
            let c = random_curved(seed);
            assert_eq!(f.system.base_dim(), 2);
            for p in f.region.grid(3) {
                for coef in f
                    .system
                    .coefficients()
                    .iter()
                    .chain(c.system.coefficients())
                {
                    assert!(coef.evaluate(&p).unwrap().is_finite());
                }
            }
        }
    }
}
