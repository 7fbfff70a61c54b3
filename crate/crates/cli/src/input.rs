//! System and curve files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use heatgauge::bundle::{builtin, BUILTIN_NAMES};
use heatgauge::{parse, BaseCurve, Chart, Expression, Region, Tolerances, WorkSystem};
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

pub const DEFAULT_GRID: usize = 11;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    At {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] heatgauge::Error),
}

/// Everything a command needs to know about the system under study.
#[derive(Debug, Clone)]
pub struct Setup {
    pub system: WorkSystem,
    pub region: Region,
    pub grid: usize,
    pub tolerances: Tolerances,
}

/// Parse an expression, reading `pi` as the constant.
pub fn expression(text: &str) -> Result<Expression, String> {
    let e = parse(text).map_err(|e| format!("in `{text}`: {e}"))?;
    Ok(e.substitute("pi", &Expression::constant(PI)))
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Located<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Located<'_> {
    fn at(&self, span: Range<usize>, message: impl Into<String>) -> InputError {
        InputError::At {
            path: self.path.to_path_buf(),
            line: line_of(self.text, span.start),
            message: message.into(),
        }
    }

    fn toml(&self, e: toml::de::Error) -> InputError {
        let message = e.message().trim().to_string();
        match e.span() {
            Some(span) => self.at(span, message),
            None => InputError::File {
                path: self.path.to_path_buf(),
                message,
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    system: Spanned<SystemSection>,
    region: Option<BTreeMap<Spanned<String>, Spanned<Vec<f64>>>>,
    grid: Option<GridSection>,
    tolerances: Option<ToleranceSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    name: String,
    energy: Option<Spanned<String>>,
    base_coords: Spanned<Vec<Spanned<String>>>,
    #[serde(default)]
    periodic: BTreeMap<Spanned<String>, Spanned<Period>>,
    #[serde(rename = "P")]
    p: Spanned<Vec<Spanned<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Period {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nodes: Spanned<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSection {
    flatness: Option<Spanned<f64>>,
    residual: Option<Spanned<f64>>,
    holonomy: Option<Spanned<f64>>,
}

/// Load a system file.
pub fn load_system(path: &Path) -> Result<Setup, InputError> {
    let text = read(path)?;
    let here = Located { path, text: &text };
    let file: SystemFile = toml::from_str(&text).map_err(|e| here.toml(e))?;
    let sys_span = file.system.span();
    let section = file.system.into_inner();

    let energy = section
        .energy
        .as_ref()
        .map(|e| e.get_ref().as_str())
        .unwrap_or("U");
    let base: Vec<&str> = section
        .base_coords
        .get_ref()
        .iter()
        .map(|s| s.get_ref().as_str())
        .collect();
    for name in section.periodic.keys() {
        if !base.contains(&name.get_ref().as_str()) {
            return Err(here.at(
                name.span(),
                format!(
                    "periodic coordinate `{}` is not a base coordinate",
                    name.get_ref()
                ),
            ));
        }
    }
    let mut periods = Vec::new();
    for &name in &base {
        let period = section
            .periodic
            .iter()
            .find(|(k, _)| k.get_ref() == name)
            .map(|(_, v)| {
                let value = match v.get_ref() {
                    Period::Number(x) => Ok(*x),
                    Period::Text(t) => expression(t).and_then(|e| {
                        e.evaluate(&[("pi", PI)])
                            .map_err(|err| format!("`{t}`: {err}"))
                    }),
                };
                value.map_err(|m| here.at(v.span(), m))
            })
            .transpose()?;
        periods.push((name, period));
    }
    let chart = Chart::with_periods(energy, &periods)
        .map_err(|e| here.at(section.base_coords.span(), e.to_string()))?;

    let texts = section.p.get_ref();
    if texts.len() != base.len() {
        return Err(here.at(
            section.p.span(),
            format!(
                "P has {} entries but there are {} base coordinates",
                texts.len(),
                base.len()
            ),
        ));
    }
    let mut coefficients = Vec::with_capacity(texts.len());
    for t in texts {
        let e = expression(t.get_ref()).map_err(|m| here.at(t.span(), m))?;
        chart
            .check_expression(&e)
            .map_err(|err| here.at(t.span(), format!("in `{}`: {err}", t.get_ref())))?;
        coefficients.push(e);
    }
    let system = WorkSystem::new(&section.name, &chart, coefficients)
        .map_err(|e| here.at(sys_span.clone(), e.to_string()))?;

    let mut bounds: Vec<Option<(f64, f64)>> = vec![None; chart.dim()];
    for (name, range) in file.region.iter().flatten() {
        let Some(index) = chart.index_of(name.get_ref()) else {
            return Err(here.at(
                name.span(),
                format!("unknown coordinate `{}` in [region]", name.get_ref()),
            ));
        };
        let &[lo, hi] = range.get_ref().as_slice() else {
            return Err(here.at(range.span(), "a region bound is written [min, max]"));
        };
        bounds[index] = Some((lo, hi));
    }
    let bounds = bounds
        .into_iter()
        .enumerate()
        // unlisted coordinates: one period if periodic, else [-1, 1]
        .map(|(i, b)| {
            b.unwrap_or(match chart.period(i) {
                Some(p) => (0.0, p),
                None => (-1.0, 1.0),
            })
        })
        .collect();
    let region = Region::new(&chart, bounds).map_err(|e| InputError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;

    let grid = match &file.grid {
        Some(g) if *g.nodes.get_ref() == 0 => {
            return Err(here.at(g.nodes.span(), "grid needs at least one node"));
        }
        Some(g) => *g.nodes.get_ref(),
        None => DEFAULT_GRID,
    };
    let mut tolerances = Tolerances::default();
    if let Some(t) = &file.tolerances {
        for (slot, value) in [
            (&mut tolerances.flatness, &t.flatness),
            (&mut tolerances.residual, &t.residual),
            (&mut tolerances.holonomy, &t.holonomy),
        ] {
            if let Some(v) = value {
                if v.get_ref().is_nan() || *v.get_ref() <= 0.0 {
                    return Err(here.at(v.span(), "tolerances must be positive"));
                }
                *slot = *v.get_ref();
            }
        }
    }
    Ok(Setup {
        system,
        region,
        grid,
        tolerances,
    })
}

/// A built-in system with its usual region.
pub fn load_builtin(name: &str, tau: Option<&str>) -> Result<Setup, InputError> {
    let tau = tau
        .map(|t| expression(t).map_err(InputError::Usage))
        .transpose()?;
    if tau.is_some() && name != "wankel" {
        return Err(InputError::Usage(
            "--tau only applies to the wankel system".into(),
        ));
    }
    let entry = builtin(name, tau.as_ref()).ok_or_else(|| {
        InputError::Usage(format!(
            "unknown system `{name}`; built-in systems are {}",
            BUILTIN_NAMES.join(", ")
        ))
    })?;
    Ok(Setup {
        system: entry.system,
        region: entry.region,
        grid: DEFAULT_GRID,
        tolerances: Tolerances::default(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    curve: BTreeMap<Spanned<String>, Spanned<toml::Value>>,
}

/// Load a curve file: CSV with a `t` column plus one column per base
/// coordinate, or TOML with a `[curve]` table of expressions in `t` and a
/// `t_range`.
pub fn load_curve(path: &Path, chart: &Chart) -> Result<BaseCurve, InputError> {
    let text = read(path)?;
    let is_toml = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => false,
        Some("toml") => true,
        _ => text.trim_start().starts_with('['),
    };
    if is_toml {
        curve_from_toml(path, &text, chart)
    } else {
        curve_from_csv(path, &text, chart)
    }
}

fn curve_from_toml(path: &Path, text: &str, chart: &Chart) -> Result<BaseCurve, InputError> {
    let here = Located { path, text };
    let file: CurveFile = toml::from_str(text).map_err(|e| here.toml(e))?;
    let mut range = None;
    let mut coords: Vec<Option<Expression>> = vec![None; chart.base_dim()];
    for (key, value) in &file.curve {
        if key.get_ref() == "t_range" {
            let bounds = value
                .get_ref()
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| {
                    let num =
                        |v: &toml::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
                    Some((num(&a[0])?, num(&a[1])?))
                })
                .ok_or_else(|| here.at(value.span(), "t_range is written [start, end]"))?;
            range = Some(bounds);
            continue;
        }
        let index = chart
            .index_of(key.get_ref())
            .filter(|&i| i > 0)
            .ok_or_else(|| {
                here.at(
                    key.span(),
                    format!("unknown base coordinate `{}`", key.get_ref()),
                )
            })?;
        let body = match value.get_ref() {
            toml::Value::String(s) => expression(s).map_err(|m| here.at(value.span(), m))?,
            toml::Value::Float(x) => Expression::constant(*x),
            toml::Value::Integer(i) => Expression::constant(*i as f64),
            _ => return Err(here.at(value.span(), "expected an expression in t")),
        };
        coords[index - 1] = Some(body);
    }
    let (t0, t1) = range.ok_or_else(|| InputError::File {
        path: path.to_path_buf(),
        message: "[curve] needs t_range".into(),
    })?;
    let coords = coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| InputError::File {
                path: path.to_path_buf(),
                message: format!("[curve] has no expression for `{}`", chart.name(i + 1)),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    BaseCurve::parametric(chart, "t", coords, t0, t1).map_err(|e| InputError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn curve_from_csv(path: &Path, text: &str, chart: &Chart) -> Result<BaseCurve, InputError> {
    let fail = |line: usize, message: String| InputError::At {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| fail(1, e.to_string()))?
        .clone();
    let mut t_column = None;
    let mut columns = vec![None; chart.base_dim()];
    for (k, name) in headers.iter().enumerate() {
        if name == "t" {
            t_column = Some(k);
        } else if let Some(i) = chart.index_of(name).filter(|&i| i > 0) {
            columns[i - 1] = Some(k);
        } else {
            return Err(fail(1, format!("unknown column `{name}`")));
        }
    }
    let t_column = t_column.ok_or_else(|| fail(1, "missing column `t`".into()))?;
    let columns = columns
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| fail(1, format!("missing column `{}`", chart.name(i + 1)))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut knots = Vec::new();
    let mut vertices = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            fail(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let number = |k: usize| -> Result<f64, InputError> {
            let cell = record.get(k).unwrap_or("");
            cell.parse::<f64>()
                .map_err(|_| fail(line, format!("`{cell}` is not a number")))
        };
        knots.push(number(t_column)?);
        vertices.push(
            columns
                .iter()
                .map(|&k| number(k))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    BaseCurve::polyline_with_knots(chart, vertices, knots).map_err(|e| InputError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parse `V1=0,V2=0.5` into a full base point; unnamed coordinates take
/// `defaults`.
pub fn base_point(text: &str, chart: &Chart, defaults: &[f64]) -> Result<Vec<f64>, InputError> {
    let mut out = defaults.to_vec();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| InputError::Usage(format!("expected NAME=VALUE, got `{part}`")))?;
        let index = chart
            .index_of(name.trim())
            .filter(|&i| i > 0)
            .ok_or_else(|| {
                InputError::Usage(format!("unknown base coordinate `{}`", name.trim()))
            })?;
        out[index - 1] = value
            .trim()
            .parse()
            .map_err(|_| InputError::Usage(format!("`{}` is not a number", value.trim())))?;
    }
    Ok(out)
}
