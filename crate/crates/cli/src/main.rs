mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatgauge::connection::flatness;
use heatgauge::entropy::reconstruct;
use heatgauge::harness::{jauch_test, phase_demo};
use heatgauge::lift::{lift_from, work_integral, LiftOptions, CLOSURE_TOLERANCE};
use heatgauge::LoopFamily;

use input::{base_point, load_builtin, load_curve, load_system, InputError, Setup};

/// Heat one-forms, adiabatic connections and their holonomy.
///
/// Exit status: 0 flat / pass / holds, 2 curved / fail / violated, 1 input error.
#[derive(Debug, Parser)]
#[command(name = "heatgauge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curvature and Frobenius defect on the region grid.
    Check(Common),
    /// Horizontal lift of a base curve.
    Lift {
        #[command(flatten)]
        common: Common,
        /// Curve file (CSV polyline or TOML [curve]).
        #[arg(long)]
        curve: PathBuf,
        /// Starting energy (default: centre of the energy range).
        #[arg(long, allow_hyphen_values = true)]
        u0: Option<f64>,
    },
    /// Energy displacement after lifting a closed base loop.
    Holonomy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        u0: Option<f64>,
    },
    /// Do closed adiabats over closed work loops perform zero work?
    Jauch {
        #[command(flatten)]
        common: Common,
        /// `default`, `circle`, or a curve file holding one closed loop.
        #[arg(long, default_value = "default")]
        loops: String,
        /// Seed for the default loop family.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        u0: Option<f64>,
    },
    /// Reconstruct entropy and temperature on the region grid.
    Entropy {
        #[command(flatten)]
        common: Common,
        /// Reference base point, e.g. `V1=0,V2=0` (default: region centre).
        #[arg(long = "ref", allow_hyphen_values = true)]
        reference: Option<String>,
    },
    /// Energy gained per revolution of the periodic base coordinate.
    Phase {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        revs: usize,
        #[arg(long, allow_hyphen_values = true)]
        u0: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// System file (TOML).
    #[arg(required_unless_present = "system")]
    file: Option<PathBuf>,
    /// Built-in system: ideal_gas, contact3, flat3, wankel, zero_work.
    #[arg(long, conflicts_with = "file")]
    system: Option<String>,
    /// Torque expression in `theta` for the built-in wankel system.
    #[arg(long)]
    tau: Option<String>,
    /// Grid nodes per axis (overrides the system file).
    #[arg(long)]
    grid: Option<usize>,
    /// Write the detail table as CSV to this file; `-` sends it to stdout and
    /// the report to stderr.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Common {
    fn setup(&self) -> Result<Setup, InputError> {
        let mut setup = match (&self.file, &self.system) {
            (Some(path), _) => {
                if self.tau.is_some() {
                    return Err(InputError::Usage(
                        "--tau only applies to --system wankel".into(),
                    ));
                }
                load_system(path)?
            }
            (None, Some(name)) => load_builtin(name, self.tau.as_deref())?,
            (None, None) => {
                return Err(InputError::Usage(
                    "give a system file or --system NAME".into(),
                ))
            }
        };
        if let Some(g) = self.grid {
            if g == 0 {
                return Err(InputError::Usage("--grid needs at least one node".into()));
            }
            setup.grid = g;
        }
        Ok(setup)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Core(#[from] heatgauge::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

/// Where the text report and the CSV table go.
struct Output {
    report: Box<dyn Write>,
    csv: Option<Box<dyn Write>>,
}

impl Output {
    fn new(csv: Option<&Path>) -> Result<Output, CliError> {
        Ok(match csv {
            Some(p) if p == Path::new("-") => Output {
                report: Box::new(io::stderr()),
                csv: Some(Box::new(io::stdout())),
            },
            Some(p) => {
                let file = File::create(p).map_err(|source| InputError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Output {
                    report: Box::new(io::stdout()),
                    csv: Some(Box::new(BufWriter::new(file))),
                }
            }
            None => Output {
                report: Box::new(io::stdout()),
                csv: None,
            },
        })
    }

    fn report(&mut self, text: impl std::fmt::Display) -> io::Result<()> {
        writeln!(self.report, "{text}")
    }

    fn table(&mut self, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
        if let Some(out) = self.csv.as_mut() {
            write(out)?;
            out.flush()?;
        }
        Ok(())
    }
}

fn start_energy(setup: &Setup, u0: Option<f64>) -> f64 {
    u0.unwrap_or_else(|| setup.region.center().values()[0])
}

fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Check(common) => {
            let setup = common.setup()?;
            let mut out = Output::new(common.csv.as_deref())?;
            let report = flatness(
                &setup.system,
                &setup.region,
                setup.grid,
                setup.tolerances.flatness,
            )?;
            out.report(&report)?;
            out.table(|w| report.write_csv(w))?;
            Ok(Status::from(report.is_flat()))
        }
        Command::Lift { common, curve, u0 } => {
            let setup = common.setup()?;
            let curve = load_curve(&curve, setup.system.chart())?;
            let mut out = Output::new(common.csv.as_deref())?;
            let lifted = lift_from(
                &setup.system,
                &curve,
                start_energy(&setup, u0),
                &LiftOptions::default(),
            )?;
            out.report(format_args!(
                "dU = {:?}, work = {:?}, heat = {:?}, error estimate = {:e}",
                lifted.delta_u, lifted.work_integral, lifted.heat_integral, lifted.error_estimate
            ))?;
            out.table(|w| lifted.write_csv(w))?;
            Ok(Status::Pass)
        }
        Command::Holonomy { common, curve, u0 } => {
            let setup = common.setup()?;
            let curve = load_curve(&curve, setup.system.chart())?;
            let gap = curve.closure_gap()?;
            if gap > CLOSURE_TOLERANCE {
                return Err(heatgauge::Error::NotClosed { gap }.into());
            }
            let mut out = Output::new(common.csv.as_deref())?;
            let lifted = lift_from(
                &setup.system,
                &curve,
                start_energy(&setup, u0),
                &LiftOptions::default(),
            )?;
            let work = work_integral(&setup.system, &lifted)?;
            let closes = lifted.delta_u.abs() <= setup.tolerances.holonomy;
            out.report(format_args!(
                "system: {}\ndU = {:?}\nwork = {:?}\nerror estimate = {:e}\nclosure: {} (tolerance {:e})",
                setup.system.name(),
                lifted.delta_u,
                work,
                lifted.error_estimate,
                if closes { "closes" } else { "fails" },
                setup.tolerances.holonomy
            ))?;
            out.table(|w| lifted.write_csv(w))?;
            Ok(Status::from(closes))
        }
        Command::Jauch {
            common,
            loops,
            seed,
            u0,
        } => {
            let setup = common.setup()?;
            let family = match loops.as_str() {
                "default" => LoopFamily::default_for(&setup.region, seed)?,
                "circle" => LoopFamily::circle(&setup.region)?,
                path => {
                    let curve = load_curve(Path::new(path), setup.system.chart())?;
                    LoopFamily::new(path, vec![curve])
                }
            };
            let mut out = Output::new(common.csv.as_deref())?;
            let report = jauch_test(
                &setup.system,
                &family,
                start_energy(&setup, u0),
                setup.tolerances.holonomy,
            )?;
            out.report(&report)?;
            out.table(|w| report.write_csv(w))?;
            Ok(Status::from(report.holds()))
        }
        Command::Entropy { common, reference } => {
            let setup = common.setup()?;
            let center = setup.region.center();
            let reference = base_point(
                reference.as_deref().unwrap_or(""),
                setup.system.chart(),
                &center.values()[1..],
            )?;
            let mut out = Output::new(common.csv.as_deref())?;
            let chart = reconstruct(&setup.system, &reference, &setup.region, setup.grid)?
                .with_tolerance(setup.tolerances.residual);
            out.report(&chart)?;
            out.table(|w| chart.write_csv(w))?;
            Ok(Status::from(chart.summary().passed))
        }
        Command::Phase { common, revs, u0 } => {
            let setup = common.setup()?;
            let mut out = Output::new(common.csv.as_deref())?;
            let report = phase_demo(
                &setup.system,
                &setup.region,
                revs,
                start_energy(&setup, u0),
                setup.grid,
                &setup.tolerances,
            )?;
            out.report(&report)?;
            out.table(|w| report.write_csv(w))?;
            Ok(Status::from(report.closes))
        }
    }
}

fn main() -> ExitCode {
    // usage errors are input errors (1); 2 is reserved for a failing verdict
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
