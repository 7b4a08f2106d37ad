//! Run configuration: command-line flags over a JSON file over the
//! defaults of the selected benchmark.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use timoshenko_core::benchmarks::{make_benchmark, make_machine_precision_case, BenchmarkProblem};
use timoshenko_core::legendre::Integrator;
use timoshenko_core::timestepper::{PhysicalConstants, SchemeParameters};

use crate::error::AppError;
use crate::report::Format;

pub const OUT_DIR_VAR: &str = "TIMOSHENKO_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Run,
    TemporalStudy,
    SpatialStudy,
    AbstractDemo,
    MachinePrecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

/// Nonlinear Timoshenko beam solver: benchmark runs and convergence studies.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "timoshenko", version)]
pub struct Cli {
    /// Benchmark problem (1, 2 or 3).
    #[arg(long)]
    pub test: Option<u32>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Number of time steps.
    #[arg(long = "n")]
    pub steps: Option<usize>,
    /// Number of spectral modes.
    #[arg(long = "N")]
    pub modes: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    pub final_time: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a2: Option<f64>,
    /// Absolute quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory [default: $TIMOSHENKO_OUT_DIR, then "."].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_enum)]
    pub parallel: Option<Switch>,
    /// Also write every coefficient layer.
    #[arg(long)]
    pub record_trajectory: bool,
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub test: Option<u32>,
    pub mode: Option<Mode>,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub modes: Option<usize>,
    #[serde(rename = "T")]
    pub final_time: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub parallel: Option<Switch>,
    #[serde(rename = "record-trajectory")]
    pub record_trajectory: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::usage(format!("{}: {e}", path.display())))
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Absent only in modes that do not use a benchmark.
    pub test: Option<u32>,
    pub steps: Option<usize>,
    pub modes: Option<usize>,
    pub final_time: Option<f64>,
    pub constants: PhysicalConstants,
    pub tol: Option<f64>,
    pub out: PathBuf,
    pub format: Format,
    pub parallel: bool,
    pub record_trajectory: bool,
}

/// Parses `args` (program name first) and an optional config file named in
/// them. `env_out` is the value of [`OUT_DIR_VAR`].
pub fn parse_config<I, T>(args: I, env_out: Option<PathBuf>) -> Result<RunConfig, AppError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| AppError::usage(e.to_string()))?;
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    RunConfig::resolve(&cli, &file, env_out)
}

impl RunConfig {
    pub fn resolve(cli: &Cli, file: &FileConfig, env_out: Option<PathBuf>) -> Result<Self, AppError> {
        let mode = cli.mode.or(file.mode).unwrap_or(Mode::Run);
        let test = cli.test.or(file.test);
        let defaults = PhysicalConstants::default();
        let constants = PhysicalConstants {
            alpha: cli.alpha.or(file.alpha).unwrap_or(defaults.alpha),
            beta: cli.beta.or(file.beta).unwrap_or(defaults.beta),
            gamma: cli.gamma.or(file.gamma).unwrap_or(defaults.gamma),
            delta: cli.delta.or(file.delta).unwrap_or(defaults.delta),
            a1: cli.a1.or(file.a1).unwrap_or(defaults.a1),
            a2: cli.a2.or(file.a2).unwrap_or(defaults.a2),
        };
        let config = RunConfig {
            mode,
            test,
            steps: cli.steps.or(file.n),
            modes: cli.modes.or(file.modes),
            final_time: cli.final_time.or(file.final_time),
            constants,
            tol: cli.tol.or(file.tol),
            out: cli
                .out
                .clone()
                .or_else(|| file.out.clone())
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(".")),
            format: cli.format.map(Format::from).or(file.format).unwrap_or(Format::Csv),
            parallel: cli.parallel.or(file.parallel).unwrap_or(Switch::Off) == Switch::On,
            record_trajectory: cli.record_trajectory || file.record_trajectory.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }

    fn needs_test(&self) -> bool {
        matches!(self.mode, Mode::Run | Mode::TemporalStudy | Mode::SpatialStudy)
    }

    fn validate(&self) -> Result<(), AppError> {
        if self.needs_test() && self.test.is_none() {
            return Err(AppError::usage("--test is required in this mode"));
        }
        if let Some(t) = self.test {
            make_benchmark(t).map_err(|e| AppError::usage(e.to_string()))?;
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(AppError::usage("--tol must be positive"));
            }
        }
        if self.mode == Mode::AbstractDemo {
            self.constants
                .validate()
                .map_err(|e| AppError::usage(e.to_string()))?;
            if let Some(t) = self.final_time {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(AppError::usage("--T must be positive"));
                }
            }
            return Ok(());
        }
        let problem = self.problem()?;
        self.parameters(&problem)
            .validate()
            .map_err(|e| AppError::usage(e.to_string()))
    }

    /// The benchmark with the configured constants and final time.
    pub fn problem(&self) -> Result<BenchmarkProblem, AppError> {
        let base = match (self.mode, self.test) {
            (Mode::MachinePrecision, _) => make_machine_precision_case(),
            (_, Some(t)) => make_benchmark(t).map_err(|e| AppError::usage(e.to_string()))?,
            (_, None) => return Err(AppError::usage("no benchmark selected")),
        };
        let problem = base.with_constants(self.constants);
        match self.final_time {
            Some(t) => problem
                .with_final_time(t)
                .map_err(|e| AppError::usage(e.to_string())),
            None => Ok(problem),
        }
    }

    /// The benchmark's defaults with the configured overrides applied.
    pub fn parameters(&self, problem: &BenchmarkProblem) -> SchemeParameters {
        let mut p = problem.default_parameters();
        p.constants = self.constants;
        if let Some(n) = self.steps {
            p.steps = n;
        }
        if let Some(m) = self.modes {
            p.modes = m;
        }
        p
    }

    pub fn integrator(&self) -> Integrator {
        match self.tol {
            Some(tol) => Integrator::default()
                .with_tolerance(tol)
                .expect("validated tolerance"),
            None => Integrator::default(),
        }
    }
}
