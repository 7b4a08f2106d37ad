//! What the binary does once the configuration is known.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use timoshenko_core::benchmarks::BenchmarkProblem;
use timoshenko_core::reporting::{ConvergenceStudy, StudyFlag};
use timoshenko_core::timestepper::{RunOptions, SchemeParameters};

use crate::config::{Mode, RunConfig};
use crate::demo::{boundedness_study, DemoSettings, MONITOR_NAMES};
use crate::error::AppError;
use crate::executor::Choice;
use crate::report::{self, format_real};
use crate::study::{self, RunResult};

/// Runs `config`, writing files under `config.out` and a human-readable
/// summary to `console`. Returns the paths written.
pub fn execute<W: Write>(config: &RunConfig, console: &mut W) -> Result<Vec<PathBuf>, AppError> {
    let exec = Choice::from_flag(config.parallel);
    match config.mode {
        Mode::Run | Mode::MachinePrecision => single_run(config, exec, console),
        Mode::TemporalStudy => temporal(config, exec, console),
        Mode::SpatialStudy => spatial(config, exec, console),
        Mode::AbstractDemo => abstract_demo(config, exec, console),
    }
}

fn say<W: Write>(console: &mut W, line: std::fmt::Arguments<'_>) -> Result<(), AppError> {
    writeln!(console, "{line}").map_err(|e| AppError::io("<stdout>", e))
}

fn options(config: &RunConfig) -> RunOptions {
    RunOptions {
        integrator: config.integrator(),
        record_trajectory: config.record_trajectory,
        ..RunOptions::default()
    }
}

fn setup(config: &RunConfig) -> Result<(BenchmarkProblem, SchemeParameters), AppError> {
    let problem = config.problem()?;
    let params = config.parameters(&problem);
    Ok((problem, params))
}

/// Errors file, profile at the last layer and, if recorded, the trajectory.
pub fn write_run(
    config: &RunConfig,
    problem: &BenchmarkProblem,
    params: &SchemeParameters,
    result: &RunResult,
) -> Result<Vec<PathBuf>, AppError> {
    let label = problem.id().label();
    let (n, m) = (result.steps, result.modes);
    let dir = &config.out;
    let mut paths = vec![report::write_file(
        dir,
        &report::errors_file_name(label, n, m, config.format),
        |w| report::write_errors(result.records(), config.format, w),
    )?];
    let state = &result.output.state;
    let rows = report::profile_rows(problem, &state.u, &state.v, params.time(state.k))?;
    paths.push(report::write_file(
        dir,
        &report::profile_file_name(label, n, m, config.format),
        |w| report::write_profile(&rows, config.format, w),
    )?);
    if let Some(layers) = &result.output.trajectory {
        paths.push(report::write_file(
            dir,
            &report::trajectory_file_name(label, n, m),
            |w| report::write_trajectory(layers, params.tau(), w),
        )?);
    }
    Ok(paths)
}

fn single_run<W: Write>(config: &RunConfig, exec: Choice, console: &mut W) -> Result<Vec<PathBuf>, AppError> {
    let (problem, params) = setup(config)?;
    let start = Instant::now();
    let result = study::run_benchmark(&problem, &params, &options(config), exec)?;
    let wall = start.elapsed().as_secs_f64();
    for d in &result.output.diagnostics {
        say(
            console,
            format_args!(
                "warning: {:?} does not vanish at the boundary ({:e}); projected with the boundary part removed",
                d.term,
                d.boundary.max_abs()
            ),
        )?;
    }
    let paths = write_run(config, &problem, &params, &result)?;
    say(
        console,
        format_args!(
            "{} n={} N={}: max E1 = {:.3e}, max E2 = {:.3e}, wall {:.2} s",
            problem.id().label(),
            params.steps,
            params.modes,
            result.max_e1(),
            result.max_e2(),
            wall
        ),
    )?;
    Ok(paths)
}

fn print_flags<W: Write>(console: &mut W, study: &ConvergenceStudy) -> Result<(), AppError> {
    for flag in &study.flags {
        let text = match flag {
            StudyFlag::SpatialContamination => "spatial error contaminates the temporal study",
            StudyFlag::TemporalFloor => "temporal floor reached",
        };
        say(console, format_args!("flag: {text}"))?;
    }
    Ok(())
}

fn fmt_order(orders: &[f64], i: usize) -> String {
    i.checked_sub(1)
        .map(|j| format!("{:.3}", orders[j]))
        .unwrap_or_else(|| "-".to_owned())
}

fn temporal<W: Write>(config: &RunConfig, exec: Choice, console: &mut W) -> Result<Vec<PathBuf>, AppError> {
    let (problem, params) = setup(config)?;
    let grid = study::temporal_grid(params.steps)?;
    let s = study::temporal_study(&problem, &params, &grid, &options(config), exec)?;
    let mut paths = Vec::new();
    for run in &s.runs {
        paths.extend(write_run(config, &problem, &SchemeParameters { steps: run.steps, ..params }, run)?);
    }
    let label = problem.id().label();
    paths.push(report::write_file(
        &config.out,
        &format!("{label}_{}_temporal_study.csv", params.modes),
        |w| report::write_study(&s.errors, Some(&s.derivative_errors), w),
    )?);
    say(console, format_args!("{label} N={}: temporal study", params.modes))?;
    say(console, format_args!("{:>8} {:>12} {:>8} {:>12} {:>8}", "n", "max E", "order", "max dE", "order"))?;
    for (i, n) in grid.iter().enumerate() {
        say(
            console,
            format_args!(
                "{:>8} {:>12.4e} {:>8} {:>12.4e} {:>8}",
                n,
                s.errors.errors[i],
                fmt_order(&s.errors.orders, i),
                s.derivative_errors.errors[i],
                fmt_order(&s.derivative_errors.orders, i)
            ),
        )?;
    }
    say(
        console,
        format_args!(
            "median order: E {:.3}, dE {:.3}; control at N={}: {:.4e}",
            s.errors.summary,
            s.derivative_errors.summary,
            (params.modes + 10),
            s.control
        ),
    )?;
    print_flags(console, &s.errors)?;
    Ok(paths)
}

fn spatial<W: Write>(config: &RunConfig, exec: Choice, console: &mut W) -> Result<Vec<PathBuf>, AppError> {
    let (problem, params) = setup(config)?;
    let grid = study::spatial_grid(params.modes)?;
    let s = study::spatial_study(&problem, &params, &grid, &options(config), exec)?;
    let mut paths = Vec::new();
    for run in &s.runs {
        paths.extend(write_run(config, &problem, &SchemeParameters { modes: run.modes, ..params }, run)?);
    }
    let label = problem.id().label();
    paths.push(report::write_file(
        &config.out,
        &format!("{label}_{}_spatial_study.csv", params.steps),
        |w| report::write_study(&s.errors, None, w),
    )?);
    say(console, format_args!("{label} n={}: spatial study", params.steps))?;
    say(console, format_args!("{:>8} {:>12} {:>8}", "N", "max E", "slope"))?;
    for (i, m) in grid.iter().enumerate() {
        say(
            console,
            format_args!(
                "{:>8} {:>12.4e} {:>8}",
                m,
                s.errors.errors[i],
                fmt_order(&s.errors.orders, i)
            ),
        )?;
    }
    print_flags(console, &s.errors)?;
    Ok(paths)
}

fn abstract_demo<W: Write>(config: &RunConfig, exec: Choice, console: &mut W) -> Result<Vec<PathBuf>, AppError> {
    let settings = DemoSettings {
        final_time: config.final_time.unwrap_or(1.0),
        constants: config.constants,
        ..DemoSettings::default()
    };
    let results = boundedness_study(&settings, exec)?;
    let path = report::write_file(&config.out, "abstract_demo.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["triple".to_owned(), "n".to_owned(), "tau".to_owned()];
        header.extend(MONITOR_NAMES.iter().map(|m| format!("mon_{m}")));
        w.write_record(&header)?;
        for r in &results {
            for (n, m) in settings.steps.iter().zip(&r.maxima) {
                let mut row = vec![
                    r.index.to_string(),
                    n.to_string(),
                    format_real(settings.final_time / *n as f64),
                ];
                row.extend(m.to_array().map(format_real));
                w.write_record(&row)?;
            }
        }
        w.flush()
    })?;
    let mut worst = [0.0f64; 6];
    for r in &results {
        for (w, s) in worst.iter_mut().zip(r.spread()) {
            *w = w.max(s);
        }
    }
    say(
        console,
        format_args!(
            "abstract scheme: {} triples of dimension {}, n in {:?}",
            settings.triples, settings.dim, settings.steps
        ),
    )?;
    for (name, w) in MONITOR_NAMES.iter().zip(worst) {
        say(console, format_args!("  {name:>4}: worst spread of running maxima {:.2}%", 100.0 * w))?;
    }
    Ok(vec![path])
}
