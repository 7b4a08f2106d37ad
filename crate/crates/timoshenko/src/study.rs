//! Benchmark runs and convergence sweeps.
//!
//! Each `(n, N)` pair is an independent run. With a parallel executor the
//! runs of a sweep go to the rayon pool; results are gathered in grid order.

use rayon::prelude::*;
use timoshenko_core::benchmarks::BenchmarkProblem;
use timoshenko_core::legendre::MAX_DEGREE;
use timoshenko_core::reporting::{
    estimate_spatial_decay, estimate_temporal_order, max_derivative_error, max_layer_error,
    ConvergenceStudy, ErrorRecord,
};
use timoshenko_core::timestepper::{run_with_errors, RunOptions, RunOutput, SchemeParameters};

use crate::error::AppError;
use crate::executor::Choice;

/// Outcome of one benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub steps: usize,
    pub modes: usize,
    pub output: RunOutput,
}

impl RunResult {
    pub fn records(&self) -> &[ErrorRecord] {
        &self.output.records
    }

    pub fn max_e1(&self) -> f64 {
        self.records().iter().map(|r| r.e1).fold(0.0, f64::max)
    }

    pub fn max_e2(&self) -> f64 {
        self.records().iter().map(|r| r.e2).fold(0.0, f64::max)
    }

    pub fn max_error(&self) -> f64 {
        max_layer_error(self.records())
    }

    pub fn max_derivative_error(&self) -> f64 {
        max_derivative_error(self.records())
    }
}

pub fn run_benchmark(
    problem: &BenchmarkProblem,
    params: &SchemeParameters,
    options: &RunOptions,
    exec: Choice,
) -> Result<RunResult, AppError> {
    let output = run_with_errors(problem, params, options, &exec)?;
    Ok(RunResult {
        steps: params.steps,
        modes: params.modes,
        output,
    })
}

fn run_all(
    problem: &BenchmarkProblem,
    grid: &[SchemeParameters],
    options: &RunOptions,
    exec: Choice,
) -> Result<Vec<RunResult>, AppError> {
    let one = |p: &SchemeParameters| run_benchmark(problem, p, options, exec);
    if exec.is_parallel() {
        grid.par_iter().map(one).collect()
    } else {
        grid.iter().map(one).collect()
    }
}

/// `n/4, n/2, n, 2n`.
pub fn temporal_grid(steps: usize) -> Result<Vec<usize>, AppError> {
    if !steps.is_multiple_of(4) || steps < 8 {
        return Err(AppError::usage("temporal study needs n divisible by 4 and at least 8"));
    }
    Ok(vec![steps / 4, steps / 2, steps, 2 * steps])
}

/// `N - 15, N - 10, N - 5, N`.
pub fn spatial_grid(modes: usize) -> Result<Vec<usize>, AppError> {
    if modes < 16 {
        return Err(AppError::usage("spatial study needs N of at least 16"));
    }
    Ok((0..4).rev().map(|i| modes - 5 * i).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalStudy {
    pub errors: ConvergenceStudy,
    pub derivative_errors: ConvergenceStudy,
    /// Error of the finest run repeated with `N + 10` modes.
    pub control: f64,
    pub runs: Vec<RunResult>,
}

/// Runs `base` with every `n` in `grid`, plus one control run at the finest
/// `n` with ten more modes.
pub fn temporal_study(
    problem: &BenchmarkProblem,
    base: &SchemeParameters,
    grid: &[usize],
    options: &RunOptions,
    exec: Choice,
) -> Result<TemporalStudy, AppError> {
    let finest = *grid.last().ok_or_else(|| AppError::usage("empty grid"))?;
    let mut params: Vec<SchemeParameters> = grid
        .iter()
        .map(|&n| SchemeParameters { steps: n, ..*base })
        .collect();
    params.push(SchemeParameters {
        steps: finest,
        modes: (base.modes + 10).min(MAX_DEGREE - 1),
        ..*base
    });
    let mut runs = run_all(problem, &params, options, exec)?;
    let control = runs.pop().expect("control run").max_error();
    let e: Vec<f64> = runs.iter().map(RunResult::max_error).collect();
    let de: Vec<f64> = runs.iter().map(RunResult::max_derivative_error).collect();
    Ok(TemporalStudy {
        errors: estimate_temporal_order(grid, &e, Some(control))?,
        derivative_errors: estimate_temporal_order(grid, &de, None)?,
        control,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialStudy {
    pub errors: ConvergenceStudy,
    pub runs: Vec<RunResult>,
}

pub fn spatial_study(
    problem: &BenchmarkProblem,
    base: &SchemeParameters,
    grid: &[usize],
    options: &RunOptions,
    exec: Choice,
) -> Result<SpatialStudy, AppError> {
    let params: Vec<SchemeParameters> = grid
        .iter()
        .map(|&m| SchemeParameters { modes: m, ..*base })
        .collect();
    let runs = run_all(problem, &params, options, exec)?;
    let e: Vec<f64> = runs.iter().map(RunResult::max_error).collect();
    Ok(SpatialStudy {
        errors: estimate_spatial_decay(grid, &e)?,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use timoshenko_core::benchmarks::make_machine_precision_case;

    #[test]
    fn grids() {
        assert_eq!(temporal_grid(256).unwrap(), vec![64, 128, 256, 512]);
        assert!(temporal_grid(10).is_err());
        assert_eq!(spatial_grid(35).unwrap(), vec![20, 25, 30, 35]);
        assert!(spatial_grid(15).is_err());
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let p = make_machine_precision_case();
        let base = p.default_parameters();
        let opts = RunOptions::default();
        let a = temporal_study(&p, &base, &[8, 16, 32], &opts, Choice::Serial).unwrap();
        let b = temporal_study(&p, &base, &[8, 16, 32], &opts, Choice::Rayon).unwrap();
        assert_eq!(a, b);
        assert!(a.runs.iter().all(|r| r.max_error() < 1e-12));
    }
}
