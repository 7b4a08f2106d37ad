//! Per-layer error records and convergence-order estimation.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Boundedness monitors at one layer, all computed in coefficient space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Monitors {
    /// `q_k = alpha + beta sum (u_m^k)^2`.
    pub q: f64,
    /// `|u^k - u^{k-1}| / tau`.
    pub du: f64,
    /// `|v^k - v^{k-1}| / tau`.
    pub dv: f64,
    /// `(sum (u_m^k)^2)^(1/2)`, i.e. `||u_x||`.
    pub au: f64,
    /// `(gamma ||v_x||^2 + delta ||v||^2)^(1/2)`.
    pub lv: f64,
}

impl Monitors {
    pub fn to_array(&self) -> [f64; 5] {
        [self.q, self.du, self.dv, self.au, self.lv]
    }

    /// Component-wise maximum.
    pub fn max(&self, other: &Monitors) -> Monitors {
        Monitors {
            q: self.q.max(other.q),
            du: self.du.max(other.du),
            dv: self.dv.max(other.dv),
            au: self.au.max(other.au),
            lv: self.lv.max(other.lv),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub k: usize,
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    /// Absent at the last layer, where no central difference exists.
    pub de1: Option<f64>,
    pub de2: Option<f64>,
    pub monitors: Monitors,
}

impl ErrorRecord {
    pub fn max_error(&self) -> f64 {
        self.e1.max(self.e2)
    }

    pub fn max_derivative_error(&self) -> Option<f64> {
        match (self.de1, self.de2) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

/// `max_k max(E1, E2)` over a record stream.
pub fn max_layer_error(records: &[ErrorRecord]) -> f64 {
    records.iter().map(ErrorRecord::max_error).fold(0.0, f64::max)
}

/// `max_k max(dE1, dE2)` over the layers that have a derivative error.
pub fn max_derivative_error(records: &[ErrorRecord]) -> f64 {
    records
        .iter()
        .filter_map(ErrorRecord::max_derivative_error)
        .fold(0.0, f64::max)
}

/// Running maximum of every monitor.
pub fn monitor_maxima(records: &[ErrorRecord]) -> Monitors {
    records
        .iter()
        .fold(Monitors::default(), |acc, r| acc.max(&r.monitors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    /// `n` doubles between runs.
    Temporal,
    /// `N` increases between runs.
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyFlag {
    /// The temporal sweep is polluted by spatial error.
    SpatialContamination,
    /// The spatial sweep has stalled on the time-discretisation error.
    TemporalFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub axis: StudyAxis,
    /// `n` or `N` values, strictly increasing.
    pub grid: Vec<usize>,
    /// Maximum error of each run.
    pub errors: Vec<f64>,
    /// Pairwise orders between consecutive runs.
    pub orders: Vec<f64>,
    /// Median of `orders`.
    pub summary: f64,
    pub flags: Vec<StudyFlag>,
}

impl ConvergenceStudy {
    pub fn is_flagged(&self, flag: StudyFlag) -> bool {
        self.flags.contains(&flag)
    }
}

fn validate(grid: &[usize], errors: &[f64], min_runs: usize) -> Result<()> {
    if grid.len() != errors.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            found: errors.len(),
        });
    }
    if grid.len() < min_runs {
        return Err(Error::argument(alloc::format!(
            "a convergence study needs at least {min_runs} runs"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument("study grid must be strictly increasing"));
    }
    if errors.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::argument("errors must be finite and non-negative"));
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Orders `p_i = log(e_i / e_{i+1}) / log(n_{i+1} / n_i)`; with `n`
/// doubling this is `log2(e_i / e_{i+1})`.
///
/// `control` is the error of the finest run repeated with a larger `N`. If
/// it differs from the finest error by more than 1%, or the errors stop
/// decreasing, the study is flagged as spatially contaminated.
pub fn estimate_temporal_order(
    grid: &[usize],
    errors: &[f64],
    control: Option<f64>,
) -> Result<ConvergenceStudy> {
    validate(grid, errors, 2)?;
    let orders: Vec<f64> = pairwise(grid, errors, |e0, e1| (e0 / e1).ln());
    let mut flags = Vec::new();
    let finest = errors[errors.len() - 1];
    let contaminated = errors.windows(2).any(|w| w[1] >= w[0])
        || control.is_some_and(|c| (c - finest).abs() > 0.01 * finest);
    if contaminated {
        flags.push(StudyFlag::SpatialContamination);
    }
    Ok(ConvergenceStudy {
        axis: StudyAxis::Temporal,
        grid: grid.to_vec(),
        errors: errors.to_vec(),
        summary: median(&orders),
        orders,
        flags,
    })
}

/// Decay slopes `-d log(e) / d log(N)` between consecutive runs.
///
/// Flags a temporal floor when the last `N` increment reduced the error by
/// less than a factor of two.
pub fn estimate_spatial_decay(grid: &[usize], errors: &[f64]) -> Result<ConvergenceStudy> {
    validate(grid, errors, 2)?;
    let orders: Vec<f64> = pairwise(grid, errors, |e0, e1| (e0 / e1).ln());
    let mut flags = Vec::new();
    let n = errors.len();
    if errors[n - 1] > 0.5 * errors[n - 2] {
        flags.push(StudyFlag::TemporalFloor);
    }
    Ok(ConvergenceStudy {
        axis: StudyAxis::Spatial,
        grid: grid.to_vec(),
        errors: errors.to_vec(),
        summary: median(&orders),
        orders,
        flags,
    })
}

fn pairwise(grid: &[usize], errors: &[f64], log_ratio: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    grid.windows(2)
        .zip(errors.windows(2))
        .map(|(g, e)| log_ratio(e[0], e[1]) / (g[1] as f64 / g[0] as f64).ln())
        .collect()
}
