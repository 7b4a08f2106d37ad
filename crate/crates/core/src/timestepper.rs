//! Three-layer time stepping in Legendre coefficient space.
//!
//! With `w1 = u^{k+1} + u^{k-1}` and `w2 = v^{k+1} + v^{k-1}` each step
//! solves two independent gap systems
//!
//! ```text
//! (H + 2 tau^2 q_k / l^2) w1 = 4 tau^2 / l^2 I1 + 2 H u^k - 2 a1 tau^2 / l B v^k
//! (H + a0 tau^2 gamma / l^2) w2 = 2 a0 tau^2 / l^2 I2 + a0 H v^k + a0 a2 tau^2 / l B u^k
//! ```
//!
//! where `a0 = 4 / (2 + delta tau^2)`, `q_k = alpha + beta sum (u_m^k)^2` and
//! `I_j` holds the inner products of the forcings with the basis at `t_k`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::basis::{
    project_discarding_boundary, project_onto_basis, sample_scale, BasisEvaluator,
    BoundaryValues, SpectralCoefficients, COMPATIBILITY_TOLERANCE,
};
use crate::benchmarks::{error_integrator, layer_errors, Neighbors};
use crate::error::{Error, Result};
use crate::galerkin::{build_shifted_system, solve_gap_tridiagonal_with, GalerkinOperatorSet};
use crate::legendre::{Integrator, Interval, MAX_DEGREE};
use crate::linalg::norm;
use crate::reporting::{ErrorRecord, Monitors};
use crate::Executor;

/// Coefficients of the beam system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
            a1: 1.0,
            a2: 1.0,
        }
    }
}

impl PhysicalConstants {
    /// `alpha` and `gamma` must be positive, `beta` and `delta`
    /// non-negative, `a1` and `a2` finite.
    pub fn validate(&self) -> Result<()> {
        let c = self;
        if !(c.alpha > 0.0 && c.alpha.is_finite() && c.gamma > 0.0 && c.gamma.is_finite()) {
            return Err(Error::argument("alpha and gamma must be positive"));
        }
        if !(c.beta >= 0.0 && c.beta.is_finite() && c.delta >= 0.0 && c.delta.is_finite()) {
            return Err(Error::argument("beta and delta must be non-negative"));
        }
        if !(c.a1.is_finite() && c.a2.is_finite()) {
            return Err(Error::argument("a1 and a2 must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParameters {
    pub constants: PhysicalConstants,
    /// Beam length `l`.
    pub length: f64,
    /// Final time `T`.
    pub final_time: f64,
    /// Number of time steps `n`; `tau = T / n`.
    pub steps: usize,
    /// Basis size `N`.
    pub modes: usize,
}

impl SchemeParameters {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::argument("length must be positive"));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::argument("final time must be positive"));
        }
        if self.steps < 2 {
            return Err(Error::argument("at least two time steps are required"));
        }
        if self.modes == 0 {
            return Err(Error::argument("basis size must be at least 1"));
        }
        if self.modes >= MAX_DEGREE {
            return Err(Error::DegreeTooLarge(self.modes + 1));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    /// `t_k = k tau`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau()
    }
}

/// Initial data and derivatives at one point: `u(x, 0)`, `u_t(x, 0)` and
/// the same for `v`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialSample {
    pub u0: f64,
    pub u0_x: f64,
    pub u0_xx: f64,
    pub u1: f64,
    pub u1_x: f64,
    pub v0: f64,
    pub v0_x: f64,
    pub v0_xx: f64,
    pub v1: f64,
    pub v1_x: f64,
}

/// A field and its derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub value: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dt: f64,
    pub dtt: f64,
    pub dxt: f64,
}

/// Per-time data a problem may precompute once before the forcing is
/// sampled in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSlice {
    pub t: f64,
    /// Problem-defined auxiliary value; the benchmarks store
    /// `alpha + beta int u_x^2` of the exact solution here.
    pub nonlocal: f64,
}

pub trait BeamProblem {
    fn length(&self) -> f64;

    fn initial(&self, x: f64) -> InitialSample;

    fn forcing_slice(&self, t: f64) -> Result<ForcingSlice>;

    /// `(f1, f2)` at `(x, slice.t)`.
    fn forcing(&self, slice: &ForcingSlice, x: f64) -> [f64; 2];
}

pub trait ExactSolution: BeamProblem {
    /// `[u, v]` at `(x, t)`.
    fn exact(&self, x: f64, t: f64) -> [FieldSample; 2];
}

/// Layers `k - 1` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStepState {
    pub k: usize,
    pub u_prev: SpectralCoefficients,
    pub u: SpectralCoefficients,
    pub v_prev: SpectralCoefficients,
    pub v: SpectralCoefficients,
    /// `q_k`, always `>= alpha`.
    pub q: f64,
}

impl TimeStepState {
    pub fn new(
        k: usize,
        u_prev: SpectralCoefficients,
        u: SpectralCoefficients,
        v_prev: SpectralCoefficients,
        v: SpectralCoefficients,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        let modes = u.modes();
        for c in [&u_prev, &v_prev, &v] {
            if c.modes() != modes {
                return Err(Error::Dimension {
                    expected: modes,
                    found: c.modes(),
                });
            }
        }
        let q = compute_q(&u, constants.alpha, constants.beta);
        Ok(Self {
            k,
            u_prev,
            u,
            v_prev,
            v,
            q,
        })
    }

    pub fn modes(&self) -> usize {
        self.u.modes()
    }
}

/// `alpha + beta sum u_m^2`; by Parseval `sum u_m^2 = int u_x^2`.
pub fn compute_q(u: &SpectralCoefficients, alpha: f64, beta: f64) -> f64 {
    alpha + beta * u.energy()
}

/// Which auxiliary function of the initial-layer construction a
/// diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialTerm {
    /// `u_t(., 0)`.
    U1,
    /// `v_t(., 0)`.
    V1,
    /// `u_tt(., 0)` reconstructed from the equation.
    U2,
    /// `v_tt(., 0)` reconstructed from the equation.
    V2,
}

/// A function that did not vanish at the endpoints and was projected
/// anyway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostic {
    pub term: InitialTerm,
    pub boundary: BoundaryValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialLayers {
    pub u0: SpectralCoefficients,
    pub u1: SpectralCoefficients,
    pub v0: SpectralCoefficients,
    pub v1: SpectralCoefficients,
    /// `alpha + beta int (u_x(., 0))^2`, by quadrature.
    pub q0: f64,
    pub diagnostics: Vec<Diagnostic>,
}

/// Second-order starting layers `u^1 = u0 + tau u1 + tau^2/2 u2`, with
/// `u2`, `v2` taken from the equations at `t = 0`.
///
/// `u0` and `v0` must vanish at the endpoints. The other four functions are
/// projected regardless; endpoint mismatches become [`Diagnostic`]s.
pub fn initial_layers<P: BeamProblem + ?Sized>(
    problem: &P,
    params: &SchemeParameters,
    integrator: &Integrator,
) -> Result<InitialLayers> {
    params.validate()?;
    let c = params.constants;
    let (modes, length, tau) = (params.modes, params.length, params.tau());

    let u0 = project_onto_basis(
        &|x| problem.initial(x).u0,
        Some(&|x| problem.initial(x).u0_x),
        modes,
        length,
        integrator,
    )?;
    let v0 = project_onto_basis(
        &|x| problem.initial(x).v0,
        Some(&|x| problem.initial(x).v0_x),
        modes,
        length,
        integrator,
    )?;

    let gradient = integrator.integrate(
        |x| problem.initial(x).u0_x.powi(2),
        Interval::from_length(length)?,
    )?;
    let q0 = c.alpha + c.beta * gradient;
    let slice = problem.forcing_slice(0.0)?;

    let u2 = |x: f64| {
        let s = problem.initial(x);
        problem.forcing(&slice, x)[0] - c.a1 * s.v0_x + q0 * s.u0_xx
    };
    let v2 = |x: f64| {
        let s = problem.initial(x);
        problem.forcing(&slice, x)[1] + c.a2 * s.u0_x + c.gamma * s.v0_xx - c.delta * s.v0
    };
    let u1 = |x: f64| problem.initial(x).u1;
    let u1_x = |x: f64| problem.initial(x).u1_x;
    let v1 = |x: f64| problem.initial(x).v1;
    let v1_x = |x: f64| problem.initial(x).v1_x;

    // u2 and v2 are small differences of large terms; tolerances and the
    // compatibility threshold follow the size of the terms.
    let u2_terms = |x: f64| {
        let s = problem.initial(x);
        problem.forcing(&slice, x)[0].abs() + (c.a1 * s.v0_x).abs() + (q0 * s.u0_xx).abs()
    };
    let v2_terms = |x: f64| {
        let s = problem.initial(x);
        problem.forcing(&slice, x)[1].abs()
            + (c.a2 * s.u0_x).abs()
            + (c.gamma * s.v0_xx).abs()
            + (c.delta * s.v0).abs()
    };

    let mut diagnostics = Vec::new();
    let mut lenient = |term: InitialTerm,
                       g: &dyn Fn(f64) -> f64,
                       dg: Option<&dyn Fn(f64) -> f64>,
                       scale: f64|
     -> Result<SpectralCoefficients> {
        let scaled = integrator
            .clone()
            .with_tolerance(integrator.tolerance() * scale)?;
        let (coeffs, boundary) = project_discarding_boundary(g, dg, modes, length, &scaled)?;
        if boundary.max_abs() > COMPATIBILITY_TOLERANCE * scale {
            diagnostics.push(Diagnostic { term, boundary });
        }
        Ok(coeffs)
    };
    let du = lenient(InitialTerm::U1, &u1, Some(&u1_x), sample_scale(&u1, length))?;
    let dv = lenient(InitialTerm::V1, &v1, Some(&v1_x), sample_scale(&v1, length))?;
    let ddu = lenient(InitialTerm::U2, &u2, None, sample_scale(&u2_terms, length))?;
    let ddv = lenient(InitialTerm::V2, &v2, None, sample_scale(&v2_terms, length))?;

    let taylor = |c0: &SpectralCoefficients, c1: &SpectralCoefficients, c2: &SpectralCoefficients| {
        let values = c0
            .values()
            .iter()
            .zip(c1.values())
            .zip(c2.values())
            .map(|((a, b), d)| a + tau * b + 0.5 * tau * tau * d)
            .collect();
        SpectralCoefficients::new(length, values)
    };
    let u1 = taylor(&u0, &du, &ddu)?;
    let v1 = taylor(&v0, &dv, &ddv)?;
    Ok(InitialLayers {
        u0,
        u1,
        v0,
        v1,
        q0,
        diagnostics,
    })
}

/// `[(f1, phi_m)]_m` and `[(f2, phi_m)]_m` at the time of `slice`.
pub fn forcing_projections<P: BeamProblem + ?Sized>(
    problem: &P,
    slice: &ForcingSlice,
    modes: usize,
    length: f64,
    integrator: &Integrator,
) -> Result<[Vec<f64>; 2]> {
    let mut eval = BasisEvaluator::new(modes, length)?;
    let mut phi = vec![0.0; modes];
    let mut failure = None;
    let flat = integrator.integrate_vector(
        |x, out| {
            if let Err(e) = eval.phi(x, &mut phi) {
                failure = Some(e);
            }
            let [f1, f2] = problem.forcing(slice, x);
            let (o1, o2) = out.split_at_mut(modes);
            for ((a, b), p) in o1.iter_mut().zip(o2.iter_mut()).zip(&phi) {
                *a = f1 * p;
                *b = f2 * p;
            }
        },
        2 * modes,
        Interval::from_length(length)?,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let second = flat[modes..].to_vec();
    let mut first = flat;
    first.truncate(modes);
    Ok([first, second])
}

/// Right-hand sides and diagonal shifts of the two per-step systems.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSystems {
    pub rhs_u: Vec<f64>,
    pub rhs_v: Vec<f64>,
    pub shift_u: f64,
    pub shift_v: f64,
}

pub fn assemble_rhs(
    state: &TimeStepState,
    forcing: &[Vec<f64>; 2],
    ops: &GalerkinOperatorSet,
    params: &SchemeParameters,
) -> Result<StepSystems> {
    let modes = ops.modes();
    for len in [
        state.modes(),
        state.v.modes(),
        forcing[0].len(),
        forcing[1].len(),
    ] {
        if len != modes {
            return Err(Error::Dimension {
                expected: modes,
                found: len,
            });
        }
    }
    let c = &params.constants;
    let tau2 = params.tau() * params.tau();
    let l = params.length;
    let a0 = 4.0 / (2.0 + c.delta * tau2);

    let hu = ops.apply_h(state.u.values());
    let hv = ops.apply_h(state.v.values());
    let bu = ops.apply_b(state.u.values());
    let bv = ops.apply_b(state.v.values());

    let (fu, fv) = (4.0 * tau2 / (l * l), 2.0 * a0 * tau2 / (l * l));
    let (cu, cv) = (2.0 * c.a1 * tau2 / l, a0 * c.a2 * tau2 / l);
    let rhs_u = (0..modes)
        .map(|m| fu * forcing[0][m] + 2.0 * hu[m] - cu * bv[m])
        .collect();
    let rhs_v = (0..modes)
        .map(|m| fv * forcing[1][m] + a0 * hv[m] + cv * bu[m])
        .collect();
    Ok(StepSystems {
        rhs_u,
        rhs_v,
        shift_u: 2.0 * tau2 * state.q / (l * l),
        shift_v: a0 * tau2 * c.gamma / (l * l),
    })
}

/// Advances `state` by one layer with precomputed forcing projections.
/// The two solves go through `exec`.
pub fn step_with_forcing<E: Executor + ?Sized>(
    state: &TimeStepState,
    forcing: &[Vec<f64>; 2],
    ops: &GalerkinOperatorSet,
    params: &SchemeParameters,
    exec: &E,
) -> Result<TimeStepState> {
    let layer = state.k;
    let sys = assemble_rhs(state, forcing, ops, params).map_err(|e| e.at_layer(layer))?;
    let StepSystems {
        rhs_u,
        rhs_v,
        shift_u,
        shift_v,
    } = sys;
    let (w1, w2) = exec.join(
        || {
            build_shifted_system(ops, shift_u, rhs_u)
                .and_then(|s| solve_gap_tridiagonal_with(&s, exec))
        },
        || {
            build_shifted_system(ops, shift_v, rhs_v)
                .and_then(|s| solve_gap_tridiagonal_with(&s, exec))
        },
    );
    let (w1, w2) = (
        w1.map_err(|e| e.at_layer(layer))?,
        w2.map_err(|e| e.at_layer(layer))?,
    );
    let length = params.length;
    let next = |w: Vec<f64>, prev: &SpectralCoefficients| {
        let values = w.iter().zip(prev.values()).map(|(a, b)| a - b).collect();
        SpectralCoefficients::new(length, values)
    };
    let u_next = next(w1, &state.u_prev)?;
    let v_next = next(w2, &state.v_prev)?;
    TimeStepState::new(
        layer + 1,
        state.u.clone(),
        u_next,
        state.v.clone(),
        v_next,
        &params.constants,
    )
}

/// One step with the forcing projected at `t_k`.
pub fn step<P: BeamProblem + ?Sized, E: Executor + ?Sized>(
    problem: &P,
    state: &TimeStepState,
    ops: &GalerkinOperatorSet,
    params: &SchemeParameters,
    integrator: &Integrator,
    exec: &E,
) -> Result<TimeStepState> {
    let layer = state.k;
    let slice = problem
        .forcing_slice(params.time(layer))
        .map_err(|e| e.at_layer(layer))?;
    let forcing = forcing_projections(problem, &slice, params.modes, params.length, integrator)
        .map_err(|e| e.at_layer(layer))?;
    step_with_forcing(state, &forcing, ops, params, exec)
}

/// Monitors of layer `state.k`.
pub fn layer_monitors(
    state: &TimeStepState,
    ops: &GalerkinOperatorSet,
    params: &SchemeParameters,
) -> Monitors {
    let tau = params.tau();
    let diff = |a: &SpectralCoefficients, b: &SpectralCoefficients| {
        let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        norm(&d)
    };
    let v = state.v.values();
    let hv = ops.apply_h(v);
    let mass = 0.25 * params.length * params.length * crate::linalg::dot(v, &hv);
    let c = &params.constants;
    Monitors {
        q: state.q,
        du: diff(&state.u, &state.u_prev) / tau,
        dv: diff(&state.v, &state.v_prev) / tau,
        au: state.u.energy().sqrt(),
        lv: (c.gamma * state.v.energy() + c.delta * mass).max(0.0).sqrt(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Quadrature for initial data and forcing inner products.
    pub integrator: Integrator,
    /// Quadrature for the error norms in [`run_with_errors`].
    pub error_integrator: Integrator,
    /// Keep every layer instead of only the last two.
    pub record_trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::default(),
            error_integrator: error_integrator(),
            record_trajectory: false,
        }
    }
}

/// What an observer sees at layer `k`, for `k = 1..=n`.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub k: usize,
    pub t: f64,
    pub tau: f64,
    pub u_prev: &'a SpectralCoefficients,
    pub u: &'a SpectralCoefficients,
    pub v_prev: &'a SpectralCoefficients,
    pub v: &'a SpectralCoefficients,
    /// `None` at the last layer.
    pub u_next: Option<&'a SpectralCoefficients>,
    pub v_next: Option<&'a SpectralCoefficients>,
    pub monitors: Monitors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Last two layers reached.
    pub state: TimeStepState,
    pub diagnostics: Vec<Diagnostic>,
    /// `(u^k, v^k)` for `k = 0..=state.k`, when recording was requested.
    pub trajectory: Option<Vec<(SpectralCoefficients, SpectralCoefficients)>>,
    /// Filled by [`run_with_errors`].
    pub records: Vec<ErrorRecord>,
}

/// A failed run with whatever was computed before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    /// `None` if the initial layers could not be built.
    pub partial: Option<Box<RunOutput>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: None,
        }
    }
}

/// Builds the initial layers and takes `n - 1` steps, calling `observer`
/// once per layer `k = 1..=n` from the calling thread.
pub fn run<P, E, F>(
    problem: &P,
    params: &SchemeParameters,
    options: &RunOptions,
    exec: &E,
    mut observer: F,
) -> core::result::Result<RunOutput, RunFailure>
where
    P: BeamProblem + Sync + ?Sized,
    E: Executor + ?Sized,
    F: FnMut(&LayerView<'_>) -> Result<()>,
{
    params.validate()?;
    if (problem.length() - params.length).abs() > 1e-14 * params.length {
        return Err(Error::argument("problem and scheme lengths differ").into());
    }
    let ops = GalerkinOperatorSet::assemble(params.modes)?;
    let init = initial_layers(problem, params, &options.integrator)?;
    let mut trajectory = options.record_trajectory.then(|| {
        vec![
            (init.u0.clone(), init.v0.clone()),
            (init.u1.clone(), init.v1.clone()),
        ]
    });
    let mut state = TimeStepState::new(1, init.u0, init.u1, init.v0, init.v1, &params.constants)?;
    let diagnostics = init.diagnostics;
    let tau = params.tau();

    let fail = |error: Error, state: TimeStepState, trajectory, diagnostics| RunFailure {
        error,
        partial: Some(Box::new(RunOutput {
            state,
            diagnostics,
            trajectory,
            records: Vec::new(),
        })),
    };

    for k in 1..=params.steps {
        let next = if k < params.steps {
            match step(problem, &state, &ops, params, &options.integrator, exec) {
                Ok(s) => Some(s),
                Err(e) => return Err(fail(e, state, trajectory, diagnostics)),
            }
        } else {
            None
        };
        let view = LayerView {
            k,
            t: params.time(k),
            tau,
            u_prev: &state.u_prev,
            u: &state.u,
            v_prev: &state.v_prev,
            v: &state.v,
            u_next: next.as_ref().map(|s| &s.u),
            v_next: next.as_ref().map(|s| &s.v),
            monitors: layer_monitors(&state, &ops, params),
        };
        if let Err(e) = observer(&view) {
            return Err(fail(e.at_layer(k), state, trajectory, diagnostics));
        }
        if let Some(next) = next {
            if let Some(t) = trajectory.as_mut() {
                t.push((next.u.clone(), next.v.clone()));
            }
            state = next;
        }
    }
    Ok(RunOutput {
        state,
        diagnostics,
        trajectory,
        records: Vec::new(),
    })
}

/// [`run`] that records `L^2` errors against the exact solution at every
/// layer `k = 1..=n`.
pub fn run_with_errors<P, E>(
    problem: &P,
    params: &SchemeParameters,
    options: &RunOptions,
    exec: &E,
) -> core::result::Result<RunOutput, RunFailure>
where
    P: ExactSolution + Sync + ?Sized,
    E: Executor + ?Sized,
{
    let mut records = Vec::with_capacity(params.steps);
    let result = run(problem, params, options, exec, |view| {
        let neighbors = match (view.u_next, view.v_next) {
            (Some(u_next), Some(v_next)) => Some(Neighbors {
                u_prev: view.u_prev,
                u_next,
                v_prev: view.v_prev,
                v_next,
                tau: view.tau,
            }),
            _ => None,
        };
        let e = layer_errors(
            problem,
            view.u,
            view.v,
            view.t,
            neighbors,
            &options.error_integrator,
        )?;
        records.push(ErrorRecord {
            k: view.k,
            t: view.t,
            e1: e.e1,
            e2: e.e2,
            de1: e.de1,
            de2: e.de2,
            monitors: view.monitors,
        });
        Ok(())
    });
    match result {
        Ok(mut out) => {
            out.records = records;
            Ok(out)
        }
        Err(mut failure) => {
            if let Some(p) = failure.partial.as_mut() {
                p.records = records;
            }
            Err(failure)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{make_benchmark, make_machine_precision_case, BenchmarkProblem};
    use crate::linalg::{solve_dense, DenseMatrix};
    use crate::Serial;
    use core::f64::consts::PI;

    struct Threaded;

    impl Executor for Threaded {
        fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
        where
            A: FnOnce() -> RA + Send,
            B: FnOnce() -> RB + Send,
            RA: Send,
            RB: Send,
        {
            std::thread::scope(|s| {
                let hb = s.spawn(b);
                let ra = a();
                (ra, hb.join().unwrap())
            })
        }
    }

    struct Free {
        length: f64,
        u0: fn(f64) -> [f64; 3],
        v0: fn(f64) -> [f64; 3],
        u1: fn(f64) -> [f64; 2],
    }

    impl BeamProblem for Free {
        fn length(&self) -> f64 {
            self.length
        }
        fn initial(&self, x: f64) -> InitialSample {
            let [u0, u0_x, u0_xx] = (self.u0)(x);
            let [v0, v0_x, v0_xx] = (self.v0)(x);
            let [u1, u1_x] = (self.u1)(x);
            InitialSample {
                u0,
                u0_x,
                u0_xx,
                u1,
                u1_x,
                v0,
                v0_x,
                v0_xx,
                v1: 0.0,
                v1_x: 0.0,
            }
        }
        fn forcing_slice(&self, t: f64) -> Result<ForcingSlice> {
            Ok(ForcingSlice { t, nonlocal: 0.0 })
        }
        fn forcing(&self, _: &ForcingSlice, _: f64) -> [f64; 2] {
            [0.0, 0.0]
        }
    }

    fn zero3(_: f64) -> [f64; 3] {
        [0.0; 3]
    }

    fn params(n: usize, modes: usize) -> SchemeParameters {
        SchemeParameters {
            constants: PhysicalConstants::default(),
            length: 2.0,
            final_time: 1.0,
            steps: n,
            modes,
        }
    }

    #[test]
    fn q_examples() {
        let z = SpectralCoefficients::zeros(5, 2.0).unwrap();
        assert_eq!(compute_q(&z, 1.5, 2.0), 1.5);
        let e1 = SpectralCoefficients::unit(1, 5, 2.0).unwrap();
        assert_eq!(compute_q(&e1, 1.5, 2.0), 3.5);

        let g = |x: f64| (7.0 * PI * x).sin();
        let dg = |x: f64| 7.0 * PI * (7.0 * PI * x).cos();
        let target = 1.0 + 49.0 * PI * PI;
        // Bessel: the truncated sum never exceeds the full gradient energy,
        // and 24 modes are still short of resolving seven periods.
        let u = project_onto_basis(&g, Some(&dg), 24, 2.0, &Integrator::default()).unwrap();
        let q24 = compute_q(&u, 1.0, 1.0);
        assert!(q24 < target && q24 > target - 1.0);
        let u = project_onto_basis(&g, Some(&dg), 36, 2.0, &Integrator::default()).unwrap();
        let q = compute_q(&u, 1.0, 1.0);
        assert!((q - target).abs() < 1e-8, "{}", q - target);
    }

    #[test]
    fn rhs_single_mode_example() {
        let ops = GalerkinOperatorSet::assemble(3).unwrap();
        let z = SpectralCoefficients::zeros(3, 2.0).unwrap();
        let e1 = SpectralCoefficients::unit(1, 3, 2.0).unwrap();
        let p = params(16, 3);
        let state = TimeStepState::new(1, z.clone(), e1, z.clone(), z, &p.constants).unwrap();
        let sys = assemble_rhs(&state, &[vec![0.0; 3], vec![0.0; 3]], &ops, &p).unwrap();
        let expected = [0.8, 0.0, -2.0 / (5.0 * 21f64.sqrt())];
        for (a, b) in sys.rhs_u.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = assemble_rhs(&state, &[vec![0.0; 2], vec![0.0; 3]], &ops, &p);
        assert!(matches!(bad, Err(Error::Dimension { .. })));
    }

    #[test]
    fn decoupled_rhs_ignores_v() {
        let ops = GalerkinOperatorSet::assemble(4).unwrap();
        let mut p = params(16, 4);
        p.constants.a1 = 0.0;
        let u = SpectralCoefficients::new(2.0, vec![0.3, -0.1, 0.2, 0.05]).unwrap();
        let v1 = SpectralCoefficients::new(2.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v2 = SpectralCoefficients::new(2.0, vec![-4.0, 0.0, 1.0, 9.0]).unwrap();
        let f = [vec![0.1; 4], vec![0.2; 4]];
        let s1 = TimeStepState::new(1, u.clone(), u.clone(), v1.clone(), v1, &p.constants).unwrap();
        let s2 = TimeStepState::new(1, u.clone(), u, v2.clone(), v2, &p.constants).unwrap();
        let r1 = assemble_rhs(&s1, &f, &ops, &p).unwrap();
        let r2 = assemble_rhs(&s2, &f, &ops, &p).unwrap();
        assert_eq!(r1.rhs_u, r2.rhs_u);
    }

    #[test]
    fn zero_data_stays_zero() {
        let problem = Free {
            length: 2.0,
            u0: zero3,
            v0: zero3,
            u1: |_| [0.0; 2],
        };
        let p = params(8, 6);
        let out = run(&problem, &p, &RunOptions::default(), &Serial, |v| {
            assert!(v.u.values().iter().all(|c| *c == 0.0));
            assert_eq!(v.monitors.q, 1.0);
            Ok(())
        })
        .unwrap();
        assert!(out.state.u.values().iter().all(|c| *c == 0.0));
        assert!(out.state.v.values().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn beta_zero_gives_q0_alpha() {
        let problem = Free {
            length: 2.0,
            u0: zero3,
            v0: |x| [x * (2.0 - x), 2.0 - 2.0 * x, -2.0],
            u1: |_| [0.0; 2],
        };
        let mut p = params(8, 4);
        p.constants.beta = 0.0;
        p.constants.alpha = 0.7;
        let init = initial_layers(&problem, &p, &Integrator::default()).unwrap();
        assert_eq!(init.q0, 0.7);
    }

    #[test]
    fn incompatible_initial_displacement_is_rejected() {
        let problem = Free {
            length: 2.0,
            u0: |x| [1.0 + x, 1.0, 0.0],
            v0: zero3,
            u1: |_| [0.0; 2],
        };
        let err = initial_layers(&problem, &params(8, 4), &Integrator::default()).unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
    }

    #[test]
    fn incompatible_velocity_is_reported() {
        let problem = Free {
            length: 2.0,
            u0: zero3,
            v0: zero3,
            u1: |x| [1.0 + x * x, 2.0 * x],
        };
        let init = initial_layers(&problem, &params(8, 4), &Integrator::default()).unwrap();
        assert_eq!(init.diagnostics.len(), 1);
        assert_eq!(init.diagnostics[0].term, InitialTerm::U1);
        assert!((init.diagnostics[0].boundary.right - 5.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_first_layer() {
        let problem = make_benchmark(1).unwrap();
        let p = problem.default_parameters();
        let tau = p.tau();
        let init = initial_layers(&problem, &p, &Integrator::default()).unwrap();
        let k = 7.0 * PI;
        let s = project_onto_basis(
            &|x| (k * x).sin(),
            Some(&|x| k * (k * x).cos()),
            p.modes,
            2.0,
            &Integrator::default(),
        )
        .unwrap();
        for (a, b) in init.u1.values().iter().zip(s.values()) {
            assert!((a - tau * PI / 2.0 * b).abs() < 1e-11);
        }
        assert!(init.diagnostics.is_empty(), "{:?}", init.diagnostics);
    }

    fn exact_coefficients(t: f64, modes: usize) -> SpectralCoefficients {
        project_onto_basis(
            &|x| t * x * (2.0 - x),
            Some(&|x| t * (2.0 - 2.0 * x)),
            modes,
            2.0,
            &Integrator::default(),
        )
        .unwrap()
    }

    #[test]
    fn polynomial_solution_is_reproduced() {
        let problem = make_machine_precision_case();
        for modes in [1, 2, 5] {
            let p = SchemeParameters {
                modes,
                steps: 32,
                ..problem.default_parameters()
            };
            let mut worst: f64 = 0.0;
            run(&problem, &p, &RunOptions::default(), &Serial, |view| {
                let exact = exact_coefficients(view.t, modes);
                for (a, b) in exact.values().iter().zip(view.u.values()) {
                    worst = worst.max((a - b).abs());
                }
                for (a, b) in exact.values().iter().zip(view.v.values()) {
                    worst = worst.max((a - b).abs());
                }
                Ok(())
            })
            .unwrap();
            assert!(worst <= 1e-12, "N = {modes}: {worst:e}");
        }
    }

    #[test]
    fn polynomial_solution_errors() {
        let problem = make_machine_precision_case();
        let p = problem.default_parameters();
        let out = run_with_errors(&problem, &p, &RunOptions::default(), &Serial).unwrap();
        assert_eq!(out.records.len(), p.steps);
        for r in &out.records {
            assert!(r.max_error() <= 1e-12, "{r:?}");
            assert!(r.monitors.q >= 1.0);
        }
        assert!(out.records.last().unwrap().de1.is_none());
        assert!(out.records[0].de1.unwrap() <= 1e-10);
    }

    #[test]
    fn two_steps_take_one_step() {
        let problem = make_machine_precision_case();
        let p = SchemeParameters {
            steps: 2,
            ..problem.default_parameters()
        };
        let mut seen = Vec::new();
        let options = RunOptions {
            record_trajectory: true,
            ..RunOptions::default()
        };
        let out = run(&problem, &p, &options, &Serial, |v| {
            seen.push((v.k, v.u_next.is_some()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![(1, true), (2, false)]);
        assert_eq!(out.state.k, 2);
        assert_eq!(out.trajectory.unwrap().len(), 3);
    }

    #[test]
    fn observer_failure_keeps_partial_output() {
        let problem = make_machine_precision_case();
        let p = problem.default_parameters();
        let failure = run(&problem, &p, &RunOptions::default(), &Serial, |v| {
            if v.k == 5 {
                Err(Error::argument("stop"))
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert!(matches!(failure.error, Error::Layer { layer: 5, .. }));
        assert_eq!(failure.partial.unwrap().state.k, 5);
    }

    #[test]
    fn time_reversal() {
        let problem = Free {
            length: 2.0,
            u0: |x| {
                let s = x * (2.0 - x);
                [s * (1.0 + x), (2.0 - 2.0 * x) * (1.0 + x) + s, -2.0 * (1.0 + x) + 2.0 * (2.0 - 2.0 * x)]
            },
            v0: |x| [(PI * x).sin(), PI * (PI * x).cos(), -PI * PI * (PI * x).sin()],
            u1: |x| [x * x * (2.0 - x), 4.0 * x - 3.0 * x * x],
        };
        for modes in [1, 4, 8] {
            let mut p = params(64, modes);
            p.constants.beta = 0.0;
            p.constants.delta = 0.5;
            p.constants.a2 = -0.7;
            let ops = GalerkinOperatorSet::assemble(modes).unwrap();
            let integ = Integrator::default();
            let init = initial_layers(&problem, &p, &integ).unwrap();
            let mut s = TimeStepState::new(
                1,
                init.u0.clone(),
                init.u1,
                init.v0.clone(),
                init.v1,
                &p.constants,
            )
            .unwrap();
            for _ in 1..64 {
                s = step(&problem, &s, &ops, &p, &integ, &Serial).unwrap();
            }
            let mut back = TimeStepState::new(1, s.u, s.u_prev, s.v, s.v_prev, &p.constants).unwrap();
            for _ in 1..64 {
                back = step(&problem, &back, &ops, &p, &integ, &Serial).unwrap();
            }
            let scale = init.u0.values().iter().chain(init.v0.values()).fold(0.0f64, |m, c| m.max(c.abs()));
            for (a, b) in back.u.values().iter().zip(init.u0.values()) {
                assert!((a - b).abs() <= 1e-9 * scale.max(1.0));
            }
            for (a, b) in back.v.values().iter().zip(init.v0.values()) {
                assert!((a - b).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn parallel_equals_serial() {
        let problem = make_benchmark(2).unwrap();
        let p = SchemeParameters {
            steps: 32,
            modes: 20,
            ..problem.default_parameters()
        };
        let options = RunOptions {
            record_trajectory: true,
            ..RunOptions::default()
        };
        let a = run(&problem, &p, &options, &Serial, |_| Ok(())).unwrap();
        let b = run(&problem, &p, &options, &Threaded, |_| Ok(())).unwrap();
        let bits = |o: &RunOutput| -> Vec<u64> {
            o.trajectory
                .as_ref()
                .unwrap()
                .iter()
                .flat_map(|(u, v)| u.values().iter().chain(v.values()).map(|c| c.to_bits()).collect::<Vec<_>>())
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    fn dense_step(state: &TimeStepState, forcing: &[Vec<f64>; 2], p: &SchemeParameters) -> (Vec<f64>, Vec<f64>) {
        let n = p.modes;
        let ops = GalerkinOperatorSet::assemble(n).unwrap();
        let h = ops.h_dense();
        let b = ops.b_dense();
        let c = &p.constants;
        let tau2 = p.tau() * p.tau();
        let l = p.length;
        let a0 = 4.0 / (2.0 + c.delta * tau2);
        let hu = h.matvec(state.u.values());
        let hv = h.matvec(state.v.values());
        let bu = b.matvec(state.u.values());
        let bv = b.matvec(state.v.values());
        let ru: Vec<f64> = (0..n)
            .map(|m| 4.0 * tau2 / (l * l) * forcing[0][m] + 2.0 * hu[m] - 2.0 * c.a1 * tau2 / l * bv[m])
            .collect();
        let rv: Vec<f64> = (0..n)
            .map(|m| 2.0 * a0 * tau2 / (l * l) * forcing[1][m] + a0 * hv[m] + a0 * c.a2 * tau2 / l * bu[m])
            .collect();
        let mu = h.add(&DenseMatrix::identity(n).scaled(2.0 * tau2 * state.q / (l * l)));
        let mv = h.add(&DenseMatrix::identity(n).scaled(a0 * tau2 * c.gamma / (l * l)));
        let w1 = solve_dense(&mu, &ru).unwrap();
        let w2 = solve_dense(&mv, &rv).unwrap();
        (
            w1.iter().zip(state.u_prev.values()).map(|(a, b)| a - b).collect(),
            w2.iter().zip(state.v_prev.values()).map(|(a, b)| a - b).collect(),
        )
    }

    #[test]
    fn dense_oracle_step() {
        let problem: BenchmarkProblem = make_benchmark(3).unwrap();
        let p = problem.default_parameters();
        assert_eq!(p.tau(), 1.0 / 256.0);
        let integ = Integrator::default();
        let init = initial_layers(&problem, &p, &integ).unwrap();
        let mut state = TimeStepState::new(1, init.u0, init.u1, init.v0, init.v1, &p.constants).unwrap();
        let ops = GalerkinOperatorSet::assemble(p.modes).unwrap();
        for _ in 0..3 {
            let slice = problem.forcing_slice(p.time(state.k)).unwrap();
            let forcing = forcing_projections(&problem, &slice, p.modes, p.length, &integ).unwrap();
            let (du, dv) = dense_step(&state, &forcing, &p);
            let next = step_with_forcing(&state, &forcing, &ops, &p, &Serial).unwrap();
            for (a, b) in next.u.values().iter().zip(&du).chain(next.v.values().iter().zip(&dv)) {
                assert!((a - b).abs() <= 1e-11, "{a} {b}");
            }
            state = next;
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = params(1, 4);
        assert!(p.validate().is_err());
        p.steps = 2;
        assert!(p.validate().is_ok());
        p.constants.gamma = 0.0;
        assert!(p.validate().is_err());
        p.constants.gamma = 1.0;
        p.modes = 0;
        assert!(p.validate().is_err());
    }
}
