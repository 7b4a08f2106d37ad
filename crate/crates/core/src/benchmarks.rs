//! Manufactured-solution test problems.
//!
//! Every problem has the separable form `u = v = a(t) s(x)` on `[0, 2]`,
//! and the forcings are obtained by substitution:
//!
//! ```text
//! f1 = u_tt - (alpha + beta int u_x^2) u_xx + a1 v_x
//! f2 = v_tt - gamma v_xx + delta v - a2 u_x
//! ```
//!
//! Separability makes the nonlocal term `int_0^l u_x^2 dx = a(t)^2 S` with
//! `S = int_0^l s'(x)^2 dx` fixed per problem. `S` has a closed form for the
//! pure sine and parabola profiles and is integrated numerically once for
//! the Gaussian-modulated sine.

use alloc::vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::basis::{BasisEvaluator, SpectralCoefficients};
use crate::error::{Error, Result};
use crate::legendre::{Integrator, Interval};
use crate::timestepper::{
    BeamProblem, ExactSolution, FieldSample, ForcingSlice, InitialSample, PhysicalConstants,
    SchemeParameters,
};

/// Which test problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    /// `sin(pi t / 2) sin(14 pi x / l)` on `t in [0, 1]`.
    Oscillatory,
    /// `A (1 + cos(2 pi t / T)) exp(-(2x - l)^2 / c^2) sin(19 pi x / l)`.
    ModulatedAmplitude,
    /// `exp(pi t / T) sin(5 pi x / l) / 4` on `t in [0, 4]`.
    ExponentialGrowth,
    /// `t x (l - x)`; lies in the discrete space and is reproduced exactly.
    MachinePrecision,
}

impl BenchmarkId {
    /// Numeric label: 1, 2, 3, or 0 for the machine-precision case.
    pub fn number(self) -> u32 {
        match self {
            BenchmarkId::Oscillatory => 1,
            BenchmarkId::ModulatedAmplitude => 2,
            BenchmarkId::ExponentialGrowth => 3,
            BenchmarkId::MachinePrecision => 0,
        }
    }

    /// File-name stem.
    pub fn label(self) -> &'static str {
        match self {
            BenchmarkId::Oscillatory => "test1",
            BenchmarkId::ModulatedAmplitude => "test2",
            BenchmarkId::ExponentialGrowth => "test3",
            BenchmarkId::MachinePrecision => "machine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimeProfile {
    HalfSine,
    RaisedCosine { amplitude: f64, omega: f64 },
    Exponential { rate: f64 },
    Linear,
}

impl TimeProfile {
    /// `(a, a', a'')` at `t`.
    fn eval(&self, t: f64) -> [f64; 3] {
        match *self {
            TimeProfile::HalfSine => {
                let w = PI / 2.0;
                let (s, c) = (w * t).sin_cos();
                [s, w * c, -w * w * s]
            }
            TimeProfile::RaisedCosine { amplitude, omega } => {
                let (s, c) = (omega * t).sin_cos();
                [
                    amplitude * (1.0 + c),
                    -amplitude * omega * s,
                    -amplitude * omega * omega * c,
                ]
            }
            TimeProfile::Exponential { rate } => {
                let e = 0.25 * (rate * t).exp();
                [e, rate * e, rate * rate * e]
            }
            TimeProfile::Linear => [t, 1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SpaceProfile {
    Sine { wavenumber: f64 },
    GaussianSine { wavenumber: f64, width: f64, length: f64 },
    Parabola { length: f64 },
}

impl SpaceProfile {
    /// `(s, s', s'')` at `x`.
    fn eval(&self, x: f64) -> [f64; 3] {
        match *self {
            SpaceProfile::Sine { wavenumber: k } => {
                let (s, c) = (k * x).sin_cos();
                [s, k * c, -k * k * s]
            }
            SpaceProfile::GaussianSine {
                wavenumber: k,
                width: c,
                length,
            } => {
                let y = 2.0 * x - length;
                let c2 = c * c;
                let e = (-y * y / c2).exp();
                let e1 = -4.0 * y / c2 * e;
                let e2 = (16.0 * y * y / (c2 * c2) - 8.0 / c2) * e;
                let (s, co) = (k * x).sin_cos();
                [
                    e * s,
                    e1 * s + k * e * co,
                    e2 * s + 2.0 * k * e1 * co - k * k * e * s,
                ]
            }
            SpaceProfile::Parabola { length } => [x * (length - x), length - 2.0 * x, -2.0],
        }
    }
}

/// A manufactured-solution problem with its default discretisation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkProblem {
    id: BenchmarkId,
    constants: PhysicalConstants,
    length: f64,
    final_time: f64,
    default_steps: usize,
    default_modes: usize,
    spec: ProfileSpec,
    time: TimeProfile,
    space: SpaceProfile,
    /// `int_0^l s'(x)^2 dx`.
    gradient_energy: f64,
}

/// Parameters that determine the time profile; kept so the final time can
/// be changed after construction.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ProfileSpec {
    Fixed,
    RaisedCosine { amplitude: f64, frequency: f64 },
    Exponential,
}

pub const BEAM_LENGTH: f64 = 2.0;

/// Test problem by number: `1`, `2` or `3`.
pub fn make_benchmark(id: u32) -> Result<BenchmarkProblem> {
    match id {
        1 => BenchmarkProblem::new(BenchmarkId::Oscillatory),
        2 => BenchmarkProblem::new(BenchmarkId::ModulatedAmplitude),
        3 => BenchmarkProblem::new(BenchmarkId::ExponentialGrowth),
        other => Err(Error::Argument(alloc::format!("unknown benchmark {other}"))),
    }
}

pub fn make_machine_precision_case() -> BenchmarkProblem {
    BenchmarkProblem::new(BenchmarkId::MachinePrecision).expect("closed-form profile")
}

impl BenchmarkProblem {
    pub fn new(id: BenchmarkId) -> Result<Self> {
        let length = BEAM_LENGTH;
        let sine = |lambda: f64| SpaceProfile::Sine {
            wavenumber: lambda * PI / length,
        };
        let (final_time, steps, modes, spec, space) = match id {
            BenchmarkId::Oscillatory => (1.0, 256, 35, ProfileSpec::Fixed, sine(14.0)),
            BenchmarkId::ModulatedAmplitude => (
                1.0,
                256,
                45,
                ProfileSpec::RaisedCosine {
                    amplitude: 0.5,
                    frequency: 2.0,
                },
                SpaceProfile::GaussianSine {
                    wavenumber: 19.0 * PI / length,
                    width: 1.0,
                    length,
                },
            ),
            BenchmarkId::ExponentialGrowth => (4.0, 1024, 15, ProfileSpec::Exponential, sine(5.0)),
            BenchmarkId::MachinePrecision => {
                (1.0, 16, 4, ProfileSpec::Fixed, SpaceProfile::Parabola { length })
            }
        };
        let gradient_energy = match space {
            SpaceProfile::Sine { wavenumber } => wavenumber * wavenumber * length / 2.0,
            SpaceProfile::Parabola { length } => length * length * length / 3.0,
            SpaceProfile::GaussianSine { .. } => Integrator::default()
                .with_relative_tolerance(1e-13)
                .with_min_depth(2)
                .integrate(
                    |x| {
                        let d = space.eval(x)[1];
                        d * d
                    },
                    Interval::from_length(length)?,
                )?,
        };
        let mut problem = Self {
            id,
            constants: PhysicalConstants::default(),
            length,
            final_time,
            default_steps: steps,
            default_modes: modes,
            spec,
            time: TimeProfile::Linear,
            space,
            gradient_energy,
        };
        problem.time = problem.time_profile();
        if id == BenchmarkId::Oscillatory {
            problem.time = TimeProfile::HalfSine;
        }
        Ok(problem)
    }

    fn time_profile(&self) -> TimeProfile {
        match self.spec {
            ProfileSpec::Fixed => match self.id {
                BenchmarkId::Oscillatory => TimeProfile::HalfSine,
                _ => TimeProfile::Linear,
            },
            ProfileSpec::RaisedCosine {
                amplitude,
                frequency,
            } => TimeProfile::RaisedCosine {
                amplitude,
                omega: frequency * PI / self.final_time,
            },
            ProfileSpec::Exponential => TimeProfile::Exponential {
                rate: PI / self.final_time,
            },
        }
    }

    pub fn with_constants(mut self, constants: PhysicalConstants) -> Self {
        self.constants = constants;
        self
    }

    /// Changes `T`; profiles that are written in terms of `T` follow it.
    pub fn with_final_time(mut self, final_time: f64) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::argument("final time must be positive"));
        }
        self.final_time = final_time;
        self.time = self.time_profile();
        Ok(self)
    }

    pub fn id(&self) -> BenchmarkId {
        self.id
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn default_steps(&self) -> usize {
        self.default_steps
    }

    pub fn default_modes(&self) -> usize {
        self.default_modes
    }

    /// Discretisation used when nothing is overridden.
    pub fn default_parameters(&self) -> SchemeParameters {
        SchemeParameters {
            constants: self.constants,
            length: self.length,
            final_time: self.final_time,
            steps: self.default_steps,
            modes: self.default_modes,
        }
    }

    /// `alpha + beta int_0^l u_x(x, t)^2 dx`.
    pub fn nonlocal_coefficient(&self, t: f64) -> f64 {
        let a = self.time.eval(t)[0];
        self.constants.alpha + self.constants.beta * a * a * self.gradient_energy
    }

    /// `int_0^l s'(x)^2 dx` of the spatial profile.
    pub fn gradient_energy(&self) -> f64 {
        self.gradient_energy
    }

    fn sample(&self, x: f64, t: f64) -> FieldSample {
        let [a, at, att] = self.time.eval(t);
        let [s, sx, sxx] = self.space.eval(x);
        FieldSample {
            value: a * s,
            dx: a * sx,
            dxx: a * sxx,
            dt: at * s,
            dtt: att * s,
            dxt: at * sx,
        }
    }

    /// Forcing `(f1, f2)` at `(x, t)` given `alpha + beta int u_x^2` at `t`.
    fn forcing_from(&self, x: f64, t: f64, nonlocal: f64) -> [f64; 2] {
        let u = self.sample(x, t);
        let v = u;
        let c = &self.constants;
        let f1 = u.dtt - nonlocal * u.dxx + c.a1 * v.dx;
        let f2 = v.dtt - c.gamma * v.dxx + c.delta * v.value - c.a2 * u.dx;
        [f1, f2]
    }
}

impl BeamProblem for BenchmarkProblem {
    fn length(&self) -> f64 {
        self.length
    }

    fn initial(&self, x: f64) -> InitialSample {
        let s = self.sample(x, 0.0);
        InitialSample {
            u0: s.value,
            u0_x: s.dx,
            u0_xx: s.dxx,
            u1: s.dt,
            u1_x: s.dxt,
            v0: s.value,
            v0_x: s.dx,
            v0_xx: s.dxx,
            v1: s.dt,
            v1_x: s.dxt,
        }
    }

    fn forcing_slice(&self, t: f64) -> Result<ForcingSlice> {
        Ok(ForcingSlice {
            t,
            nonlocal: self.nonlocal_coefficient(t),
        })
    }

    fn forcing(&self, slice: &ForcingSlice, x: f64) -> [f64; 2] {
        self.forcing_from(x, slice.t, slice.nonlocal)
    }
}

impl ExactSolution for BenchmarkProblem {
    fn exact(&self, x: f64, t: f64) -> [FieldSample; 2] {
        let s = self.sample(x, t);
        [s, s]
    }
}

/// Per-layer `L^2` errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerErrors {
    pub e1: f64,
    pub e2: f64,
    /// Error of the central difference `(u^{k+1} - u^{k-1}) / (2 tau)`
    /// against `u_t(., t_k)`.
    pub de1: Option<f64>,
    pub de2: Option<f64>,
}

/// Neighbouring layers for the central-difference derivative error.
#[derive(Debug, Clone, Copy)]
pub struct Neighbors<'a> {
    pub u_prev: &'a SpectralCoefficients,
    pub u_next: &'a SpectralCoefficients,
    pub v_prev: &'a SpectralCoefficients,
    pub v_next: &'a SpectralCoefficients,
    pub tau: f64,
}

/// Quadrature settings for error norms: the integrands are squares of
/// small differences, so a relative criterion is used alongside a tiny
/// absolute one. Rounding in `exact - numeric` limits the attainable
/// relative accuracy of the square to about `eps |u| / |error|`.
pub fn error_integrator() -> Integrator {
    Integrator::default()
        .with_tolerance(1e-20)
        .expect("positive tolerance")
        .with_relative_tolerance(1e-6)
        .with_min_depth(3)
        .with_max_depth(24)
}

/// `E_j = ||exact_j(., t) - numeric_j||` in `L^2(0, l)`, plus the
/// central-difference derivative errors when `neighbors` is given.
pub fn layer_errors<P: ExactSolution + ?Sized>(
    problem: &P,
    u: &SpectralCoefficients,
    v: &SpectralCoefficients,
    t: f64,
    neighbors: Option<Neighbors<'_>>,
    integrator: &Integrator,
) -> Result<LayerErrors> {
    let modes = u.modes();
    let length = u.length();
    if v.modes() != modes {
        return Err(Error::Dimension {
            expected: modes,
            found: v.modes(),
        });
    }
    let mut eval = BasisEvaluator::new(modes, length)?;
    let mut phi = vec![0.0; modes];
    // central-difference coefficients
    let (du, dv) = match neighbors {
        Some(nb) => {
            let scale = 1.0 / (2.0 * nb.tau);
            let du: alloc::vec::Vec<f64> = nb
                .u_next
                .values()
                .iter()
                .zip(nb.u_prev.values())
                .map(|(a, b)| (a - b) * scale)
                .collect();
            let dv: alloc::vec::Vec<f64> = nb
                .v_next
                .values()
                .iter()
                .zip(nb.v_prev.values())
                .map(|(a, b)| (a - b) * scale)
                .collect();
            (Some(du), Some(dv))
        }
        None => (None, None),
    };
    let dim = if neighbors.is_some() { 4 } else { 2 };
    let mut failure = None;
    let sq = integrator.integrate_vector(
        |x, out| {
            if let Err(e) = eval.phi(x, &mut phi) {
                failure = Some(e);
            }
            let dot = |c: &[f64]| c.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>();
            let [eu, ev] = problem.exact(x, t);
            let d1 = eu.value - dot(u.values());
            let d2 = ev.value - dot(v.values());
            out[0] = d1 * d1;
            out[1] = d2 * d2;
            if let (Some(du), Some(dv)) = (&du, &dv) {
                let r1 = eu.dt - dot(du);
                let r2 = ev.dt - dot(dv);
                out[2] = r1 * r1;
                out[3] = r2 * r2;
            }
        },
        dim,
        Interval::from_length(length)?,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(LayerErrors {
        e1: sq[0].max(0.0).sqrt(),
        e2: sq[1].max(0.0).sqrt(),
        de1: (dim == 4).then(|| sq[2].max(0.0).sqrt()),
        de2: (dim == 4).then(|| sq[3].max(0.0).sqrt()),
    })
}
