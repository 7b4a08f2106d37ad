//! Trial functions built from differences of shifted Legendre polynomials.
//!
//! `phi_m = (sqrt(l)/2) A_m (P~_{m+1} - P~_{m-1})`, `m >= 1`. Every `phi_m`
//! vanishes at `0` and `l`, and `phi_m' = P^_m = P~_m / (A_m sqrt(l))` is
//! orthonormal in `L^2(0, l)`. Coefficients in this basis therefore satisfy
//! `sum c_m^2 = int (d/dx sum c_m phi_m)^2 dx`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::legendre::{
    legendre_values, legendre_values_and_derivatives, normalization, reference_coordinate,
    Integrator, Interval, MAX_DEGREE,
};

/// Relative threshold for the endpoint compatibility check.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-10;

/// Coefficients `c_1 .. c_N` of `sum c_m phi_m` on `[0, l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    length: f64,
    values: Vec<f64>,
}

impl SpectralCoefficients {
    pub fn new(length: f64, values: Vec<f64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::argument("basis length must be positive"));
        }
        if values.is_empty() || values.len() + 1 > MAX_DEGREE {
            return Err(Error::argument("basis size must be in 1..=255"));
        }
        Ok(Self { length, values })
    }

    pub fn zeros(modes: usize, length: f64) -> Result<Self> {
        Self::new(length, vec![0.0; modes])
    }

    /// Coefficient vector of `phi_m` alone (`m` is one-based).
    pub fn unit(m: usize, modes: usize, length: f64) -> Result<Self> {
        if m == 0 || m > modes {
            return Err(Error::argument("unit index out of range"));
        }
        let mut values = vec![0.0; modes];
        values[m - 1] = 1.0;
        Self::new(length, values)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    /// Zero-based storage: `values()[m - 1]` is the coefficient of `phi_m`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `sum c_m^2`, equal to the squared `H^1_0` seminorm of the expansion.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c * c).sum()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        eval_expansion(self, x)
    }

    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        eval_expansion_derivative(self, x)
    }
}

/// Evaluates every basis function (or derivative) at a point, reusing
/// internal scratch buffers. One evaluator per thread.
#[derive(Debug, Clone)]
pub struct BasisEvaluator {
    modes: usize,
    length: f64,
    scale: Vec<f64>,
    p: Vec<f64>,
    dp: Vec<f64>,
}

impl BasisEvaluator {
    pub fn new(modes: usize, length: f64) -> Result<Self> {
        if modes == 0 || modes + 1 > MAX_DEGREE {
            return Err(Error::argument("basis size must be in 1..=255"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::argument("basis length must be positive"));
        }
        let scale = (0..=modes + 1).map(normalization).collect();
        Ok(Self {
            modes,
            length,
            scale,
            p: vec![0.0; modes + 2],
            dp: vec![0.0; modes + 2],
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `out[m - 1] = phi_m(x)`.
    pub fn phi(&mut self, x: f64, out: &mut [f64]) -> Result<()> {
        let xi = reference_coordinate(x, self.length)?;
        legendre_values(xi, &mut self.p);
        let c = 0.5 * self.length.sqrt();
        for m in 1..=self.modes {
            out[m - 1] = c * self.scale[m] * (self.p[m + 1] - self.p[m - 1]);
        }
        Ok(())
    }

    /// `out[m - 1] = phi_m'(x) = P^_m(x)`.
    pub fn phi_derivative(&mut self, x: f64, out: &mut [f64]) -> Result<()> {
        let xi = reference_coordinate(x, self.length)?;
        legendre_values(xi, &mut self.p[..=self.modes]);
        let root = self.length.sqrt();
        for m in 1..=self.modes {
            out[m - 1] = self.p[m] / (self.scale[m] * root);
        }
        Ok(())
    }

    /// `out[m - 1] = phi_m''(x) = P^_m'(x)`.
    pub fn phi_second_derivative(&mut self, x: f64, out: &mut [f64]) -> Result<()> {
        let xi = reference_coordinate(x, self.length)?;
        let n = self.modes + 1;
        legendre_values_and_derivatives(xi, &mut self.p[..n], &mut self.dp[..n]);
        let factor = 2.0 / (self.length * self.length.sqrt());
        for m in 1..=self.modes {
            out[m - 1] = factor * self.dp[m] / self.scale[m];
        }
        Ok(())
    }
}

fn check_index(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::argument("basis index starts at 1"))
    } else if m + 1 > MAX_DEGREE {
        Err(Error::DegreeTooLarge(m + 1))
    } else {
        Ok(())
    }
}

/// `phi_m(x)` from the closed difference form.
pub fn eval_phi(m: usize, x: f64, length: f64) -> Result<f64> {
    check_index(m)?;
    let xi = reference_coordinate(x, length)?;
    let mut p = vec![0.0; m + 2];
    legendre_values(xi, &mut p);
    Ok(0.5 * length.sqrt() * normalization(m) * (p[m + 1] - p[m - 1]))
}

/// `phi_m'(x) = P~_m(x) / (A_m sqrt(l))`.
pub fn eval_phi_derivative(m: usize, x: f64, length: f64) -> Result<f64> {
    check_index(m)?;
    let xi = reference_coordinate(x, length)?;
    let mut p = vec![0.0; m + 1];
    legendre_values(xi, &mut p);
    Ok(p[m] / (normalization(m) * length.sqrt()))
}

pub fn eval_expansion(coeffs: &SpectralCoefficients, x: f64) -> Result<f64> {
    let mut eval = BasisEvaluator::new(coeffs.modes(), coeffs.length())?;
    let mut phi = vec![0.0; coeffs.modes()];
    eval.phi(x, &mut phi)?;
    Ok(dot(&phi, coeffs.values()))
}

pub fn eval_expansion_derivative(coeffs: &SpectralCoefficients, x: f64) -> Result<f64> {
    let mut eval = BasisEvaluator::new(coeffs.modes(), coeffs.length())?;
    let mut dphi = vec![0.0; coeffs.modes()];
    eval.phi_derivative(x, &mut dphi)?;
    Ok(dot(&dphi, coeffs.values()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Endpoint values of a projected function, reported by
/// [`project_discarding_boundary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues {
    pub left: f64,
    pub right: f64,
}

impl BoundaryValues {
    pub fn max_abs(&self) -> f64 {
        self.left.abs().max(self.right.abs())
    }
}

/// Orthogonal projection in the `H^1_0` seminorm onto `span{phi_1..phi_N}`.
///
/// With `derivative` supplied, `c_m = int g' P^_m`; otherwise
/// `c_m = -int g P^_m'` (integration by parts, boundary terms vanish).
/// `g` must vanish at both endpoints.
pub fn project_onto_basis(
    g: &dyn Fn(f64) -> f64,
    derivative: Option<&dyn Fn(f64) -> f64>,
    modes: usize,
    length: f64,
    integrator: &Integrator,
) -> Result<SpectralCoefficients> {
    let scale = sample_scale(g, length);
    for x in [0.0, length] {
        let value = g(x);
        if !(value.abs() <= COMPATIBILITY_TOLERANCE * scale) {
            return Err(Error::Compatibility { x, value });
        }
    }
    let (coeffs, _) = project_discarding_boundary(g, derivative, modes, length, integrator)?;
    Ok(coeffs)
}

/// Like [`project_onto_basis`] but accepts `g` with nonzero endpoint
/// values: the linear interpolant of those values is removed first, which
/// is exactly what `c_m = int g' P^_m` does since `P^_m` is orthogonal to
/// constants. Returns the endpoint values so callers can report them.
pub fn project_discarding_boundary(
    g: &dyn Fn(f64) -> f64,
    derivative: Option<&dyn Fn(f64) -> f64>,
    modes: usize,
    length: f64,
    integrator: &Integrator,
) -> Result<(SpectralCoefficients, BoundaryValues)> {
    let mut eval = BasisEvaluator::new(modes, length)?;
    let interval = Interval::from_length(length)?;
    let boundary = BoundaryValues {
        left: g(0.0),
        right: g(length),
    };
    let mut domain_error = None;
    let values = match derivative {
        Some(dg) => integrator.integrate_vector(
            |x, out| {
                if let Err(e) = eval.phi_derivative(x, out) {
                    domain_error = Some(e);
                }
                let d = dg(x);
                out.iter_mut().for_each(|v| *v *= d);
            },
            modes,
            interval,
        )?,
        None => {
            let mut v = integrator.integrate_vector(
                |x, out| {
                    if let Err(e) = eval.phi_second_derivative(x, out) {
                        domain_error = Some(e);
                    }
                    let gx = g(x);
                    out.iter_mut().for_each(|v| *v *= -gx);
                },
                modes,
                interval,
            )?;
            // Boundary terms [g P^_m]_0^l, with P^_m(l) = 1/(A_m sqrt(l))
            // and P^_m(0) = (-1)^m / (A_m sqrt(l)).
            let root = length.sqrt();
            for (i, c) in v.iter_mut().enumerate() {
                let m = i + 1;
                let end = 1.0 / (normalization(m) * root);
                let start = if m % 2 == 0 { end } else { -end };
                *c += boundary.right * end - boundary.left * start;
            }
            v
        }
    };
    if let Some(e) = domain_error {
        return Err(e);
    }
    Ok((SpectralCoefficients::new(length, values)?, boundary))
}

pub(crate) fn sample_scale(g: &dyn Fn(f64) -> f64, length: f64) -> f64 {
    (0..=32)
        .map(|i| g(length * i as f64 / 32.0).abs())
        .fold(1.0, f64::max)
}
