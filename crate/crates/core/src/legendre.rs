//! Shifted Legendre polynomials on `[0, l]`, Gauss-Legendre rules and
//! adaptive composite integration.
//!
//! The shifted polynomial of degree `m` is `P~_m(x) = P_m(2x/l - 1)` and is
//! evaluated with the Bonnet recurrence
//! `(m + 1) P_{m+1} = (2m + 1) xi P_m - m P_{m-1}` at `xi = 2x/l - 1`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Largest polynomial degree accepted by the evaluators.
pub const MAX_DEGREE: usize = 256;

/// Points accepted outside `[0, l]` by at most this fraction of `l` are
/// clamped onto the interval instead of being rejected.
const DOMAIN_SLACK: f64 = 1e-12;

/// A closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::argument("interval requires finite a < b"));
        }
        Ok(Self { a, b })
    }

    /// `[0, length]`.
    pub fn from_length(length: f64) -> Result<Self> {
        Self::new(0.0, length)
    }

    pub fn start(&self) -> f64 {
        self.a
    }

    pub fn end(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// Maps `x in [0, length]` to `xi in [-1, 1]`.
pub(crate) fn reference_coordinate(x: f64, length: f64) -> Result<f64> {
    let slack = DOMAIN_SLACK * length;
    if !(x >= -slack && x <= length + slack) {
        return Err(Error::Domain { x, length });
    }
    let xi = 2.0 * x.clamp(0.0, length) / length - 1.0;
    Ok(xi.clamp(-1.0, 1.0))
}

fn check_degree(m: usize) -> Result<()> {
    if m > MAX_DEGREE {
        Err(Error::DegreeTooLarge(m))
    } else {
        Ok(())
    }
}

/// Fills `out[j] = P_j(xi)` for `j = 0..out.len()`.
pub fn legendre_values(xi: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = xi;
    }
    for m in 1..out.len().saturating_sub(1) {
        let mf = m as f64;
        out[m + 1] = ((2.0 * mf + 1.0) * xi * out[m] - mf * out[m - 1]) / (mf + 1.0);
    }
}

/// Fills values and first derivatives of `P_0 .. P_{len-1}` at `xi`.
///
/// Derivatives use `P'_{m+1} = P'_{m-1} + (2m + 1) P_m`, which stays finite
/// at the endpoints `xi = +-1`.
pub fn legendre_values_and_derivatives(xi: f64, values: &mut [f64], derivatives: &mut [f64]) {
    debug_assert_eq!(values.len(), derivatives.len());
    legendre_values(xi, values);
    if derivatives.is_empty() {
        return;
    }
    derivatives[0] = 0.0;
    if derivatives.len() > 1 {
        derivatives[1] = 1.0;
    }
    for m in 1..derivatives.len().saturating_sub(1) {
        derivatives[m + 1] = derivatives[m - 1] + (2.0 * m as f64 + 1.0) * values[m];
    }
}

fn legendre_pair(m: usize, xi: f64) -> (f64, f64) {
    // (P_m, P_m') without allocating.
    let (mut p_prev, mut p) = (1.0, xi);
    let (mut d_prev, mut d) = (0.0, 1.0);
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 1..m {
        let jf = j as f64;
        let p_next = ((2.0 * jf + 1.0) * xi * p - jf * p_prev) / (jf + 1.0);
        let d_next = d_prev + (2.0 * jf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// `P~_m(x) = P_m(2x/l - 1)` for `x in [0, l]`.
pub fn eval_shifted_legendre(m: usize, x: f64, length: f64) -> Result<f64> {
    check_degree(m)?;
    let xi = reference_coordinate(x, length)?;
    Ok(legendre_pair(m, xi).0)
}

/// `d/dx P~_m(x) = (2/l) P_m'(2x/l - 1)`.
pub fn eval_shifted_legendre_derivative(m: usize, x: f64, length: f64) -> Result<f64> {
    check_degree(m)?;
    let xi = reference_coordinate(x, length)?;
    Ok(2.0 / length * legendre_pair(m, xi).1)
}

/// Nodes and weights of a Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Strictly increasing, symmetric about zero.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule once on `[a, b]`.
    pub fn apply<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// `(int f, int |f|)` on `[a, b]` from one application of the rule.
    fn apply_with_magnitude<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let (mut sum, mut mag) = (0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            sum += w * v;
            mag += w * v.abs();
        }
        (sum * half, mag * half.abs())
    }
}

/// Refinement differences below this multiple of `eps * int |f|` are
/// rounding noise and always accepted.
const NOISE_FACTOR: f64 = 64.0 * f64::EPSILON;

/// Builds the `order`-point Gauss-Legendre rule.
///
/// Nodes are the roots of `P_order`, found by Newton iteration from
/// Chebyshev-like initial guesses; weights are `2 / ((1 - x^2) P'(x)^2)`.
pub fn gauss_legendre_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::argument("quadrature order must be at least 1"));
    }
    check_degree(order)?;
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Only the non-negative half is computed; the rest follows by symmetry.
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                dp = legendre_pair(n, x).1;
                break;
            }
        }
        if n % 2 == 1 && i == n / 2 {
            x = 0.0;
            dp = legendre_pair(n, x).1;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Guess i approximates the (i+1)-th largest root.
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
    })
}

/// Adaptive composite Gauss-Legendre integration.
///
/// A panel `[a, b]` is accepted when splitting it in two changes its
/// contribution by at most `tol * (b - a) / L`, where `L` is the length of
/// the whole interval (or, when a relative tolerance is set, by at most that
/// fraction of its own value); otherwise both halves are refined
/// recursively. Differences at the level of rounding error in `int |f|`
/// are always accepted, so unattainable tolerances cannot force endless
/// refinement.
#[derive(Debug, Clone)]
pub struct Integrator {
    rule: QuadratureRule,
    tol: f64,
    rel_tol: f64,
    max_depth: u32,
    min_depth: u32,
}

pub const DEFAULT_PANEL_ORDER: usize = 10;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_DEPTH: u32 = 32;

impl Default for Integrator {
    fn default() -> Self {
        Self::new(DEFAULT_PANEL_ORDER, DEFAULT_TOLERANCE).expect("default quadrature settings")
    }
}

impl Integrator {
    pub fn new(order: usize, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::argument("quadrature tolerance must be positive"));
        }
        Ok(Self {
            rule: gauss_legendre_rule(order)?,
            tol,
            rel_tol: 0.0,
            max_depth: DEFAULT_MAX_DEPTH,
            min_depth: 0,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::argument("quadrature tolerance must be positive"));
        }
        self.tol = tol;
        Ok(self)
    }

    /// Also accepts a panel whose refinement change is at most `rel_tol`
    /// times its own magnitude.
    pub fn with_relative_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol.max(0.0);
        self
    }

    pub fn with_max_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    /// Forces at least `depth` bisection levels before any panel is accepted.
    /// Guards against accepting a coarse panel when the integrand is tiny
    /// everywhere compared with the absolute tolerance.
    pub fn with_min_depth(mut self, depth: u32) -> Self {
        self.min_depth = depth;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, interval: Interval) -> Result<f64> {
        let (a, b) = (interval.start(), interval.end());
        let whole = self.rule.apply(a, b, &mut f);
        let (value, converged) = self.refine(&mut f, a, b, whole, 0, interval.length());
        if converged && value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Quadrature { estimate: value })
        }
    }

    fn refine<F: FnMut(f64) -> f64>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        whole: f64,
        depth: u32,
        total: f64,
    ) -> (f64, bool) {
        let mid = 0.5 * (a + b);
        let (left, lmag) = self.rule.apply_with_magnitude(a, mid, &mut *f);
        let (right, rmag) = self.rule.apply_with_magnitude(mid, b, &mut *f);
        let fine = left + right;
        let limit = (self.tol * (b - a) / total)
            .max(self.rel_tol * fine.abs())
            .max(NOISE_FACTOR * (lmag + rmag));
        if depth >= self.min_depth && (fine - whole).abs() <= limit {
            return (fine, true);
        }
        if depth >= self.max_depth || !fine.is_finite() {
            return (fine, false);
        }
        let (l, lok) = self.refine(f, a, mid, left, depth + 1, total);
        let (r, rok) = self.refine(f, mid, b, right, depth + 1, total);
        (l + r, lok && rok)
    }

    /// Integrates a vector-valued integrand component-wise with one shared
    /// panel tree; `f(x, out)` writes all `dim` components at `x`.
    ///
    /// A panel is accepted when every component meets the scalar criterion.
    pub fn integrate_vector<F: FnMut(f64, &mut [f64])>(
        &self,
        mut f: F,
        dim: usize,
        interval: Interval,
    ) -> Result<Vec<f64>> {
        let (a, b) = (interval.start(), interval.end());
        let mut scratch = vec![0.0; dim];
        let whole = self.apply_vector(&mut f, a, b, &mut scratch);
        let mut acc = vec![0.0; dim];
        let converged = self.refine_vector(
            &mut f,
            a,
            b,
            &whole,
            0,
            interval.length(),
            &mut scratch,
            &mut acc,
        );
        if converged && acc.iter().all(|v| v.is_finite()) {
            Ok(acc)
        } else {
            let estimate = acc.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            Err(Error::Quadrature { estimate })
        }
    }

    fn apply_vector<F: FnMut(f64, &mut [f64])>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        scratch: &mut [f64],
    ) -> Vec<f64> {
        self.apply_vector_with_magnitude(f, a, b, scratch).0
    }

    fn apply_vector_with_magnitude<F: FnMut(f64, &mut [f64])>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        scratch: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = vec![0.0; scratch.len()];
        let mut mag = vec![0.0; scratch.len()];
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            f(mid + half * x, scratch);
            for ((s, m), v) in sum.iter_mut().zip(mag.iter_mut()).zip(scratch.iter()) {
                *s += w * v;
                *m += w * v.abs();
            }
        }
        for (s, m) in sum.iter_mut().zip(mag.iter_mut()) {
            *s *= half;
            *m *= half.abs();
        }
        (sum, mag)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine_vector<F: FnMut(f64, &mut [f64])>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        whole: &[f64],
        depth: u32,
        total: f64,
        scratch: &mut [f64],
        acc: &mut [f64],
    ) -> bool {
        let mid = 0.5 * (a + b);
        let (left, lmag) = self.apply_vector_with_magnitude(f, a, mid, scratch);
        let (right, rmag) = self.apply_vector_with_magnitude(f, mid, b, scratch);
        let limit = self.tol * (b - a) / total;
        let mut accept = depth >= self.min_depth;
        let mut finite = true;
        for (i, w) in whole.iter().enumerate() {
            let fine = left[i] + right[i];
            finite &= fine.is_finite();
            let noise = NOISE_FACTOR * (lmag[i] + rmag[i]);
            if (fine - w).abs() > limit.max(self.rel_tol * fine.abs()).max(noise) {
                accept = false;
            }
        }
        if accept || depth >= self.max_depth || !finite {
            for ((s, l), r) in acc.iter_mut().zip(&left).zip(&right) {
                *s += l + r;
            }
            return accept;
        }
        let lok = self.refine_vector(f, a, mid, &left, depth + 1, total, scratch, acc);
        let rok = self.refine_vector(f, mid, b, &right, depth + 1, total, scratch, acc);
        lok && rok
    }
}

/// Integrates `f` over `interval` with the default panel order.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, interval: Interval, tol: f64) -> Result<f64> {
    Integrator::default().with_tolerance(tol)?.integrate(f, interval)
}

/// Normalisation constant `A_m = 1 / sqrt(2m + 1)`, so that
/// `(P~_i, P~_m) = l A_i A_m delta_im` on `[0, l]`.
pub fn normalization(m: usize) -> f64 {
    1.0 / ((2 * m + 1) as f64).sqrt()
}
