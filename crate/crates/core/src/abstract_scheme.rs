//! Matrix realisation of the abstract three-layer scheme
//!
//! ```text
//! (u^{k+1} - 2u^k + u^{k-1}) / tau^2 + q_k A (u^{k+1} + u^{k-1}) / 2 + a1 B v^k = f1(t_k)
//! (v^{k+1} - 2v^k + v^{k-1}) / tau^2 + L (v^{k+1} + v^{k-1}) / 2 + a2 B u^k = f2(t_k)
//! ```
//!
//! with `q_k = alpha + beta <A u^k, u^k>` and `L = gamma A + delta C`, for
//! arbitrary finite-dimensional operator triples `(A, B, C)`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::galerkin::GalerkinOperatorSet;
use crate::linalg::{dot, norm, Cholesky, DenseMatrix, SymmetricEigen};
use crate::timestepper::PhysicalConstants;
use crate::Executor;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// `(A, B, C)` with `A` symmetric positive definite and `C` symmetric
/// positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTriple {
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    nu: f64,
    b0: f64,
    c_norm: f64,
}

fn check_square(m: &DenseMatrix, dim: usize) -> Result<()> {
    for found in [m.rows(), m.cols()] {
        if found != dim {
            return Err(Error::Dimension {
                expected: dim,
                found,
            });
        }
    }
    Ok(())
}

fn check_symmetric(m: &DenseMatrix, name: &str) -> Result<()> {
    if m.asymmetry() > SYMMETRY_TOLERANCE * m.max_abs().max(1.0) {
        return Err(Error::argument(alloc::format!("{name} is not symmetric")));
    }
    Ok(())
}

impl OperatorTriple {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        let dim = a.rows();
        if dim == 0 {
            return Err(Error::argument("operators must have positive dimension"));
        }
        check_square(&a, dim)?;
        check_square(&b, dim)?;
        check_square(&c, dim)?;
        check_symmetric(&a, "A")?;
        check_symmetric(&c, "C")?;
        let ea = SymmetricEigen::new(&a)?;
        if !(ea.min() > 0.0) {
            return Err(Error::NotPositiveDefinite {
                row: 0,
                pivot: ea.min(),
            });
        }
        let ec = SymmetricEigen::new(&c)?;
        if ec.min() < -SYMMETRY_TOLERANCE * c.max_abs().max(1.0) {
            return Err(Error::argument("C is not positive semidefinite"));
        }
        let b0 = subordination_with(&ea, &b)?;
        Ok(Self {
            nu: ea.min(),
            c_norm: ec.max().max(0.0),
            a,
            b,
            c,
            b0,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

    /// Smallest eigenvalue of `A`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Smallest `b` with `|Bx|^2 <= b^2 <Ax, x>`.
    pub fn b0(&self) -> f64 {
        self.b0
    }

    /// Spectral norm of `C`.
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    /// `gamma A + delta C`.
    pub fn l_operator(&self, gamma: f64, delta: f64) -> DenseMatrix {
        self.a.scaled(gamma).add(&self.c.scaled(delta))
    }

    /// `gamma + delta |C| / nu`, the constant with
    /// `<Lx, x> <= nu0 <Ax, x>`.
    pub fn nu0(&self, gamma: f64, delta: f64) -> f64 {
        gamma + self.c_norm * delta / self.nu
    }
}

/// `sqrt(lambda_max(A^{-1/2} B^T B A^{-1/2}))`.
pub fn subordination_constant(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    check_square(a, a.rows())?;
    check_square(b, a.rows())?;
    check_symmetric(a, "A")?;
    let ea = SymmetricEigen::new(a)?;
    if !(ea.min() > 0.0) {
        return Err(Error::NotPositiveDefinite {
            row: 0,
            pivot: ea.min(),
        });
    }
    subordination_with(&ea, b)
}

fn subordination_with(ea: &SymmetricEigen, b: &DenseMatrix) -> Result<f64> {
    let inv_sqrt = ea.map(|w| 1.0 / w.sqrt());
    let bt_b = b.transpose().matmul(b);
    let m = inv_sqrt.matmul(&bt_b).matmul(&inv_sqrt);
    // symmetrise against rounding before the eigen-solve
    let m = m.add(&m.transpose()).scaled(0.5);
    Ok(SymmetricEigen::new(&m)?.max().max(0.0).sqrt())
}

/// Layers `k - 1` and `k` of an abstract trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractState {
    pub k: usize,
    pub u_prev: Vec<f64>,
    pub u: Vec<f64>,
    pub v_prev: Vec<f64>,
    pub v: Vec<f64>,
    /// `alpha + beta <A u^k, u^k>`.
    pub q: f64,
}

impl AbstractState {
    pub fn new(
        k: usize,
        u_prev: Vec<f64>,
        u: Vec<f64>,
        v_prev: Vec<f64>,
        v: Vec<f64>,
        triple: &OperatorTriple,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        for x in [&u_prev, &u, &v_prev, &v] {
            if x.len() != triple.dim() {
                return Err(Error::Dimension {
                    expected: triple.dim(),
                    found: x.len(),
                });
            }
        }
        let q = constants.alpha + constants.beta * triple.a.quadratic_form(&u);
        Ok(Self {
            k,
            u_prev,
            u,
            v_prev,
            v,
            q,
        })
    }
}

fn check_len(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: x.len(),
        });
    }
    Ok(())
}

/// Initial data for [`starting_vectors`].
#[derive(Debug, Clone, Copy)]
pub struct AbstractInitialData<'a> {
    pub phi0: &'a [f64],
    pub phi1: &'a [f64],
    pub psi0: &'a [f64],
    pub psi1: &'a [f64],
    /// `f1(0)`.
    pub f1: &'a [f64],
    /// `f2(0)`.
    pub f2: &'a [f64],
}

/// Second-order starting layers
///
/// ```text
/// u^1 = phi0 + tau phi1 + tau^2/2 [f1(0) - a1 B psi0 - (alpha + beta <A phi0, phi0>) A phi0]
/// v^1 = psi0 + tau psi1 + tau^2/2 [f2(0) - a2 B phi0 - L psi0]
/// ```
pub fn starting_vectors(
    data: &AbstractInitialData<'_>,
    triple: &OperatorTriple,
    constants: &PhysicalConstants,
    tau: f64,
) -> Result<AbstractState> {
    let dim = triple.dim();
    for x in [data.phi0, data.phi1, data.psi0, data.psi1, data.f1, data.f2] {
        check_len(x, dim)?;
    }
    let c = constants;
    let q0 = c.alpha + c.beta * triple.a.quadratic_form(data.phi0);
    let a_phi = triple.a.matvec(data.phi0);
    let b_psi = triple.b.matvec(data.psi0);
    let b_phi = triple.b.matvec(data.phi0);
    let l_psi = triple.l_operator(c.gamma, c.delta).matvec(data.psi0);
    let h = 0.5 * tau * tau;
    let u1 = (0..dim)
        .map(|i| {
            data.phi0[i]
                + tau * data.phi1[i]
                + h * (data.f1[i] - c.a1 * b_psi[i] - q0 * a_phi[i])
        })
        .collect();
    let v1 = (0..dim)
        .map(|i| {
            data.psi0[i] + tau * data.psi1[i] + h * (data.f2[i] - c.a2 * b_phi[i] - l_psi[i])
        })
        .collect();
    AbstractState::new(
        1,
        data.phi0.to_vec(),
        u1,
        data.psi0.to_vec(),
        v1,
        triple,
        constants,
    )
}

/// One layer of the scheme; `f1`, `f2` are the forcings at `t_k`. The two
/// Cholesky solves go through `exec`.
pub fn abstract_step<E: Executor + ?Sized>(
    state: &AbstractState,
    triple: &OperatorTriple,
    f1: &[f64],
    f2: &[f64],
    constants: &PhysicalConstants,
    tau: f64,
    exec: &E,
) -> Result<AbstractState> {
    let dim = triple.dim();
    check_len(f1, dim)?;
    check_len(f2, dim)?;
    let c = constants;
    let tau2 = tau * tau;
    let layer = state.k;
    let (u_next, v_next) = exec.join(
        || -> Result<Vec<f64>> {
            let m = triple.a.scaled(0.5 * tau2 * state.q).shifted_identity(1.0);
            let bv = triple.b.matvec(&state.v);
            let rhs: Vec<f64> = (0..dim)
                .map(|i| tau2 * (f1[i] - c.a1 * bv[i]) + 2.0 * state.u[i])
                .collect();
            let w = Cholesky::factor(&m)?.solve(&rhs);
            Ok(w.iter().zip(&state.u_prev).map(|(a, b)| a - b).collect())
        },
        || -> Result<Vec<f64>> {
            let m = triple
                .l_operator(c.gamma, c.delta)
                .scaled(0.5 * tau2)
                .shifted_identity(1.0);
            let bu = triple.b.matvec(&state.u);
            let rhs: Vec<f64> = (0..dim)
                .map(|i| tau2 * (f2[i] - c.a2 * bu[i]) + 2.0 * state.v[i])
                .collect();
            let w = Cholesky::factor(&m)?.solve(&rhs);
            Ok(w.iter().zip(&state.v_prev).map(|(a, b)| a - b).collect())
        },
    );
    let u_next = u_next.map_err(|e| e.at_layer(layer))?;
    let v_next = v_next.map_err(|e| e.at_layer(layer))?;
    AbstractState::new(
        layer + 1,
        state.u.clone(),
        u_next,
        state.v.clone(),
        v_next,
        triple,
        constants,
    )
}

/// The six bounded quantities at layer `k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AbstractMonitors {
    /// `|u^k - u^{k-1}| / tau`.
    pub du: f64,
    /// `|v^k - v^{k-1}| / tau`.
    pub dv: f64,
    /// `<A u^k, u^k>^(1/2)`.
    pub au: f64,
    /// `<L v^k, v^k>^(1/2)`.
    pub lv: f64,
    /// `|A u^k|`.
    pub a_norm: f64,
    /// `<A du, du>^(1/2) / tau` with `du = u^k - u^{k-1}`.
    pub a_du: f64,
}

impl AbstractMonitors {
    pub fn to_array(&self) -> [f64; 6] {
        [self.du, self.dv, self.au, self.lv, self.a_norm, self.a_du]
    }

    pub fn max(&self, other: &Self) -> Self {
        Self {
            du: self.du.max(other.du),
            dv: self.dv.max(other.dv),
            au: self.au.max(other.au),
            lv: self.lv.max(other.lv),
            a_norm: self.a_norm.max(other.a_norm),
            a_du: self.a_du.max(other.a_du),
        }
    }
}

pub fn boundedness_monitor(
    state: &AbstractState,
    triple: &OperatorTriple,
    constants: &PhysicalConstants,
    tau: f64,
) -> AbstractMonitors {
    let du: Vec<f64> = state.u.iter().zip(&state.u_prev).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = state.v.iter().zip(&state.v_prev).map(|(a, b)| a - b).collect();
    let l = triple.l_operator(constants.gamma, constants.delta);
    let au = triple.a.matvec(&state.u);
    AbstractMonitors {
        du: norm(&du) / tau,
        dv: norm(&dv) / tau,
        au: dot(&au, &state.u).max(0.0).sqrt(),
        lv: l.quadratic_form(&state.v).max(0.0).sqrt(),
        a_norm: norm(&au),
        a_du: triple.a.quadratic_form(&du).max(0.0).sqrt() / tau,
    }
}

/// Forcing of an abstract trajectory, as a function of time.
pub trait AbstractForcing {
    /// Writes `f1(t)` and `f2(t)`.
    fn eval(&self, t: f64, f1: &mut [f64], f2: &mut [f64]);
}

/// No forcing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unforced;

impl AbstractForcing for Unforced {
    fn eval(&self, _: f64, f1: &mut [f64], f2: &mut [f64]) {
        f1.fill(0.0);
        f2.fill(0.0);
    }
}

/// Runs `steps` steps from the starting vectors and returns the running
/// maxima of the monitors together with the final state.
pub fn run_abstract<F: AbstractForcing + ?Sized, E: Executor + ?Sized>(
    triple: &OperatorTriple,
    initial: (&[f64], &[f64], &[f64], &[f64]),
    forcing: &F,
    constants: &PhysicalConstants,
    final_time: f64,
    steps: usize,
    exec: &E,
) -> Result<(AbstractState, AbstractMonitors)> {
    if steps < 2 || !(final_time > 0.0) {
        return Err(Error::argument("need T > 0 and at least two steps"));
    }
    let tau = final_time / steps as f64;
    let dim = triple.dim();
    let (mut f1, mut f2) = (vec![0.0; dim], vec![0.0; dim]);
    forcing.eval(0.0, &mut f1, &mut f2);
    let data = AbstractInitialData {
        phi0: initial.0,
        phi1: initial.1,
        psi0: initial.2,
        psi1: initial.3,
        f1: &f1,
        f2: &f2,
    };
    let mut state = starting_vectors(&data, triple, constants, tau)?;
    let mut maxima = boundedness_monitor(&state, triple, constants, tau);
    for k in 1..steps {
        forcing.eval(k as f64 * tau, &mut f1, &mut f2);
        state = abstract_step(&state, triple, &f1, &f2, constants, tau, exec)?;
        maxima = maxima.max(&boundedness_monitor(&state, triple, constants, tau));
    }
    Ok((state, maxima))
}

/// Spectrum bounds for [`random_triple`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleSpec {
    pub dim: usize,
    /// Eigenvalues of `A` are log-uniform in this range.
    pub a_spectrum: (f64, f64),
    /// `|C|` is scaled to this value.
    pub c_norm: f64,
    /// Subordination constant of `B`.
    pub b0: f64,
}

fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for c in &cols {
                let p = dot(&x, c);
                x.iter_mut().zip(c).for_each(|(xi, ci)| *xi -= p * ci);
            }
        }
        let n = norm(&x);
        if n > 1e-8 {
            x.iter_mut().for_each(|xi| *xi /= n);
            cols.push(x);
        }
    }
    DenseMatrix::from_fn(dim, dim, |i, j| cols[j][i])
}

/// `A = Q^T D Q` with log-uniform `D`, `C` a rank-deficient Gram matrix and
/// `B` a random matrix rescaled to the requested subordination constant.
pub fn random_triple<R: Rng + ?Sized>(rng: &mut R, spec: &TripleSpec) -> Result<OperatorTriple> {
    let (lo, hi) = spec.a_spectrum;
    if spec.dim == 0 || !(lo > 0.0 && hi >= lo) || !(spec.c_norm >= 0.0) || !(spec.b0 >= 0.0) {
        return Err(Error::argument("invalid triple specification"));
    }
    let d = spec.dim;
    let q = random_orthogonal(rng, d);
    let spectrum: Vec<f64> = (0..d)
        .map(|_| {
            if hi > lo {
                rng.random_range(lo.ln()..hi.ln()).exp()
            } else {
                lo
            }
        })
        .collect();
    let a = q.transpose().matmul(&DenseMatrix::from_diagonal(&spectrum)).matmul(&q);
    let a = a.add(&a.transpose()).scaled(0.5);

    let rank = d.div_ceil(2);
    let g = DenseMatrix::from_fn(rank, d, |_, _| rng.random_range(-1.0..1.0));
    let c = g.transpose().matmul(&g);
    let c = c.add(&c.transpose()).scaled(0.5);
    let c_max = SymmetricEigen::new(&c)?.max();
    let c = if c_max > 0.0 {
        c.scaled(spec.c_norm / c_max)
    } else {
        c
    };

    let b = DenseMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let raw = subordination_constant(&a, &b)?;
    let b = if raw > 0.0 { b.scaled(spec.b0 / raw) } else { b };
    OperatorTriple::new(a, b, c)
}

/// Squared norms `(gamma <Ax,x>, <Lx,x>, nu0 <Ax,x>)`; the first two
/// bound the middle one from below and above.
pub fn norm_equivalence(
    triple: &OperatorTriple,
    gamma: f64,
    delta: f64,
    x: &[f64],
) -> Result<(f64, f64, f64)> {
    check_len(x, triple.dim())?;
    let ax = triple.a.quadratic_form(x);
    let lx = triple.l_operator(gamma, delta).quadratic_form(x);
    Ok((gamma * ax, lx, triple.nu0(gamma, delta) * ax))
}

/// The Legendre-Galerkin system written as an abstract scheme.
///
/// With mass matrix `M = (l^2/4) H = G G^T` and `y = G^T c` for coefficient
/// vectors `c`: `A = G^{-1} G^{-T}`, `B = G^{-1} D G^{-T}` with
/// `D = (l/2) B_N`, and `C = I`. The `v`-equation has the opposite sign
/// convention for the coupling, so `a2` must be negated.
#[derive(Debug, Clone)]
pub struct SpectralRealization {
    triple: OperatorTriple,
    mass: Cholesky,
}

impl SpectralRealization {
    pub fn new(modes: usize, length: f64) -> Result<Self> {
        let ops = GalerkinOperatorSet::assemble(modes)?;
        let mass = Cholesky::factor(&ops.h_dense().scaled(0.25 * length * length))?;
        let n = modes;
        // G^{-1}, one column at a time
        let mut inv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = mass.solve_lower(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        let inv_t = inv.transpose();
        let a = inv.matmul(&inv_t);
        let a = a.add(&a.transpose()).scaled(0.5);
        let d = ops.b_dense().scaled(0.5 * length);
        let b = inv.matmul(&d).matmul(&inv_t);
        let triple = OperatorTriple::new(a, b, DenseMatrix::identity(n))?;
        Ok(Self { triple, mass })
    }

    pub fn triple(&self) -> &OperatorTriple {
        &self.triple
    }

    /// Constants for the abstract scheme.
    pub fn constants(&self, c: &PhysicalConstants) -> PhysicalConstants {
        PhysicalConstants { a2: -c.a2, ..*c }
    }

    /// `y = G^T c`.
    pub fn to_abstract(&self, coefficients: &[f64]) -> Vec<f64> {
        let l = self.mass.lower();
        let n = l.rows();
        (0..n)
            .map(|i| (i..n).map(|k| l[(k, i)] * coefficients[k]).sum())
            .collect()
    }

    /// `c = G^{-T} y`.
    pub fn from_abstract(&self, y: &[f64]) -> Vec<f64> {
        self.mass.solve_upper(y)
    }

    /// `G^{-1} F` for inner products `F_m = (f, phi_m)`.
    pub fn forcing(&self, inner_products: &[f64]) -> Vec<f64> {
        self.mass.solve_lower(inner_products)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SpectralCoefficients;
    use crate::benchmarks::make_benchmark;
    use crate::legendre::Integrator;
    use crate::timestepper::{
        forcing_projections, initial_layers, step_with_forcing, BeamProblem, TimeStepState,
    };
    use crate::Serial;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(alpha: f64) -> PhysicalConstants {
        PhysicalConstants {
            alpha,
            beta: 0.0,
            gamma: 1.0,
            delta: 0.0,
            a1: 0.0,
            a2: 0.0,
        }
    }

    fn scalar(a: f64) -> OperatorTriple {
        OperatorTriple::new(
            DenseMatrix::from_diagonal(&[a]),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn subordination_examples() {
        let i2 = DenseMatrix::identity(2);
        assert!((subordination_constant(&i2, &i2).unwrap() - 1.0).abs() < 1e-14);
        let b = subordination_constant(&i2.scaled(4.0), &i2).unwrap();
        assert!((b - 0.5).abs() < 1e-14);
        let a = DenseMatrix::from_diagonal(&[1.0, 9.0]);
        let anti = DenseMatrix::from_fn(2, 2, |i, j| if i + j == 1 { 1.0 } else { 0.0 });
        let b = subordination_constant(&a, &anti).unwrap();
        assert!((b - 1.0).abs() < 1e-14);
        // brute force over the unit circle
        let mut best: f64 = 0.0;
        for i in 0..10_000 {
            let th = core::f64::consts::PI * i as f64 / 10_000.0;
            let x = [th.cos(), th.sin()];
            let bx = anti.matvec(&x);
            best = best.max(dot(&bx, &bx) / a.quadratic_form(&x));
        }
        assert!((best.sqrt() - b).abs() < 1e-6);
        let singular = DenseMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(subordination_constant(&singular, &i2).is_err());
    }

    #[test]
    fn triple_validation() {
        let i2 = DenseMatrix::identity(2);
        let nonsym = DenseMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 1 { 1.0 } else { 2.0 * (i == j) as u8 as f64 });
        assert!(OperatorTriple::new(nonsym, i2.clone(), i2.clone()).is_err());
        let neg = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(OperatorTriple::new(i2.clone(), i2.clone(), neg).is_err());
        assert!(OperatorTriple::new(i2.clone(), DenseMatrix::identity(3), i2.clone()).is_err());
        let t = OperatorTriple::new(i2.scaled(3.0), i2.clone(), i2).unwrap();
        assert_eq!(t.nu(), 3.0);
        assert!((t.b0() - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn scalar_cosine() {
        let triple = scalar(1.0);
        let c = linear(1.0);
        for n in [100usize, 200, 400] {
            let tau = 1.0 / n as f64;
            let mut s = AbstractState::new(
                1,
                vec![1.0],
                vec![tau.cos()],
                vec![0.0],
                vec![0.0],
                &triple,
                &c,
            )
            .unwrap();
            let mut worst: f64 = 0.0;
            for _ in 1..n {
                s = abstract_step(&s, &triple, &[0.0], &[0.0], &c, tau, &Serial).unwrap();
                worst = worst.max((s.u[0] - (s.k as f64 * tau).cos()).abs());
                assert_eq!(s.v[0], 0.0);
            }
            assert!(worst < 0.2 * tau * tau, "{n}: {worst}");
        }
    }

    #[test]
    fn oscillator_energy_is_conserved() {
        let triple = scalar(1.0);
        let c = linear(1.0);
        let tau = 0.01;
        let mut s = AbstractState::new(1, vec![1.0], vec![tau.cos()], vec![0.0], vec![0.0], &triple, &c).unwrap();
        let energy = |s: &AbstractState| {
            let du = (s.u[0] - s.u_prev[0]) / tau;
            du * du + 0.5 * (s.u[0] * s.u[0] + s.u_prev[0] * s.u_prev[0])
        };
        let e0 = energy(&s);
        let first = boundedness_monitor(&s, &triple, &c, tau);
        let mut maxima = first;
        let mut halfway = first;
        for k in 1..10_000 {
            s = abstract_step(&s, &triple, &[0.0], &[0.0], &c, tau, &Serial).unwrap();
            assert!((energy(&s) - e0).abs() < 1e-10);
            maxima = maxima.max(&boundedness_monitor(&s, &triple, &c, tau));
            if k == 5_000 {
                halfway = maxima;
            }
        }
        for (a, b) in halfway.to_array().iter().zip(maxima.to_array()) {
            assert!((a - b).abs() <= 0.05 * b, "{a} {b}");
        }
    }

    #[test]
    fn zero_data_and_decoupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = TripleSpec {
            dim: 5,
            a_spectrum: (1.0, 50.0),
            c_norm: 2.0,
            b0: 1.5,
        };
        let triple = random_triple(&mut rng, &spec).unwrap();
        let z = vec![0.0; 5];
        let c = PhysicalConstants::default();
        let (s, m) = run_abstract(&triple, (&z, &z, &z, &z), &Unforced, &c, 1.0, 32, &Serial).unwrap();
        assert!(s.u.iter().chain(&s.v).all(|x| *x == 0.0));
        assert_eq!(m, AbstractMonitors::default());

        let c = PhysicalConstants {
            a1: 0.0,
            a2: 0.0,
            ..c
        };
        let psi0 = vec![0.1, -0.2, 0.3, 0.0, 0.05];
        let u_a = vec![1.0, 0.0, -1.0, 0.5, 0.2];
        let u_b = vec![-3.0, 2.0, 0.0, 0.1, 0.0];
        let (sa, _) = run_abstract(&triple, (&u_a, &z, &psi0, &z), &Unforced, &c, 1.0, 32, &Serial).unwrap();
        let (sb, _) = run_abstract(&triple, (&u_b, &u_a, &psi0, &z), &Unforced, &c, 1.0, 32, &Serial).unwrap();
        assert_eq!(sa.v, sb.v);
    }

    #[test]
    fn starting_vectors_limits() {
        let triple = scalar(2.0);
        let c = PhysicalConstants::default();
        let z = [0.0];
        let data = AbstractInitialData {
            phi0: &z,
            phi1: &z,
            psi0: &z,
            psi1: &z,
            f1: &z,
            f2: &z,
        };
        let s = starting_vectors(&data, &triple, &c, 0.1).unwrap();
        assert_eq!((s.u[0], s.v[0]), (0.0, 0.0));
        let data = AbstractInitialData {
            phi0: &[0.7],
            ..data
        };
        let mut last = f64::INFINITY;
        for tau in [1e-1, 1e-2, 1e-3] {
            let s = starting_vectors(&data, &triple, &c, tau).unwrap();
            let d = (s.u[0] - 0.7).abs();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn starting_vectors_are_third_order() {
        // linear, coupled d = 2 system; reference solution by RK4 with tiny steps
        let a = DenseMatrix::from_fn(2, 2, |i, j| [[3.0, 1.0], [1.0, 2.0]][i][j]);
        let b = DenseMatrix::from_fn(2, 2, |i, j| [[0.5, -1.0], [0.3, 0.2]][i][j]);
        let cm = DenseMatrix::from_diagonal(&[1.0, 0.0]);
        let triple = OperatorTriple::new(a, b, cm).unwrap();
        let c = PhysicalConstants {
            beta: 0.0,
            a1: 0.8,
            a2: -0.6,
            delta: 0.5,
            ..PhysicalConstants::default()
        };
        let (phi0, phi1, psi0, psi1) = ([1.0, -0.5], [0.2, 0.4], [0.3, 0.1], [-0.7, 0.0]);
        let l = triple.l_operator(c.gamma, c.delta);
        let accel = |u: &[f64], v: &[f64]| {
            let au = triple.a().matvec(u);
            let bv = triple.b().matvec(v);
            let lv = l.matvec(v);
            let bu = triple.b().matvec(u);
            (
                [-c.alpha * au[0] - c.a1 * bv[0], -c.alpha * au[1] - c.a1 * bv[1]],
                [-lv[0] - c.a2 * bu[0], -lv[1] - c.a2 * bu[1]],
            )
        };
        let reference = |t: f64| {
            let steps = 2000;
            let h = t / steps as f64;
            let mut y = [phi0[0], phi0[1], psi0[0], psi0[1], phi1[0], phi1[1], psi1[0], psi1[1]];
            let rhs = |y: &[f64; 8]| {
                let (au, av) = accel(&y[0..2], &y[2..4]);
                [y[4], y[5], y[6], y[7], au[0], au[1], av[0], av[1]]
            };
            for _ in 0..steps {
                let k1 = rhs(&y);
                let add = |y: &[f64; 8], k: &[f64; 8], s: f64| {
                    let mut r = *y;
                    r.iter_mut().zip(k).for_each(|(a, b)| *a += s * b);
                    r
                };
                let k2 = rhs(&add(&y, &k1, h / 2.0));
                let k3 = rhs(&add(&y, &k2, h / 2.0));
                let k4 = rhs(&add(&y, &k3, h));
                for i in 0..8 {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            y
        };
        let z = [0.0; 2];
        let mut errs = Vec::new();
        for tau in [0.08, 0.04, 0.02] {
            let data = AbstractInitialData {
                phi0: &phi0,
                phi1: &phi1,
                psi0: &psi0,
                psi1: &psi1,
                f1: &z,
                f2: &z,
            };
            let s = starting_vectors(&data, &triple, &c, tau).unwrap();
            let y = reference(tau);
            let e = [s.u[0] - y[0], s.u[1] - y[1], s.v[0] - y[2], s.v[1] - y[3]]
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            errs.push(e);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 2.7, "{errs:?}");
        }
    }

    #[test]
    fn random_triples_have_requested_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let spec = TripleSpec {
                dim: 8,
                a_spectrum: (0.5, 200.0),
                c_norm: 3.0,
                b0: 2.5,
            };
            let t = random_triple(&mut rng, &spec).unwrap();
            assert!((t.b0() - 2.5).abs() < 1e-10);
            assert!((t.c_norm() - 3.0).abs() < 1e-10);
            assert!(t.nu() >= 0.5 * (1.0 - 1e-12));
            for _ in 0..50 {
                let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
                let bx = t.b().matvec(&x);
                assert!(dot(&bx, &bx) <= t.b0().powi(2) * t.a().quadratic_form(&x) * (1.0 + 1e-10));
                assert!(t.c().quadratic_form(&x) >= -1e-12);
            }
        }
    }

    #[test]
    fn norm_equivalence_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = TripleSpec {
            dim: 10,
            a_spectrum: (0.1, 10.0),
            c_norm: 4.0,
            b0: 1.0,
        };
        let t = random_triple(&mut rng, &spec).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (lo, mid, hi) = norm_equivalence(&t, 0.7, 2.0, &x).unwrap();
            assert!(lo <= mid * (1.0 + 1e-12));
            assert!(mid <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn spectral_scheme_is_an_abstract_scheme() {
        let problem = make_benchmark(3).unwrap();
        let integ = Integrator::default();
        for modes in [1, 4, 8] {
            let p = crate::timestepper::SchemeParameters {
                modes,
                steps: 64,
                ..problem.default_parameters()
            };
            let real = SpectralRealization::new(modes, p.length).unwrap();
            let ac = real.constants(&p.constants);
            let ops = GalerkinOperatorSet::assemble(modes).unwrap();
            let init = initial_layers(&problem, &p, &integ).unwrap();
            let mut spectral =
                TimeStepState::new(1, init.u0.clone(), init.u1.clone(), init.v0.clone(), init.v1.clone(), &p.constants)
                    .unwrap();
            let mut abs = AbstractState::new(
                1,
                real.to_abstract(init.u0.values()),
                real.to_abstract(init.u1.values()),
                real.to_abstract(init.v0.values()),
                real.to_abstract(init.v1.values()),
                real.triple(),
                &ac,
            )
            .unwrap();
            assert!((abs.q - spectral.q).abs() < 1e-12 * spectral.q);
            for _ in 0..32 {
                let slice = problem.forcing_slice(p.time(spectral.k)).unwrap();
                let f = forcing_projections(&problem, &slice, modes, p.length, &integ).unwrap();
                let f1 = real.forcing(&f[0]);
                let f2 = real.forcing(&f[1]);
                abs = abstract_step(&abs, real.triple(), &f1, &f2, &ac, p.tau(), &Serial).unwrap();
                spectral = step_with_forcing(&spectral, &f, &ops, &p, &Serial).unwrap();
                let cu = real.from_abstract(&abs.u);
                let cv = real.from_abstract(&abs.v);
                let scale = spectral.u.values().iter().chain(spectral.v.values()).fold(1.0f64, |m, x| m.max(x.abs()));
                for (a, b) in cu.iter().zip(spectral.u.values()).chain(cv.iter().zip(spectral.v.values())) {
                    assert!((a - b).abs() <= 1e-10 * scale, "N = {modes}: {a} {b}");
                }
            }
            let _ = SpectralCoefficients::new(p.length, real.from_abstract(&abs.u)).unwrap();
        }
    }
}
