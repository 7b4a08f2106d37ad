//! Galerkin matrices of the trial basis and the parity-split solver.
//!
//! With `M = (phi_i, phi_m)` the mass matrix and `(phi_i', phi_m') =
//! delta_im`, the closed forms are `M = (l^2/4) H` and
//! `(phi_i', phi_m) = (l/2) b_{m,i}`, where
//!
//! * `H` is symmetric with `h_ii = 2 A_{i-1}^2 A_{i+1}^2` and
//!   `h_{i,i+2} = h_{i+2,i} = -A_i A_{i+1}^2 A_{i+2}`;
//! * `B` is skew-symmetric with `b_{i,i+1} = -b_{i+1,i} = A_i A_{i+1}`.
//!
//! A shifted matrix `H + s I` has a zero first off-diagonal, so its odd- and
//! even-indexed unknowns form two independent tridiagonal systems.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Parity, Result};
use crate::legendre::{normalization, Integrator, Interval, MAX_DEGREE};
use crate::linalg::DenseMatrix;
use crate::basis::BasisEvaluator;
use crate::Executor;

/// Banded `H_N` and `B_N` for a basis of size `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinOperatorSet {
    modes: usize,
    h_diagonal: Vec<f64>,
    /// `h_gap[i] = h_{i,i+2}` (zero-based), length `N - 2`.
    h_gap: Vec<f64>,
    /// `b_band[i] = b_{i,i+1}` (zero-based), length `N - 1`.
    b_band: Vec<f64>,
}

impl GalerkinOperatorSet {
    pub fn assemble(modes: usize) -> Result<Self> {
        assemble_operators(modes)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn h_diagonal(&self) -> &[f64] {
        &self.h_diagonal
    }

    pub fn h_gap(&self) -> &[f64] {
        &self.h_gap
    }

    pub fn b_band(&self) -> &[f64] {
        &self.b_band
    }

    /// `H x`.
    pub fn apply_h(&self, x: &[f64]) -> Vec<f64> {
        let n = self.modes;
        debug_assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.h_diagonal.iter().zip(x).map(|(d, v)| d * v).collect();
        for (i, g) in self.h_gap.iter().enumerate() {
            y[i] += g * x[i + 2];
            y[i + 2] += g * x[i];
        }
        y
    }

    /// `B x`.
    pub fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        let n = self.modes;
        debug_assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for (i, b) in self.b_band.iter().enumerate() {
            y[i] += b * x[i + 1];
            y[i + 1] -= b * x[i];
        }
        y
    }

    pub fn h_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::from_diagonal(&self.h_diagonal);
        for (i, g) in self.h_gap.iter().enumerate() {
            m[(i, i + 2)] = *g;
            m[(i + 2, i)] = *g;
        }
        m
    }

    pub fn b_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.modes, self.modes);
        for (i, b) in self.b_band.iter().enumerate() {
            m[(i, i + 1)] = *b;
            m[(i + 1, i)] = -*b;
        }
        m
    }
}

/// Closed-form assembly of `H_N` and `B_N`.
pub fn assemble_operators(modes: usize) -> Result<GalerkinOperatorSet> {
    if modes == 0 {
        return Err(Error::argument("basis size must be at least 1"));
    }
    if modes + 2 > MAX_DEGREE {
        return Err(Error::DegreeTooLarge(modes + 1));
    }
    let a = |m: usize| normalization(m);
    let h_diagonal = (1..=modes)
        .map(|i| {
            let (lo, hi) = (a(i - 1), a(i + 1));
            2.0 * lo * lo * hi * hi
        })
        .collect();
    let h_gap = (1..modes.saturating_sub(1))
        .map(|i| -a(i) * a(i + 1) * a(i + 1) * a(i + 2))
        .collect();
    let b_band = (1..modes).map(|i| a(i) * a(i + 1)).collect();
    Ok(GalerkinOperatorSet {
        modes,
        h_diagonal,
        h_gap,
        b_band,
    })
}

/// `H_N + s I` with its right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTridiagonalSystem {
    diagonal: Vec<f64>,
    gap: Vec<f64>,
    rhs: Vec<f64>,
}

impl GapTridiagonalSystem {
    /// Builds a system from raw bands. `gap[i]` couples unknowns `i` and
    /// `i + 2`.
    pub fn new(diagonal: Vec<f64>, gap: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = diagonal.len();
        if n == 0 {
            return Err(Error::argument("empty system"));
        }
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: rhs.len(),
            });
        }
        if gap.len() != n.saturating_sub(2) {
            return Err(Error::Dimension {
                expected: n.saturating_sub(2),
                found: gap.len(),
            });
        }
        Ok(Self { diagonal, gap, rhs })
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn gap(&self) -> &[f64] {
        &self.gap
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::from_diagonal(&self.diagonal);
        for (i, g) in self.gap.iter().enumerate() {
            m[(i, i + 2)] = *g;
            m[(i + 2, i)] = *g;
        }
        m
    }

    /// `T x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diagonal.iter().zip(x).map(|(d, v)| d * v).collect();
        for (i, g) in self.gap.iter().enumerate() {
            y[i] += g * x[i + 2];
            y[i + 2] += g * x[i];
        }
        y
    }

    /// Ordinary tridiagonal system of one parity class.
    fn subsystem(&self, parity: Parity) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let start = match parity {
            Parity::Odd => 0,
            Parity::Even => 1,
        };
        let diag: Vec<f64> = self.diagonal.iter().skip(start).step_by(2).copied().collect();
        let off: Vec<f64> = self.gap.iter().skip(start).step_by(2).copied().collect();
        let rhs: Vec<f64> = self.rhs.iter().skip(start).step_by(2).copied().collect();
        debug_assert_eq!(off.len(), diag.len().saturating_sub(1));
        (diag, off, rhs)
    }
}

/// `(H + shift I) x = rhs`.
pub fn build_shifted_system(
    ops: &GalerkinOperatorSet,
    shift: f64,
    rhs: Vec<f64>,
) -> Result<GapTridiagonalSystem> {
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(Error::argument("diagonal shift must be positive"));
    }
    let diagonal = ops.h_diagonal.iter().map(|d| d + shift).collect();
    GapTridiagonalSystem::new(diagonal, ops.h_gap.clone(), rhs)
}

/// Symmetric tridiagonal elimination without pivoting.
///
/// `off[i]` couples unknowns `i` and `i + 1`. Every pivot must be positive.
pub fn solve_symmetric_tridiagonal(
    diag: &[f64],
    off: &[f64],
    rhs: &[f64],
    parity: Parity,
) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    for i in 0..n {
        let sub = if i > 0 { off[i - 1] } else { 0.0 };
        let pivot = diag[i] - if i > 0 { sub * c[i - 1] } else { 0.0 };
        if !(pivot > 0.0) {
            return Err(Error::Pivot {
                parity,
                index: i,
                pivot,
            });
        }
        if i + 1 < n {
            c[i] = off[i] / pivot;
        }
        x[i] = (x[i] - if i > 0 { sub * x[i - 1] } else { 0.0 }) / pivot;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn solve_parity(system: &GapTridiagonalSystem, parity: Parity) -> Result<Vec<f64>> {
    let (d, o, r) = system.subsystem(parity);
    solve_symmetric_tridiagonal(&d, &o, &r, parity)
}

/// Solves a gap system by splitting unknowns by parity; the two halves are
/// handed to `exec` and may run concurrently.
pub fn solve_gap_tridiagonal_with<E: Executor + ?Sized>(
    system: &GapTridiagonalSystem,
    exec: &E,
) -> Result<Vec<f64>> {
    let (odd, even) = exec.join(
        || solve_parity(system, Parity::Odd),
        || solve_parity(system, Parity::Even),
    );
    let (odd, even) = (odd?, even?);
    let mut x = vec![0.0; system.size()];
    for (i, v) in odd.into_iter().enumerate() {
        x[2 * i] = v;
    }
    for (i, v) in even.into_iter().enumerate() {
        x[2 * i + 1] = v;
    }
    Ok(x)
}

pub fn solve_gap_tridiagonal(system: &GapTridiagonalSystem) -> Result<Vec<f64>> {
    solve_gap_tridiagonal_with(system, &crate::Serial)
}

/// Quadrature assembly of `(4/l^2) [a (phi_i, phi_m) + b (phi_i', phi_m')]`.
///
/// Independent of the closed forms above; used to cross-check them.
pub fn assemble_oracle(
    modes: usize,
    length: f64,
    a: f64,
    b: f64,
    integrator: &Integrator,
) -> Result<DenseMatrix> {
    let mut eval = BasisEvaluator::new(modes, length)?;
    let interval = Interval::from_length(length)?;
    let mut phi = vec![0.0; modes];
    let mut dphi = vec![0.0; modes];
    let mut failure = None;
    let flat = integrator.integrate_vector(
        |x, out| {
            if let Err(e) = eval
                .phi(x, &mut phi)
                .and_then(|_| eval.phi_derivative(x, &mut dphi))
            {
                failure = Some(e);
            }
            for i in 0..modes {
                for m in 0..modes {
                    out[i * modes + m] = a * phi[i] * phi[m] + b * dphi[i] * dphi[m];
                }
            }
        },
        modes * modes,
        interval,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let scale = 4.0 / (length * length);
    Ok(DenseMatrix::from_fn(modes, modes, |i, m| scale * flat[i * modes + m]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_dense;

    #[test]
    fn n2_assembly() {
        let ops = assemble_operators(2).unwrap();
        assert!((ops.h_diagonal()[0] - 0.4).abs() < 1e-15);
        assert!((ops.h_diagonal()[1] - 2.0 / 21.0).abs() < 1e-15);
        assert!(ops.h_gap().is_empty());
        let b = ops.b_dense();
        assert!((b[(0, 1)] - 1.0 / 15f64.sqrt()).abs() < 1e-15);
        assert!((b[(1, 0)] + 1.0 / 15f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn n3_gap_entry() {
        let ops = assemble_operators(3).unwrap();
        let expected = -1.0 / (5.0 * 21f64.sqrt());
        assert!((ops.h_gap()[0] - expected).abs() < 1e-15);
        let h = ops.h_dense();
        assert_eq!(h[(0, 2)], h[(2, 0)]);
        assert_eq!(h[(0, 1)], 0.0);
    }

    #[test]
    fn b_has_zero_diagonal() {
        for n in 1..20 {
            let b = assemble_operators(n).unwrap().b_dense();
            for i in 0..n {
                assert_eq!(b[(i, i)], 0.0);
            }
        }
        assert!(assemble_operators(0).is_err());
    }

    #[test]
    fn shifted_system_examples() {
        let ops = assemble_operators(2).unwrap();
        let sys = build_shifted_system(&ops, 1.0, vec![0.0; 2]).unwrap();
        assert!((sys.diagonal()[0] - 1.4).abs() < 1e-15);
        assert!((sys.diagonal()[1] - (1.0 + 2.0 / 21.0)).abs() < 1e-15);
        assert!(sys.gap().is_empty());
        assert!(build_shifted_system(&ops, 0.0, vec![0.0; 2]).is_err());
        assert!(build_shifted_system(&ops, -1.0, vec![0.0; 2]).is_err());

        let ops3 = assemble_operators(3).unwrap();
        let sys3 = build_shifted_system(&ops3, 1.0, vec![0.0; 3]).unwrap();
        assert!((sys3.gap()[0] + 1.0 / (5.0 * 21f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn diagonal_solves() {
        let d = vec![1.4, 1.0 + 2.0 / 21.0];
        let sys = GapTridiagonalSystem::new(d.clone(), vec![], d).unwrap();
        let x = solve_gap_tridiagonal(&sys).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);

        let r = vec![3.0, -1.0, 2.0, 0.5, 7.0];
        let sys = GapTridiagonalSystem::new(vec![1.0; 5], vec![0.0; 3], r.clone()).unwrap();
        assert_eq!(solve_gap_tridiagonal(&sys).unwrap(), r);
    }

    #[test]
    fn matches_dense_elimination() {
        let ops = assemble_operators(33).unwrap();
        let rhs: Vec<f64> = (0..33).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let sys = build_shifted_system(&ops, 0.37, rhs.clone()).unwrap();
        let x = solve_gap_tridiagonal(&sys).unwrap();
        let oracle = solve_dense(&sys.to_dense(), &rhs).unwrap();
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn pivot_failure_names_subsystem() {
        let sys = GapTridiagonalSystem::new(vec![1.0, 1.0, 1.0, -2.0], vec![0.0, 0.0], vec![1.0; 4])
            .unwrap();
        match solve_gap_tridiagonal(&sys) {
            Err(Error::Pivot { parity, index, .. }) => {
                assert_eq!(parity, Parity::Even);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_examples() {
        let integ = Integrator::default();
        let stiff = assemble_oracle(4, 2.0, 0.0, 1.0, &integ).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((stiff[(i, j)] - e).abs() < 1e-12);
            }
        }
        let mass = assemble_oracle(4, 2.0, 1.0, 0.0, &integ).unwrap();
        let h = assemble_operators(4).unwrap().h_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert!((mass[(i, j)] - h[(i, j)]).abs() < 1e-11);
            }
        }
        let s = 0.8;
        let shifted = assemble_oracle(2, 2.0, 1.0, s, &integ).unwrap();
        let sys = build_shifted_system(&assemble_operators(2).unwrap(), s, vec![0.0; 2]).unwrap();
        let dense = sys.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((shifted[(i, j)] - dense[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
