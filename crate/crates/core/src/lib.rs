//! Numerical core for the nonlinear dynamic Timoshenko beam system
//!
//! ```text
//! u_tt - (alpha + beta int_0^l u_x^2 dx) u_xx + a1 v_x = f1
//! v_tt - gamma v_xx + delta v - a2 u_x              = f2
//! ```
//!
//! on `(0, l)` with homogeneous Dirichlet data, discretised by a symmetric
//! three-layer scheme in time (nonlinear coefficient frozen at the middle
//! layer) and a Legendre-Galerkin method in space.
//!
//! The crate is `no_std` and only needs `alloc`. Parallelism is injected
//! through [`Executor`]; [`Serial`] runs everything on the calling thread.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod abstract_scheme;
pub mod basis;
pub mod benchmarks;
pub mod error;
pub mod galerkin;
pub mod legendre;
pub mod linalg;
pub mod reporting;
pub mod timestepper;

pub use error::{Error, Result};

/// Runs two independent closures, possibly in parallel.
///
/// Implementations must return exactly what running `a` then `b` serially
/// would return; the numerics never depend on the execution order.
pub trait Executor: Sync {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send;
}

/// Executes both closures on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        let ra = a();
        (ra, b())
    }
}
