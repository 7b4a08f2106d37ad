//! Experiment harness around [`timoshenko_core`]: report files, benchmark
//! runs, convergence studies and the command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod demo;
pub mod error;
pub mod executor;
pub mod report;
pub mod study;

pub use error::AppError;
pub use executor::Rayon;
