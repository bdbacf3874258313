//! eigenforge: generation of PDE operator eigenvalue datasets.
//!
//! The pipeline samples random coefficient fields, discretizes four operator
//! families to dense symmetric matrices, reorders the problem sequence with a
//! truncated-FFT greedy sort, and solves the sequence with a warm-started
//! Chebyshev filtered subspace iteration. A dense eigensolver serves as the
//! ground-truth oracle.

pub mod cheb;
pub mod chfsi;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fftsort;
pub mod linalg;
pub mod operators;
pub mod pipeline;

pub use error::{EigenError, Result};
