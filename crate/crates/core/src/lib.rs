//! Gramian-based balanced truncation for bilinear systems with quadratic
//! outputs.
//!
//! A bilinear system with quadratic outputs (BQO system) couples bilinear
//! state dynamics with an output that carries both a linear term and
//! quadratic forms:
//!
//! ```text
//! x'(t) = A x(t) + sum_k N_k x(t) u_k(t) + B u(t),    x(0) = 0,
//! y_j(t) = (C x(t))_j + x(t)^T M_j x(t),              j = 1..p.
//! ```
//!
//! The crate provides:
//!
//! * [`lyapunov`] — dense solvers for standard and generalized Lyapunov
//!   equations (Schur-based direct solves and a fixed-point iteration),
//!   a Kronecker-product oracle for verification, residual evaluation,
//!   and positive-semidefinite factorization.
//! * [`model`] — the [`model::BqoSystem`] data type, validation, stability
//!   parameters and Gramian existence margins, and input scaling.
//! * [`gramians`] — reachability and observability Gramians in all their
//!   variants (standard, alternative, mixed, series) together with the
//!   truncated Gramians computable from standard solves only.
//! * [`reduction`] — square-root balanced truncation producing Hankel
//!   singular values, Petrov-Galerkin projections, and reduced systems.
//! * [`simulation`] — fixed-step RK4 time integration and the output
//!   error metrics used to validate reduced models.
//! * [`benchmarks`] — a boundary-controlled heat equation benchmark and a
//!   deterministic random system generator for property tests.
//!
//! The crate is `no_std` compatible (with `alloc`); disable the default
//! `std` feature for embedded or sandboxed use.
//!
//! ```
//! use bqo_core::nalgebra::DMatrix;
//! use bqo_core::{gramians, reduction, BqoSystem, SolverOptions};
//!
//! // Scalar system x' = -x + 0.5 x u + u, y = x + x^2.
//! let sys = BqoSystem::new(
//!     DMatrix::from_element(1, 1, -1.0),
//!     DMatrix::from_element(1, 1, 1.0),
//!     DMatrix::from_element(1, 1, 1.0),
//!     vec![DMatrix::from_element(1, 1, 0.5)],
//!     vec![DMatrix::from_element(1, 1, 1.0)],
//! )?;
//! let opts = SolverOptions::default();
//! let set = gramians::GramianSet::compute(
//!     &sys,
//!     gramians::GramianVariant::Standard,
//!     None,
//!     &opts,
//! )?;
//! let result = reduction::reduce_with(&sys, &set, 1)?;
//! assert!((result.reduced.a()[(0, 0)] - -1.0).abs() < 1e-8);
//! # Ok::<(), bqo_core::Error>(())
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub use nalgebra;

pub mod benchmarks;
pub mod error;
pub mod gramians;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod reduction;
pub mod simulation;

pub use error::{Error, Result};
pub use gramians::{GramianSet, GramianVariant, SeriesTerms};
pub use lyapunov::{LyapunovSolution, Side, SolverOptions};
pub use model::{BqoSystem, StabilityCertificate};
pub use reduction::BalancingResult;
pub use simulation::{ErrorReport, Trajectory};
