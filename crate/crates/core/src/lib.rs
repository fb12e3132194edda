//! Repeated weak measurement of position and of joint position/momentum, and
//! the nonlinear stochastic Schrödinger equation they converge to.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`], [`wavefunction`], [`hamiltonian`], [`weyl`]: spatial grids,
//!   spectral operators, split-step propagation and Weyl quantization.
//! - [`detector`]: pointer-state profiles, the measurement constant κ and
//!   exact sampling of pre-interaction pointer values.
//! - [`measurement`]: exact von Neumann and Arthurs–Kelly measurement steps
//!   and the repeated-measurement loop.
//! - [`sse`]: Euler–Maruyama integration of the limiting equation and the
//!   Lindblad drift of observables.
//! - [`stats`]: ensembles, limit-theorem diagnostics and the discrete to
//!   continuum convergence study.
//! - [`config`], [`io`], [`verify`]: run configuration, file formats and the
//!   invariant suite used by the command line tool.

pub mod config;
pub mod detector;
pub mod error;
pub mod fft;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod measurement;
pub mod quadrature;
pub mod rng;
pub mod spline;
pub mod sse;
pub mod stats;
pub mod verify;
pub mod wavefunction;
pub mod weyl;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
