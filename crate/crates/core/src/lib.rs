//! Simulation and characterization of a Toffoli gate built from qutrit
//! subspace rotations on three transmons.
//!
//! The crate is organized bottom-up:
//!
//! - [`register`]: dense states and operators on mixed qubit/qutrit registers.
//! - [`gates`]: single-qubit rotations, `|11> <-> |20>` rotations, the
//!   CCPHASE and Toffoli sequences, and truth tables.
//! - [`noise`]: amplitude damping and dephasing from measured coherence times.
//! - [`tomography`]: 64-input process tomography, chi matrices, physicality
//!   projection and bootstrap intervals.
//! - [`certify`]: Choi states, relevant Pauli observables and Monte Carlo
//!   fidelity estimation.
//! - [`runner`]: the reproducible experiment runner behind the `toffoli` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod certify;
pub mod channel;
pub mod error;
pub mod gates;
pub mod noise;
pub mod register;
pub mod rng;
pub mod runner;
pub mod tomography;

pub use error::{Error, Result};
