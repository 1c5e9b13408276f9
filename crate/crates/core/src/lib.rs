//! Quantum phase estimation laboratory.
//!
//! A statevector simulator, circuit builders for controlled Pauli
//! exponentials and the inverse Fourier transform, model Hamiltonians,
//! textbook and iterative phase estimation, circular statistics of the
//! readout, and straight-line fits of phase against evolution time.

pub mod circstats;
pub mod circuits;
pub mod error;
pub mod experiment;
pub mod fitting;
pub mod linalg;
pub mod models;
pub mod qpe;
pub mod rng;
pub mod statevec;

pub use error::{Error, Result};
