//! Quantum kicked rotor driven by binary kick sequences.
//!
//! Modules, bottom up: [`kickseq`] generates the kick labels, [`hilbert`] holds
//! the truncated momentum basis and operator builders, [`evolve`] runs the
//! split-step dynamics, [`bchcoeff`] tracks the exact BCH coefficients along the
//! Fibonacci word, [`effham`] builds and diagonalizes effective generators, and
//! [`analysis`] classifies energy traces.

pub mod analysis;
pub mod bchcoeff;
pub mod effham;
pub mod error;
pub mod evolve;
pub mod hilbert;
pub mod io;
pub mod kickseq;
pub mod special;

pub use error::{Error, Result};
