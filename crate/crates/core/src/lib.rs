//! Selective-harmonic-elimination toolkit for cascaded H-bridge multilevel
//! inverters.
//!
//! The crate covers the full workflow for an `s`-bridge (2s+1 level) inverter:
//!
//! - [`harmonics`]: closed-form Fourier analysis of the quarter-wave staircase
//!   and staircase waveform synthesis,
//! - [`she_solver`]: Newton-Raphson solution of the harmonic-elimination
//!   system with multi-start globalization and continuation sweeps,
//! - [`ann`]: a small from-scratch feed-forward network that learns the
//!   modulation-index to switching-angle map,
//! - [`simulator`]: time-domain simulation of SPWM open loop, SHE gating and
//!   PI closed-loop operation,
//! - [`spectrum`]: synchronous-projection harmonic decomposition and THD,
//! - [`io`]: the CSV/JSON codecs shared by the CLI and the Python bindings.
//!
//! All operations are deterministic: anything randomized takes an explicit
//! seed, and identical inputs produce bit-identical outputs.

pub mod ann;
pub mod error;
pub mod harmonics;
pub mod io;
pub mod she_solver;
pub mod simulator;
pub mod spectrum;

pub use error::{Error, Result};
pub use harmonics::SwitchingAngleSet;
pub use she_solver::{AngleSolution, AngleTable, HarmonicSet};
