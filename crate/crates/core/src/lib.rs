//! Simulation and analysis of a tweezer-trapped nanoparticle coupled to an
//! optical cavity by coherent scattering.
//!
//! The crate covers the full chain from raw experimental settings to
//! observables:
//!
//! * [`params`] turns an [`ExperimentConfig`] into trap frequencies, drive
//!   rate and zero-point amplitudes, and computes the cavity mean field.
//! * [`couplings`] gives the optomechanical rates `g_x`, `g_y`, the direct
//!   `g_xy` coupling and the two competing frequency shifts (coherent
//!   scattering stiffening and optical spring softening).
//! * [`response`] holds the susceptibilities and hybridisation functions.
//! * [`qlt`] solves the linearised quantum Langevin equations in the
//!   frequency domain to produce displacement PSDs and cross-spectra.
//! * [`rotation`] predicts the mode rotation angle and locates the
//!   cancellation point where static and dynamical rotations cancel.
//! * [`extraction`] recovers peak frequencies and rotation angles from
//!   spectra, including detector cross-talk.
//!
//! Angular frequencies are in rad/s throughout the library. Conversion to
//! and from Hz happens only at the file boundary.

pub mod constants;
pub mod couplings;
mod error;
pub mod extraction;
mod fit;
pub mod grid;
pub mod io;
pub mod params;
mod point;
pub mod qlt;
pub mod response;
mod roots;
pub mod rotation;

pub use couplings::{Couplings, FrequencyShifts, ShiftModel};
pub use error::{Axis, Error, Result};
pub use extraction::{AngleBias, AngleEstimate, PeakFit, Window};
pub use grid::FrequencyGrid;
pub use params::{DerivedParams, ExperimentConfig, MeanField};
pub use point::OperatingPoint;
pub use qlt::{LinearModel, NoiseModel, SpectraSet};
pub use response::{Backaction, ComplexResponse, Hybridisation, Resonances};
pub use rotation::{CancellationMap, ModeAngle};
pub use roots::bisect;

pub use num_complex::Complex64;
