//! Photophysics of optically active point defects: phonon-sideband modeling
//! and polarization spectroscopy analysis.
//!
//! The crate models a defect's optical transition as two electronic states
//! coupled to harmonic lattice modes (the configuration-coordinate picture)
//! and provides the full measurement-analysis chain built on top of it:
//!
//! - [`vibronic`]: Franck-Condon factors, thermal occupation, Debye-Waller
//!   weights and phonon-sideband weight distributions.
//! - [`spectra`]: emission/absorption band synthesis, spectral-density
//!   conversions, band mirroring and peak location.
//! - [`polarfit`]: cos² polarization fits, visibility, dipole misalignment
//!   and the wavelength/polarization instrument calibration.
//! - [`photostats`]: antibunching (g²) and excited-state lifetime fits.
//! - [`classify`]: Stokes-shift phonon-region assignment, direct/indirect
//!   excitation verdicts and survey aggregation.
//! - [`synth`]: seeded forward-model generators used as independent oracles
//!   for every analysis routine.
//! - [`io`]: the CSV / JSON-lines file formats shared by the CLI.
//!
//! All analysis operations are pure functions of their inputs: no global
//! state, deterministic results, safe to call from any number of threads.

pub mod classify;
pub mod constants;
pub mod error;
pub mod io;
pub mod photostats;
pub mod polarfit;
pub mod scenario;
pub mod spectra;
pub mod stats;
pub mod synth;
pub mod vibronic;

mod angles;
mod fitting;

pub use error::{Error, Result};
