//! Physical constants used throughout the crate.

/// Planck constant times speed of light, in eV·nm.
///
/// Single source of truth for every wavelength ↔ energy conversion so that
/// results are bit-reproducible across modules.
pub const HC_EV_NM: f64 = 1239.8419;

/// Boltzmann constant in meV/K (CODATA 2018).
pub const BOLTZMANN_MEV_PER_K: f64 = 8.617333262e-2;
