//! Uplink link-level simulation for Huygens' metasurface antennas (HMAs).
//!
//! An HMA is a thin metasurface of sub-wavelength unit-cells placed in front of
//! a small digital phased array. The metasurface acts as a combiner in the
//! radiated wave domain, so only a handful of RF chains are needed. This crate
//! models that combiner, optimizes it with a quadratic-transform fractional
//! programming scheme, and compares rate and energy efficiency against digital
//! and hybrid phased arrays under a hardware power model.
//!
//! Module map:
//! - [`geometry`]: planar unit-cell / dipole layouts and pair geometry.
//! - [`em_model`]: propagation matrix, transmission coefficients, insertion loss.
//! - [`channel`]: correlated Rayleigh channels, user drops, noise powers, channel files.
//! - [`link_optimizer`]: SINR, sum rate, FP optimizer, ZF and phase-alignment combiners.
//! - [`baselines`]: digital (MRC/ZF) and fully-connected active hybrid arrays.
//! - [`power_model`]: device catalog, RF-chain/metasurface power, energy efficiency.
//! - [`harness`]: config parsing, seeded Monte-Carlo runner, CSV output.

// NaN-rejecting guards read as `!(x > 0.0)`; dense index loops mirror the matrix math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod baselines;
pub mod channel;
pub mod em_model;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod link_optimizer;
pub mod power_model;

pub use error::{Error, Result};

pub use nalgebra::Complex;

/// Complex double used for every field and matrix entry.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Free-space wave impedance used throughout, ohms.
pub const ETA0: f64 = 377.0;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Convert decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to decibels.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// Free-space wavelength for a carrier in GHz.
pub fn wavelength_for_ghz(fc_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (fc_ghz * 1e9)
}
