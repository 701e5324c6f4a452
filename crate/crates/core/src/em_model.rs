//! Radiated-wave-domain combiner of the HMA.
//!
//! `P` couples each dipole of the backing array to each unit-cell, `diag(t)`
//! applies the unit-cell transmission coefficients and `T` is the average power
//! insertion loss of the surface. The composite combiner is `sqrt(T)·P·diag(t)`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::geometry::ArrayLayout;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Default average insertion-loss coefficient of the surface.
pub const DEFAULT_T_LOSS: f64 = 0.7;

/// Wrap an angle to `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Field amplitude of the dipole-to-cell coupling, with the `sin²θ/r²` power
/// pattern normalized over the half sphere.
pub fn propagation_amplitude(r: f64, theta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {r}")));
    }
    let s = theta.sin();
    Ok((3.0 * SQRT_2 / (8.0 * PI) * s * s / (r * r)).sqrt())
}

/// Phase of the full Hertzian-dipole field at distance `r`, wrapped to `(-π, π]`.
pub fn propagation_phase(r: f64, wavenumber: f64) -> Result<f64> {
    if !(r > 0.0) || !(wavenumber > 0.0) {
        return Err(Error::Domain(format!(
            "distance and wavenumber must be positive, got r={r}, k={wavenumber}"
        )));
    }
    let kr = wavenumber * r;
    // 1 + 1/(j kr) - 1/(kr)^2
    let bracket = C64::new(1.0 - 1.0 / (kr * kr), -1.0 / kr);
    Ok(wrap_phase(PI / 2.0 - kr + bracket.arg()))
}

/// Build the `M×N` propagation matrix for a layout.
pub fn build_p_hms(layout: &ArrayLayout, wavelength: f64) -> Result<CMatrix> {
    let k0 = 2.0 * PI / wavelength;
    let (m, n) = (layout.n_elements(), layout.n_cells());
    let mut p = CMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let (r, theta) = layout.pair_geometry(i, j)?;
            let amp = propagation_amplitude(r, theta)?;
            let phase = propagation_phase(r, k0)?;
            p[(i, j)] = C64::from_polar(amp, phase);
        }
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct HmaModel {
    pub p_hms: CMatrix,
    pub t_hms: CVector,
    pub t_loss: f64,
    pub layout: Arc<ArrayLayout>,
}

impl HmaModel {
    /// Model with all-ones transmission coefficients.
    pub fn new(layout: Arc<ArrayLayout>, t_loss: f64) -> Result<Self> {
        if !(t_loss > 0.0 && t_loss <= 1.0) {
            return Err(Error::Domain(format!("insertion loss coefficient must be in (0,1], got {t_loss}")));
        }
        let p_hms = build_p_hms(&layout, layout.wavelength)?;
        let t_hms = CVector::from_element(layout.n_cells(), C64::new(1.0, 0.0));
        Ok(Self {
            p_hms,
            t_hms,
            t_loss,
            layout,
        })
    }

    pub fn with_t(mut self, t: CVector) -> Result<Self> {
        if t.len() != self.p_hms.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "t has {} entries, surface has {} cells",
                t.len(),
                self.p_hms.ncols()
            )));
        }
        self.t_hms = t;
        Ok(self)
    }

    pub fn n_cells(&self) -> usize {
        self.p_hms.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.p_hms.nrows()
    }

    pub fn rwd_combiner(&self) -> Result<CMatrix> {
        rwd_combiner(&self.p_hms, &self.t_hms, self.t_loss)
    }
}

/// `sqrt(T)·P·diag(t)`.
pub fn rwd_combiner(p_hms: &CMatrix, t: &CVector, t_loss: f64) -> Result<CMatrix> {
    if t.len() != p_hms.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "t has {} entries, P has {} columns",
            t.len(),
            p_hms.ncols()
        )));
    }
    let scale = t_loss.sqrt();
    let mut g = p_hms.clone();
    for (j, mut col) in g.column_iter_mut().enumerate() {
        col *= t[j] * scale;
    }
    Ok(g)
}

/// `Σ|t_n|² p_n − Σ p_n`; non-positive when the surface conserves power.
pub fn power_conservation_gap(t: &CVector, p_in: &[f64]) -> Result<f64> {
    if t.len() != p_in.len() {
        return Err(Error::DimensionMismatch(format!(
            "t has {} entries, p_in has {}",
            t.len(),
            p_in.len()
        )));
    }
    Ok(t.iter().zip(p_in).map(|(tn, p)| (tn.norm_sqr() - 1.0) * p).sum())
}
