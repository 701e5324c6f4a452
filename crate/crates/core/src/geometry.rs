//! Planar layouts for the metasurface (HMS) and its backing dipole array (DPA).
//!
//! Coordinates: the HMS lies in the z-x plane at `y = 0`, the DPA on the
//! parallel plane `y = -d_sep`. Both grids are centered on the y axis. Dipoles
//! are oriented along z.

use nalgebra::Vector3;

use crate::{Error, Result};

/// Effective area of one patch element of a conventional phased array, m².
pub const PATCH_EFF_AREA: f64 = 0.0026;

const GRID_EPS: f64 = 1e-9;

/// Inputs of [`build_planar_layout`]. Lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSpec {
    pub aperture_z: f64,
    pub aperture_x: f64,
    pub cell_pitch: f64,
    pub dpa_rows: usize,
    pub dpa_cols: usize,
    pub d_sep: f64,
    pub wavelength: f64,
}

impl PlanarSpec {
    /// Square aperture of `side` wavelengths with λ/4 unit-cells and the DPA
    /// one wavelength behind the surface.
    pub fn square_hma(side_wavelengths: f64, dpa_rows: usize, dpa_cols: usize, wavelength: f64) -> Self {
        Self {
            aperture_z: side_wavelengths * wavelength,
            aperture_x: side_wavelengths * wavelength,
            cell_pitch: wavelength / 4.0,
            dpa_rows,
            dpa_cols,
            d_sep: wavelength,
            wavelength,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    /// Unit-cell centers, `N` entries.
    pub hms_positions: Vec<Vector3<f64>>,
    /// Dipole element centers, `M` entries.
    pub dpa_positions: Vec<Vector3<f64>>,
    /// Physical (= effective) area of one unit-cell, m².
    pub unit_cell_area: f64,
    pub dpa_elem_eff_area: f64,
    pub wavelength: f64,
    pub d_sep: f64,
}

fn grid_count(extent: f64, pitch: f64) -> usize {
    (extent / pitch + GRID_EPS).floor() as usize
}

fn centered(i: usize, count: usize, pitch: f64) -> f64 {
    (i as f64 - (count as f64 - 1.0) / 2.0) * pitch
}

/// Tile the aperture with a uniform unit-cell grid and place a λ/2-pitch dipole
/// grid behind it.
pub fn build_planar_layout(spec: &PlanarSpec) -> Result<ArrayLayout> {
    let dims = [
        ("aperture_z", spec.aperture_z),
        ("aperture_x", spec.aperture_x),
        ("cell_pitch", spec.cell_pitch),
        ("d_sep", spec.d_sep),
        ("wavelength", spec.wavelength),
    ];
    for (name, v) in dims {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidGeometry(format!("{name} must be positive, got {v}")));
        }
    }
    if spec.dpa_rows == 0 || spec.dpa_cols == 0 {
        return Err(Error::InvalidGeometry("DPA needs at least one element".into()));
    }
    let nz = grid_count(spec.aperture_z, spec.cell_pitch);
    let nx = grid_count(spec.aperture_x, spec.cell_pitch);
    if nz == 0 || nx == 0 {
        return Err(Error::InvalidGeometry(format!(
            "aperture {}x{} smaller than cell pitch {}",
            spec.aperture_z, spec.aperture_x, spec.cell_pitch
        )));
    }

    let mut hms_positions = Vec::with_capacity(nz * nx);
    for iz in 0..nz {
        for ix in 0..nx {
            hms_positions.push(Vector3::new(
                centered(ix, nx, spec.cell_pitch),
                0.0,
                centered(iz, nz, spec.cell_pitch),
            ));
        }
    }

    let dpa_pitch = spec.wavelength / 2.0;
    let mut dpa_positions = Vec::with_capacity(spec.dpa_rows * spec.dpa_cols);
    for iz in 0..spec.dpa_rows {
        for ix in 0..spec.dpa_cols {
            dpa_positions.push(Vector3::new(
                centered(ix, spec.dpa_cols, dpa_pitch),
                -spec.d_sep,
                centered(iz, spec.dpa_rows, dpa_pitch),
            ));
        }
    }
    if dpa_positions.len() > hms_positions.len() {
        return Err(Error::InvalidGeometry(format!(
            "DPA has {} elements but the surface only {} cells",
            dpa_positions.len(),
            hms_positions.len()
        )));
    }

    Ok(ArrayLayout {
        hms_positions,
        dpa_positions,
        unit_cell_area: spec.cell_pitch * spec.cell_pitch,
        dpa_elem_eff_area: PATCH_EFF_AREA,
        wavelength: spec.wavelength,
        d_sep: spec.d_sep,
    })
}

impl ArrayLayout {
    /// Number of unit-cells `N`.
    pub fn n_cells(&self) -> usize {
        self.hms_positions.len()
    }

    /// Number of DPA elements `M`.
    pub fn n_elements(&self) -> usize {
        self.dpa_positions.len()
    }

    /// Distance and polar angle (from the z-directed dipole axis) between DPA
    /// element `m` and unit-cell `n`.
    pub fn pair_geometry(&self, m: usize, n: usize) -> Result<(f64, f64)> {
        let src = self.dpa_positions.get(m).ok_or(Error::IndexOutOfRange {
            index: m,
            len: self.dpa_positions.len(),
        })?;
        let dst = self.hms_positions.get(n).ok_or(Error::IndexOutOfRange {
            index: n,
            len: self.hms_positions.len(),
        })?;
        let d = dst - src;
        let r = d.norm();
        let theta = (d.z / r).clamp(-1.0, 1.0).acos();
        Ok((r, theta))
    }

    /// Euclidean distance between unit-cells `a` and `b`.
    pub fn cell_distance(&self, a: usize, b: usize) -> f64 {
        (self.hms_positions[a] - self.hms_positions[b]).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn manual(hms: Vec<Vector3<f64>>, dpa: Vec<Vector3<f64>>) -> ArrayLayout {
        ArrayLayout {
            hms_positions: hms,
            dpa_positions: dpa,
            unit_cell_area: 1.0,
            dpa_elem_eff_area: PATCH_EFF_AREA,
            wavelength: 1.0,
            d_sep: 1.0,
        }
    }

    #[test]
    fn four_wavelength_aperture_has_256_cells() {
        let lam = 0.1;
        let layout = build_planar_layout(&PlanarSpec::square_hma(4.0, 1, 1, lam)).unwrap();
        assert_eq!(layout.n_cells(), 256);
        assert_eq!(layout.n_elements(), 1);
        assert!((layout.unit_cell_area - lam * lam / 16.0).abs() < 1e-18);
    }

    #[test]
    fn single_cell_sits_at_origin() {
        let lam = 1.0;
        let spec = PlanarSpec {
            aperture_z: lam / 4.0,
            aperture_x: lam / 4.0,
            cell_pitch: lam / 4.0,
            dpa_rows: 1,
            dpa_cols: 1,
            d_sep: lam,
            wavelength: lam,
        };
        let layout = build_planar_layout(&spec).unwrap();
        assert_eq!(layout.n_cells(), 1);
        assert_eq!(layout.hms_positions[0], Vector3::zeros());
        assert_eq!(layout.dpa_positions[0], Vector3::new(0.0, -lam, 0.0));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut spec = PlanarSpec::square_hma(1.0, 1, 1, 0.1);
        spec.cell_pitch = 0.0;
        assert!(matches!(build_planar_layout(&spec), Err(Error::InvalidGeometry(_))));
        let mut spec = PlanarSpec::square_hma(1.0, 1, 1, 0.1);
        spec.aperture_x = -1.0;
        assert!(matches!(build_planar_layout(&spec), Err(Error::InvalidGeometry(_))));
        let mut spec = PlanarSpec::square_hma(1.0, 1, 1, 0.1);
        spec.d_sep = 0.0;
        assert!(matches!(build_planar_layout(&spec), Err(Error::InvalidGeometry(_))));
        let spec = PlanarSpec::square_hma(1.0, 0, 1, 0.1);
        assert!(matches!(build_planar_layout(&spec), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn broadside_and_axis_angles() {
        let layout = manual(
            vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, -1.0, 2.0), Vector3::new(0.0, -1.0, -3.0)],
            vec![Vector3::new(0.0, -1.0, 0.0)],
        );
        let (r, th) = layout.pair_geometry(0, 0).unwrap();
        assert_eq!(r, 1.0);
        assert!((th - FRAC_PI_2).abs() < 1e-15);
        let (r, th) = layout.pair_geometry(0, 1).unwrap();
        assert_eq!(r, 2.0);
        assert_eq!(th, 0.0);
        assert_eq!(th.sin(), 0.0);
        let (_, th) = layout.pair_geometry(0, 2).unwrap();
        assert!((th - PI).abs() < 1e-15);
    }

    #[test]
    fn pair_geometry_index_errors() {
        let layout = build_planar_layout(&PlanarSpec::square_hma(1.0, 1, 1, 0.1)).unwrap();
        assert!(matches!(
            layout.pair_geometry(1, 0),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
        assert!(matches!(
            layout.pair_geometry(0, 16),
            Err(Error::IndexOutOfRange { index: 16, len: 16 })
        ));
    }

    #[test]
    fn distances_never_below_separation() {
        let layout = build_planar_layout(&PlanarSpec::square_hma(2.0, 2, 2, 0.1)).unwrap();
        for m in 0..layout.n_elements() {
            for n in 0..layout.n_cells() {
                let (r, th) = layout.pair_geometry(m, n).unwrap();
                assert!(r >= layout.d_sep - 1e-15);
                assert!((0.0..=PI).contains(&th));
            }
        }
    }
}
