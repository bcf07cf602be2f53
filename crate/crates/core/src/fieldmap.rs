//! Magnetic field of a solved mode below the open cavity bottom.
//!
//! Offsets are measured downward from the cavity bottom plane `z = 0`, so a
//! plane at `z_offset` sits at grid height `z = −z_offset`.

use alloc::format;
use alloc::vec::Vec;

use crate::modesolver::ModeSolution;
use crate::vec3::Vec3;
use crate::{Error, Result};

/// Relative floor under which a field sample counts as zero.
pub const FIELD_FLOOR: f64 = 1e-9;

/// Field components along a radial line at fixed depth below the cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPlane {
    pub z_offset: f64,
    pub radii: Vec<f64>,
    pub h_r: Vec<f64>,
    pub h_z: Vec<f64>,
    /// `h_r / |h|`, or 0 where `|h|` is below [`FIELD_FLOOR`] × plane maximum.
    pub normalized_h_r: Vec<f64>,
    pub normalized_h_z: Vec<f64>,
}

impl FieldPlane {
    /// Radius of maximum `|h_r|` among the sampled radii.
    pub fn peak_hr_radius(&self) -> f64 {
        let k = argmax_abs(&self.h_r);
        self.radii[k]
    }
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    best
}

/// Grid row `j` and weight `t` (fraction toward row `j+1`) for a depth.
fn locate_z(mode: &ModeSolution, z_offset: f64) -> Result<(usize, f64)> {
    let g = &mode.grid;
    let ext = -g.z_min;
    let tol = 1e-12 * g.dz.max(ext);
    if !(z_offset >= -tol && z_offset <= ext + tol) {
        return Err(Error::OffsetOutsideDomain(format!(
            "z_offset {z_offset} m outside [0, {ext}] m below the cavity"
        )));
    }
    Ok(cell_of((-z_offset - g.z_min) / g.dz, g.nz))
}

/// Lower node and fractional weight of a continuous node coordinate `s`,
/// snapped to nodes within rounding so node samples are reproduced exactly.
fn cell_of(s: f64, n: usize) -> (usize, f64) {
    let s = s.clamp(0.0, (n - 1) as f64);
    let nearest = libm::round(s);
    if (s - nearest).abs() < 1e-9 {
        let k = nearest as usize;
        return if k <= n - 2 { (k, 0.0) } else { (n - 2, 1.0) };
    }
    let k = (libm::floor(s) as usize).min(n - 2);
    (k, s - k as f64)
}

fn locate_r(mode: &ModeSolution, r: f64) -> Result<(usize, f64)> {
    let g = &mode.grid;
    let rmax = g.r_max();
    if !(r >= 0.0 && r <= rmax * (1.0 + 1e-12)) {
        return Err(Error::OffsetOutsideDomain(format!("radius {r} m outside [0, {rmax}] m")));
    }
    Ok(cell_of(r / g.dr, g.nr))
}

fn bilinear(mode: &ModeSolution, field: &[f64], (i, tr): (usize, f64), (j, tz): (usize, f64)) -> f64 {
    let g = &mode.grid;
    let at = |ii: usize, jj: usize| field[g.index(ii, jj)];
    let mut v = (1.0 - tr) * (1.0 - tz) * at(i, j);
    if tr != 0.0 {
        v += tr * (1.0 - tz) * at(i + 1, j);
    }
    if tz != 0.0 {
        v += (1.0 - tr) * tz * at(i, j + 1);
        if tr != 0.0 {
            v += tr * tz * at(i + 1, j + 1);
        }
    }
    v
}

/// `(h_r, h_z)` at radius `r` and depth `z_offset` below the cavity.
pub fn field_rz(mode: &ModeSolution, r: f64, z_offset: f64) -> Result<(f64, f64)> {
    let jz = locate_z(mode, z_offset)?;
    let ir = locate_r(mode, r)?;
    let h_r = if ir == (0, 0.0) { 0.0 } else { bilinear(mode, &mode.h_r, ir, jz) };
    Ok((h_r, bilinear(mode, &mode.h_z, ir, jz)))
}

/// Sample `h_r`, `h_z` along `radii` on the plane `z_offset` below the cavity.
pub fn sample_plane(mode: &ModeSolution, z_offset: f64, radii: &[f64]) -> Result<FieldPlane> {
    let mut h_r = Vec::with_capacity(radii.len());
    let mut h_z = Vec::with_capacity(radii.len());
    for &r in radii {
        let (a, b) = field_rz(mode, r, z_offset)?;
        h_r.push(a);
        h_z.push(b);
    }
    let mags: Vec<f64> = h_r.iter().zip(&h_z).map(|(a, b)| libm::hypot(*a, *b)).collect();
    let max = mags.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = FIELD_FLOOR * max;
    let (mut nhr, mut nhz) = (Vec::with_capacity(radii.len()), Vec::with_capacity(radii.len()));
    for k in 0..radii.len() {
        if mags[k] > floor && mags[k] > 0.0 {
            nhr.push(h_r[k] / mags[k]);
            nhz.push(h_z[k] / mags[k]);
        } else {
            nhr.push(0.0);
            nhz.push(0.0);
        }
    }
    Ok(FieldPlane {
        z_offset,
        radii: radii.to_vec(),
        h_r,
        h_z,
        normalized_h_r: nhr,
        normalized_h_z: nhz,
    })
}

/// Radii of every grid column, `0 ..= shield_radius`.
pub fn node_radii(mode: &ModeSolution) -> Vec<f64> {
    (0..mode.grid.nr).map(|i| mode.grid.r_of(i)).collect()
}

/// Cartesian field vector at `(x, y)` and depth `z_offset` below the cavity.
pub fn field_at(mode: &ModeSolution, x: f64, y: f64, z_offset: f64) -> Result<Vec3> {
    let r = libm::hypot(x, y);
    let (h_r, h_z) = field_rz(mode, r, z_offset)?;
    if r == 0.0 {
        return Ok(Vec3::new(0.0, 0.0, h_z));
    }
    Ok(Vec3::new(h_r * x / r, h_r * y / r, h_z))
}

/// `ρ = h_z(0) / h_r(r*)` on a plane, with the peak radius `r*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRatio {
    pub rho: f64,
    pub peak_radius: f64,
}

/// Ratio of the on-axis axial field to the peak radial field on the plane
/// `z_offset` below the cavity. `r*` is searched over the grid columns.
pub fn field_ratio(mode: &ModeSolution, z_offset: f64) -> Result<FieldRatio> {
    let plane = sample_plane(mode, z_offset, &node_radii(mode))?;
    let k = argmax_abs(&plane.h_r);
    let max = plane
        .h_r
        .iter()
        .zip(&plane.h_z)
        .fold(0.0f64, |m, (a, b)| m.max(libm::hypot(*a, *b)));
    let peak = plane.h_r[k];
    if !(peak.abs() >= FIELD_FLOOR * max) || peak == 0.0 {
        return Err(Error::DegenerateRatio { value: peak.abs(), floor: FIELD_FLOOR * max });
    }
    Ok(FieldRatio { rho: plane.h_z[0] / peak, peak_radius: plane.radii[k] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_geometry;
    use crate::modesolver::{select_mode, solve_te0_modes};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn te013() -> &'static ModeSolution {
        static MODE: OnceLock<ModeSolution> = OnceLock::new();
        MODE.get_or_init(|| {
            let modes = solve_te0_modes(&default_geometry(), 0.5e-3, 4).unwrap();
            select_mode(&modes, (1, 3)).unwrap().clone()
        })
    }

    #[test]
    fn axis_has_only_axial_field() {
        let p = sample_plane(te013(), 1e-3, &[0.0]).unwrap();
        assert_eq!(p.h_r[0], 0.0);
        assert_eq!(p.normalized_h_z[0].abs(), 1.0);
    }

    #[test]
    fn radial_peak_sits_under_ring() {
        let m = te013();
        let p = sample_plane(m, 1e-3, &node_radii(m)).unwrap();
        let r = p.peak_hr_radius();
        assert!((r - 7e-3).abs() <= 2e-3, "{r}");
        let k = p.radii.iter().position(|&x| (x - 7e-3).abs() < 1e-9).unwrap();
        assert!(p.normalized_h_r[k].abs() > p.normalized_h_z[k].abs());
        for k in 0..p.radii.len() {
            let s = p.normalized_h_r[k].powi(2) + p.normalized_h_z[k].powi(2);
            assert!((s - 1.0).abs() < 1e-12 || s == 0.0);
        }
    }

    #[test]
    fn node_samples_reproduce_stored_values() {
        let m = te013();
        let g = &m.grid;
        let j = 6;
        let off = -g.z_of(j);
        let p = sample_plane(m, off, &node_radii(m)).unwrap();
        for i in 1..g.nr {
            assert_eq!(p.h_r[i], m.h_r[g.index(i, j)]);
            assert_eq!(p.h_z[i], m.h_z[g.index(i, j)]);
        }
    }

    #[test]
    fn offsets_outside_extension_rejected() {
        assert!(matches!(sample_plane(te013(), -1e-3, &[0.0]), Err(Error::OffsetOutsideDomain(_))));
        assert!(matches!(sample_plane(te013(), 11e-3, &[0.0]), Err(Error::OffsetOutsideDomain(_))));
        assert!(matches!(field_at(te013(), 20e-3, 0.0, 1e-3), Err(Error::OffsetOutsideDomain(_))));
    }

    #[test]
    fn field_decays_with_depth_under_ring() {
        let m = te013();
        let mut last = f64::INFINITY;
        for k in 0..=18 {
            let off = 0.5e-3 + k as f64 * 0.25e-3;
            let h = field_at(m, 7e-3, 0.0, off).unwrap().norm();
            assert!(h < last, "offset {off}");
            last = h;
        }
    }

    #[test]
    fn axial_field_is_flat_at_axis() {
        let m = te013();
        let g = &m.grid;
        let p = sample_plane(m, 1e-3, &[0.0, g.dr, 2.0 * g.dr]).unwrap();
        let slope0 = (p.h_z[1] - p.h_z[0]).abs() / g.dr;
        let slope1 = (p.h_z[2] - p.h_z[1]).abs() / g.dr;
        assert!(slope0 < slope1);
    }

    #[test]
    fn ratio_properties() {
        let m = te013();
        let a = field_ratio(m, 1e-3).unwrap();
        assert!(a.rho.is_finite() && a.rho != 0.0);
        let b = field_ratio(&m.sign_flipped(), 1e-3).unwrap();
        assert_eq!(a, b);
        let mut flat = m.clone();
        flat.h_z.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(field_ratio(&flat, 1e-3).unwrap().rho, 0.0);
        flat.h_r.iter_mut().for_each(|v| *v = 0.0);
        flat.h_z.iter_mut().for_each(|v| *v = 1.0);
        assert!(matches!(field_ratio(&flat, 1e-3), Err(Error::DegenerateRatio { .. })));
    }

    #[test]
    fn field_at_axis_and_under_ring() {
        let m = te013();
        let on = field_at(m, 0.0, 0.0, 1e-3).unwrap();
        assert_eq!((on.x, on.y), (0.0, 0.0));
        let v = field_at(m, 7e-3, 0.0, 1e-3).unwrap();
        assert!(v.x.abs() > v.z.abs() && v.y == 0.0);
    }

    proptest! {
        #[test]
        fn field_rotates_with_position(r in 0.0..15e-3f64, phi in 0.0..core::f64::consts::TAU, alpha in 0.0..core::f64::consts::TAU, off in 0.2e-3..8e-3f64) {
            let m = te013();
            let (x, y) = (r * phi.cos(), r * phi.sin());
            let (c, s) = (alpha.cos(), alpha.sin());
            let a = field_at(m, x, y, off).unwrap();
            let b = field_at(m, c * x - s * y, s * x + c * y, off).unwrap();
            let scale = a.norm().max(1e-30);
            prop_assert!((c * a.x - s * a.y - b.x).abs() <= 1e-9 * scale);
            prop_assert!((s * a.x + c * a.y - b.y).abs() <= 1e-9 * scale);
            prop_assert!((a.z - b.z).abs() <= 1e-9 * scale);
        }
    }
}
