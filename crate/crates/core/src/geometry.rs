//! Axisymmetric cavity geometry and its rasterization onto a uniform (r, z)
//! grid.
//!
//! Coordinates: `r` is the distance from the symmetry axis, `z` the height
//! above the cavity's bottom plane. The open bottom is modeled as an air
//! region of depth [`CavityGeometry::bottom_extension`] terminated by a
//! perfect electric wall, so the grid spans
//! `z ∈ [−bottom_extension, shield_height]`.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Minimum number of grid cells the dielectric must span in r and in z.
pub const MIN_DIELECTRIC_CELLS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub relative_permittivity: f64,
    pub loss_tangent: f64,
}

impl Material {
    pub const VACUUM: Material = Material {
        relative_permittivity: 1.0,
        loss_tangent: 0.0,
    };

    pub fn new(relative_permittivity: f64, loss_tangent: f64) -> Result<Self> {
        let m = Material {
            relative_permittivity,
            loss_tangent,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_permittivity >= 1.0) || !self.relative_permittivity.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "relative permittivity {} must be finite and >= 1",
                self.relative_permittivity
            )));
        }
        if !(self.loss_tangent >= 0.0) || !self.loss_tangent.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "loss tangent {} must be finite and >= 0",
                self.loss_tangent
            )));
        }
        Ok(())
    }
}

/// How the plane `z = 0` is terminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bottom {
    /// Open bottom: an air extension of the given depth (m) below `z = 0`,
    /// terminated by a metal wall.
    Open { extension: f64 },
    /// Metal plate at `z = 0` (closed cylinder; used for the analytic oracle).
    Closed,
}

/// Axisymmetric dielectric-loaded cavity. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    pub shield_radius: f64,
    pub shield_height: f64,
    pub ring_inner_radius: f64,
    pub ring_outer_radius: f64,
    pub ring_bottom: f64,
    pub ring_top: f64,
    pub plunger_radius: f64,
    /// Insertion of the plunger from the top plate; 0 = fully retracted.
    pub plunger_depth: f64,
    pub bottom: Bottom,
    pub dielectric: Material,
    pub ambient: Material,
}

/// Calibration-start geometry.
///
/// Only the shield dimensions (16 mm inner radius, 20 mm height) are fixed;
/// the ring, permittivity and plunger values are starting points for
/// [`crate::modesolver::calibrate_geometry`].
pub fn default_geometry() -> CavityGeometry {
    CavityGeometry {
        shield_radius: 16e-3,
        shield_height: 20e-3,
        ring_inner_radius: 5e-3,
        ring_outer_radius: 9e-3,
        ring_bottom: 1e-3,
        ring_top: 13e-3,
        plunger_radius: 12e-3,
        plunger_depth: 0.0,
        bottom: Bottom::Open { extension: 10e-3 },
        dielectric: Material {
            relative_permittivity: 100.0,
            loss_tangent: 1e-4,
        },
        ambient: Material::VACUUM,
    }
}

/// Empty closed metal cylinder (ring permittivity 1), the analytic-oracle case.
pub fn hollow_cylinder(radius: f64, height: f64) -> CavityGeometry {
    CavityGeometry {
        shield_radius: radius,
        shield_height: height,
        ring_inner_radius: 0.3 * radius,
        ring_outer_radius: 0.6 * radius,
        ring_bottom: 0.1 * height,
        ring_top: 0.6 * height,
        plunger_radius: 0.5 * radius,
        plunger_depth: 0.0,
        bottom: Bottom::Closed,
        dielectric: Material::VACUUM,
        ambient: Material::VACUUM,
    }
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidGeometry(msg.into()));
        let lengths = [
            self.shield_radius,
            self.shield_height,
            self.ring_inner_radius,
            self.ring_outer_radius,
            self.ring_bottom,
            self.ring_top,
            self.plunger_radius,
            self.plunger_depth,
        ];
        if lengths.iter().any(|v| !v.is_finite()) {
            return bad("all lengths must be finite");
        }
        if !(0.0 < self.ring_inner_radius
            && self.ring_inner_radius < self.ring_outer_radius
            && self.ring_outer_radius < self.shield_radius)
        {
            return bad("require 0 < ring_inner_radius < ring_outer_radius < shield_radius");
        }
        if !(0.0 <= self.ring_bottom
            && self.ring_bottom < self.ring_top
            && self.ring_top <= self.shield_height)
        {
            return bad("require 0 <= ring_bottom < ring_top <= shield_height");
        }
        if !(0.0 <= self.plunger_depth && self.plunger_depth <= self.max_plunger_depth() * (1.0 + 1e-12)) {
            return bad("require 0 <= plunger_depth <= shield_height - ring_top");
        }
        if !(0.0 < self.plunger_radius && self.plunger_radius < self.shield_radius) {
            return bad("require 0 < plunger_radius < shield_radius");
        }
        if let Bottom::Open { extension } = self.bottom {
            if !(extension > 0.0) || !extension.is_finite() {
                return bad("bottom_extension must be > 0");
            }
        }
        self.dielectric.validate()?;
        self.ambient.validate()
    }

    /// Deepest insertion that keeps the plunger clear of the dielectric.
    pub fn max_plunger_depth(&self) -> f64 {
        self.shield_height - self.ring_top
    }

    pub fn with_plunger_depth(&self, depth: f64) -> CavityGeometry {
        CavityGeometry {
            plunger_depth: depth,
            ..*self
        }
    }

    pub fn bottom_extension(&self) -> f64 {
        match self.bottom {
            Bottom::Open { extension } => extension,
            Bottom::Closed => 0.0,
        }
    }

    /// Height of the plunger's lower face, if inserted.
    pub fn plunger_face(&self) -> Option<f64> {
        (self.plunger_depth > 0.0).then_some(self.shield_height - self.plunger_depth)
    }

    /// Analytic dielectric cross-section area in the (r, z) half-plane.
    pub fn ring_cross_section(&self) -> f64 {
        (self.ring_outer_radius - self.ring_inner_radius) * (self.ring_top - self.ring_bottom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Metal,
    Dielectric,
    Ambient,
}

/// Uniform node grid over `r ∈ [0, R]`, `z ∈ [z_min, shield_height]`.
///
/// Node `(i, j)` sits at `(i·dr, z_min + j·dz)`; node storage is z-major
/// (`index = j·nr + i`). Every node carries a region tag (by membership of
/// the node point, i.e. the centre of its dual cell) and an effective
/// permittivity averaged over its dual cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nr: usize,
    pub nz: usize,
    pub dr: f64,
    pub dz: f64,
    pub z_min: f64,
    regions: Vec<Region>,
    permittivity: Vec<f64>,
    plunger_face: Option<f64>,
    plunger_radius: f64,
}

impl Grid2D {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn r_of(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn z_of(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.dz
    }

    pub fn r_max(&self) -> f64 {
        self.r_of(self.nr - 1)
    }

    pub fn z_max(&self) -> f64 {
        self.z_of(self.nz - 1)
    }

    pub fn region_of(&self, i: usize, j: usize) -> Region {
        self.regions[self.index(i, j)]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Dual-cell averaged relative permittivity at node `(i, j)`.
    pub fn permittivity_at(&self, i: usize, j: usize) -> f64 {
        self.permittivity[self.index(i, j)]
    }

    /// Nodes where `E_Θ` is pinned to zero: metal and the symmetry axis.
    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        i == 0 || self.region_of(i, j) == Region::Metal
    }

    /// Distance from free node `(i, j)` up to the plunger face when the node
    /// directly above is plunger metal and the face lies within one cell.
    pub fn plunger_gap_above(&self, i: usize, j: usize) -> Option<f64> {
        let face = self.plunger_face?;
        if j + 1 >= self.nz || self.r_of(i) > self.plunger_radius + self.dr * 1e-9 {
            return None;
        }
        if self.region_of(i, j) == Region::Metal || self.region_of(i, j + 1) != Region::Metal {
            return None;
        }
        let gap = face - self.z_of(j);
        (gap > 0.0 && gap < self.dz).then_some(gap)
    }

    /// Summed area of dielectric-tagged cells (r-z half-plane).
    pub fn dielectric_area(&self) -> f64 {
        self.regions.iter().filter(|r| **r == Region::Dielectric).count() as f64 * self.dr * self.dz
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Rasterize `geometry` with a target cell size of `resolution` meters.
pub fn rasterize(geometry: &CavityGeometry, resolution: f64) -> Result<Grid2D> {
    geometry.validate()?;
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::InvalidInput(format!("resolution {resolution} must be > 0")));
    }
    let g = geometry;
    let z_min = -g.bottom_extension();
    let r_span = g.shield_radius;
    let z_span = g.shield_height - z_min;
    let nr = (libm::round(r_span / resolution) as usize).max(1) + 1;
    let nz = (libm::round(z_span / resolution) as usize).max(1) + 1;
    let dr = r_span / (nr - 1) as f64;
    let dz = z_span / (nz - 1) as f64;

    let cells_r = (g.ring_outer_radius - g.ring_inner_radius) / dr;
    let cells_z = (g.ring_top - g.ring_bottom) / dz;
    if cells_r < MIN_DIELECTRIC_CELLS || cells_z < MIN_DIELECTRIC_CELLS {
        return Err(Error::ResolutionTooCoarse { cells_r, cells_z });
    }

    // Tolerance for node-on-boundary comparisons.
    let tol = 1e-9 * dr.min(dz);
    let eps_d = g.dielectric.relative_permittivity;
    let eps_a = g.ambient.relative_permittivity;
    let plunger_face = g.plunger_face();

    let mut regions = Vec::with_capacity(nr * nz);
    let mut permittivity = Vec::with_capacity(nr * nz);
    for j in 0..nz {
        let z = z_min + j as f64 * dz;
        let fz = overlap(z - dz / 2.0, z + dz / 2.0, g.ring_bottom, g.ring_top) / dz;
        for i in 0..nr {
            let r = i as f64 * dr;
            let in_plunger = plunger_face
                .map(|face| z >= face - tol && r <= g.plunger_radius + tol)
                .unwrap_or(false);
            let wall = i == nr - 1 || j == nz - 1 || j == 0;
            let in_ring = r >= g.ring_inner_radius - tol
                && r < g.ring_outer_radius - tol
                && z >= g.ring_bottom - tol
                && z < g.ring_top - tol;
            let region = if wall || in_plunger {
                Region::Metal
            } else if in_ring {
                Region::Dielectric
            } else {
                Region::Ambient
            };
            let fr = overlap(r - dr / 2.0, r + dr / 2.0, g.ring_inner_radius, g.ring_outer_radius) / dr;
            regions.push(region);
            permittivity.push(eps_a + (eps_d - eps_a) * fr * fz);
        }
    }

    Ok(Grid2D {
        nr,
        nz,
        dr,
        dz,
        z_min,
        regions,
        permittivity,
        plunger_face,
        plunger_radius: g.plunger_radius,
    })
}
