//! Pure TE₀ eigenmodes of the axisymmetric dielectric-loaded cavity.
//!
//! For `E = E_Θ(r, z) θ̂` Maxwell's equations reduce to
//!
//! ```text
//! ∂/∂r[(1/r) ∂(r E_Θ)/∂r] + ∂²E_Θ/∂z² + ε_r(r, z) (ω/c)² E_Θ = 0
//! ```
//!
//! Multiplying by `r` gives the self-adjoint form
//! `(r E')' − E/r + r E_zz + ε_r r k² E = 0`, which is discretized with
//! second-order centred differences on the node grid. The stiffness matrix
//! `K` (the r-weighted operator) is symmetric and positive definite on the
//! free nodes, and the mass matrix is `diag(ε_r · r)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{rasterize, CavityGeometry, Grid2D};
use crate::linalg::{generalized_dense, generalized_lowest_above, CsrMatrix, EigenPairs, LanczosOptions};
use crate::optim::bracketed_minimize;
use crate::{frequency_of, wavenumber_sq, Error, Result, SPEED_OF_LIGHT};

/// Mode indices `(n_radial, p_axial)` of a TE₀,ₙ,ₚ mode.
pub type ModeIndex = (usize, usize);

/// Unknown count up to which a failed Lanczos run falls back to a dense
/// eigen-decomposition.
pub const DENSE_FALLBACK_LIMIT: usize = 1500;

/// One TE₀,ₙ,ₚ eigenmode on its grid.
///
/// Fields are stored z-major like the grid. `h_r = ∂e/∂z` and
/// `h_z = (1/r) ∂(r e)/∂r`; the common factor `1/(ωμ₀)` is dropped.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub frequency: f64,
    pub e_theta: Vec<f64>,
    pub h_r: Vec<f64>,
    pub h_z: Vec<f64>,
    pub n_radial: usize,
    pub p_axial: usize,
    pub grid: Arc<Grid2D>,
}

impl ModeSolution {
    pub fn index(&self) -> ModeIndex {
        (self.n_radial, self.p_axial)
    }

    /// Same mode with all fields negated.
    pub fn sign_flipped(&self) -> ModeSolution {
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect();
        ModeSolution {
            e_theta: neg(&self.e_theta),
            h_r: neg(&self.h_r),
            h_z: neg(&self.h_z),
            ..self.clone()
        }
    }
}

/// Discrete eigenproblem `A x = λ B x` over all grid nodes, `λ = (ω/c)²`.
///
/// Rows of Dirichlet nodes (metal, axis) contain only a unit diagonal; the
/// solver drops them. `A = diag(r)⁻¹ K` where `stiffness = K` is symmetric,
/// so `A` is symmetric in the r-weighted inner product.
#[derive(Debug, Clone)]
pub struct Eigenproblem {
    pub operator: CsrMatrix,
    /// `B = diag(ε_r)`.
    pub weight: Vec<f64>,
    /// Symmetric r-weighted operator `K = diag(r) A` (free rows only are
    /// meaningful; Dirichlet rows are zero apart from a unit diagonal).
    pub stiffness: CsrMatrix,
    /// Node radii, the weights of the inner product.
    pub radii: Vec<f64>,
}

/// Off-diagonal stiffness entries keyed by neighbour node `(i, j)`.
type Couplings = Vec<((usize, usize), f64)>;

/// Stiffness couplings for node `(i, j)`: `(neighbour node, K entry)` plus
/// the diagonal. Neighbours that are Dirichlet nodes are omitted.
fn stiffness_row(grid: &Grid2D, i: usize, j: usize) -> (f64, Couplings) {
    let (dr, dz) = (grid.dr, grid.dz);
    let r = grid.r_of(i);
    let rp = r + dr / 2.0;
    let rm = r - dr / 2.0;
    let mut diag = (rp + rm) / (dr * dr) + 1.0 / r + 2.0 * r / (dz * dz);
    if let Some(gap) = grid.plunger_gap_above(i, j) {
        // Finite-volume flux to a wall `gap` above the node instead of one
        // full cell: replaces r/dz² by r/(dz·gap) on the diagonal.
        diag += r / (dz * gap) - r / (dz * dz);
    }
    let mut off = Vec::with_capacity(4);
    let neighbours = [
        (i + 1, j, -rp / (dr * dr)),
        (i - 1, j, -rm / (dr * dr)),
        (i, j + 1, -r / (dz * dz)),
        (i, j - 1, -r / (dz * dz)),
    ];
    for (ni, nj, c) in neighbours {
        if !grid.is_dirichlet(ni, nj) {
            off.push(((ni, nj), c));
        }
    }
    (diag, off)
}

/// Assemble the finite-difference eigenproblem on `grid`.
pub fn assemble_eigenproblem(grid: &Grid2D) -> Eigenproblem {
    let n = grid.len();
    let mut a_rows = Vec::with_capacity(n);
    let mut k_rows = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    for j in 0..grid.nz {
        for i in 0..grid.nr {
            let idx = grid.index(i, j);
            weight.push(grid.permittivity_at(i, j));
            radii.push(grid.r_of(i));
            if grid.is_dirichlet(i, j) {
                a_rows.push(vec![(idx, 1.0)]);
                k_rows.push(vec![(idx, 1.0)]);
                continue;
            }
            let r = grid.r_of(i);
            let (diag, off) = stiffness_row(grid, i, j);
            let mut krow = vec![(idx, diag)];
            let mut arow = vec![(idx, diag / r)];
            for ((ni, nj), c) in off {
                let nidx = grid.index(ni, nj);
                krow.push((nidx, c));
                arow.push((nidx, c / r));
            }
            k_rows.push(krow);
            a_rows.push(arow);
        }
    }
    Eigenproblem {
        operator: CsrMatrix::from_rows(a_rows),
        weight,
        stiffness: CsrMatrix::from_rows(k_rows),
        radii,
    }
}

/// Free-node system `K x = λ M x` with the node map back to the grid.
struct ReducedSystem {
    stiffness: CsrMatrix,
    mass: Vec<f64>,
    nodes: Vec<usize>,
}

fn reduced_system(grid: &Grid2D) -> ReducedSystem {
    let mut slot = vec![usize::MAX; grid.len()];
    let mut nodes = Vec::new();
    for j in 0..grid.nz {
        for i in 0..grid.nr {
            if !grid.is_dirichlet(i, j) {
                slot[grid.index(i, j)] = nodes.len();
                nodes.push(grid.index(i, j));
            }
        }
    }
    let mut rows = Vec::with_capacity(nodes.len());
    let mut mass = Vec::with_capacity(nodes.len());
    for &node in &nodes {
        let (i, j) = (node % grid.nr, node / grid.nr);
        let (diag, off) = stiffness_row(grid, i, j);
        let mut row = vec![(slot[node], diag)];
        for ((ni, nj), c) in off {
            row.push((slot[grid.index(ni, nj)], c));
        }
        rows.push(row);
        mass.push(grid.permittivity_at(i, j) * grid.r_of(i));
    }
    ReducedSystem {
        stiffness: CsrMatrix::from_rows(rows),
        mass,
        nodes,
    }
}

/// `n`-th positive zero of the Bessel function J₁ (`n ≥ 1`).
pub fn bessel_j1_zero(n: usize) -> f64 {
    // McMahon's asymptotic start, then Newton with J₁' = J₀ − J₁/x.
    let beta = (n as f64 + 0.25) * PI;
    let mut x = beta - 3.0 / (8.0 * beta) + 36.0 / (384.0 * beta * beta * beta);
    for _ in 0..50 {
        let j1 = libm::j1(x);
        let d = libm::j0(x) - j1 / x;
        let step = j1 / d;
        x -= step;
        if step.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// Closed-form TE₀,ₙ,ₚ frequency (Hz) of an empty closed metal cylinder.
pub fn analytic_te0np(radius: f64, height: f64, n: usize, p: usize) -> f64 {
    let kr = bessel_j1_zero(n) / radius;
    let kz = p as f64 * PI / height;
    SPEED_OF_LIGHT / (2.0 * PI) * libm::sqrt(kr * kr + kz * kz)
}

/// Eigen-solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Lower edge of the frequency window (Hz); the shift-invert pole.
    /// Modes are returned in ascending frequency from here.
    pub window_low: f64,
    pub lanczos: LanczosOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            window_low: 1e9,
            lanczos: LanczosOptions::default(),
        }
    }
}

/// The `count` lowest TE₀ modes above the window's lower edge, sorted by
/// frequency and classified.
pub fn solve_te0_modes(geometry: &CavityGeometry, resolution: f64, count: usize) -> Result<Vec<ModeSolution>> {
    solve_te0_modes_with(geometry, resolution, count, &SolverOptions::default())
}

pub fn solve_te0_modes_with(
    geometry: &CavityGeometry,
    resolution: f64,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<ModeSolution>> {
    if count == 0 {
        return Err(Error::InvalidInput("mode count must be >= 1".into()));
    }
    let grid = Arc::new(rasterize(geometry, resolution)?);
    solve_on_grid(grid, count, opts)
}

/// Solve on an already rasterized grid.
pub fn solve_on_grid(grid: Arc<Grid2D>, count: usize, opts: &SolverOptions) -> Result<Vec<ModeSolution>> {
    let sys = reduced_system(&grid);
    if count > sys.nodes.len() {
        return Err(Error::InvalidInput("mode count exceeds unknowns".into()));
    }
    let shift = wavenumber_sq(opts.window_low.max(0.0));
    let pairs = match generalized_lowest_above(&sys.stiffness, &sys.mass, shift, count, &opts.lanczos) {
        Ok(p) => p,
        Err(err @ Error::SolverNoConvergence { .. }) => {
            if sys.nodes.len() > DENSE_FALLBACK_LIMIT {
                return Err(err);
            }
            dense_above(&sys, shift, count)?
        }
        Err(e) => return Err(e),
    };
    let mut modes = Vec::with_capacity(count);
    for (lambda, x) in pairs.values.iter().zip(&pairs.vectors) {
        let mut e = vec![0.0; grid.len()];
        for (slot, &node) in sys.nodes.iter().enumerate() {
            e[node] = x[slot];
        }
        modes.push(build_mode(grid.clone(), frequency_of(*lambda), e)?);
    }
    modes.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap());
    Ok(modes)
}

fn dense_above(sys: &ReducedSystem, shift: f64, count: usize) -> Result<EigenPairs> {
    let all = generalized_dense(&sys.stiffness, &sys.mass)?;
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for (v, x) in all.values.into_iter().zip(all.vectors) {
        if v > shift && values.len() < count {
            values.push(v);
            vectors.push(x);
        }
    }
    if values.len() < count {
        return Err(Error::SolverNoConvergence {
            iterations: sys.nodes.len(),
            converged: values.len(),
            requested: count,
        });
    }
    Ok(EigenPairs { values, vectors, iterations: sys.nodes.len() })
}

/// Normalize, fix the sign, derive `h_r`/`h_z` and classify.
fn build_mode(grid: Arc<Grid2D>, frequency: f64, mut e: Vec<f64>) -> Result<ModeSolution> {
    let norm_sq: f64 = (0..grid.nz)
        .flat_map(|j| (0..grid.nr).map(move |i| (i, j)))
        .map(|(i, j)| {
            let v = e[grid.index(i, j)];
            v * v * grid.r_of(i) * grid.dr * grid.dz
        })
        .sum();
    let scale = 1.0 / libm::sqrt(norm_sq);
    let peak = e
        .iter()
        .copied()
        .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    let scale = if peak < 0.0 { -scale } else { scale };
    for v in e.iter_mut() {
        *v *= scale;
    }
    let (h_r, h_z) = magnetic_fields(&grid, &e);
    let mut mode = ModeSolution {
        frequency,
        e_theta: e,
        h_r,
        h_z,
        n_radial: 0,
        p_axial: 0,
        grid,
    };
    let (n, p) = classify_mode(&mode)?;
    mode.n_radial = n;
    mode.p_axial = p;
    Ok(mode)
}

/// `h_r = ∂e/∂z`, `h_z = (1/r) ∂(r e)/∂r` by centred differences
/// (one-sided second order at the outer rows), with the axis limit
/// `h_z(0, z) = 2 ∂e/∂r`.
pub fn magnetic_fields(grid: &Grid2D, e: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nr, nz, dr, dz) = (grid.nr, grid.nz, grid.dr, grid.dz);
    let at = |i: usize, j: usize| e[j * nr + i];
    let mut h_r = vec![0.0; nr * nz];
    let mut h_z = vec![0.0; nr * nz];
    for j in 0..nz {
        for i in 0..nr {
            let dz_e = if j == 0 {
                (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * dz)
            } else if j == nz - 1 {
                (3.0 * at(i, j) - 4.0 * at(i, j - 1) + at(i, j - 2)) / (2.0 * dz)
            } else {
                (at(i, j + 1) - at(i, j - 1)) / (2.0 * dz)
            };
            h_r[j * nr + i] = dz_e;
            let r = grid.r_of(i);
            let g = |k: usize| grid.r_of(k) * at(k, j);
            h_z[j * nr + i] = if i == 0 {
                // e ≈ a·r + b·r³ near the axis: 2a from the first two rings.
                let (e1, e2) = (at(1, j), at(2, j));
                2.0 * (8.0 * e1 - e2) / (6.0 * dr)
            } else if i == nr - 1 {
                (3.0 * g(i) - 4.0 * g(i - 1) + g(i - 2)) / (2.0 * dr * r)
            } else {
                (g(i + 1) - g(i - 1)) / (2.0 * dr * r)
            };
        }
    }
    (h_r, h_z)
}

/// Relative threshold below which samples are ignored when counting sign
/// changes.
const SIGN_FLOOR: f64 = 1e-6;
/// Minimum scan-line peak, relative to the global maximum.
const LINE_FLOOR: f64 = 1e-3;

fn count_lobes(line: impl Iterator<Item = f64>, global_max: f64) -> Result<usize> {
    let samples: Vec<f64> = line.collect();
    let line_peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(line_peak >= LINE_FLOOR * global_max) || global_max == 0.0 {
        return Err(Error::ClassificationAmbiguous { line_peak, global_max });
    }
    let floor = SIGN_FLOOR * global_max;
    let mut changes = 0;
    let mut last_sign = 0.0;
    for v in samples {
        if v.abs() <= floor {
            continue;
        }
        let s = if v > 0.0 { 1.0 } else { -1.0 };
        if last_sign != 0.0 && s != last_sign {
            changes += 1;
        }
        last_sign = s;
    }
    Ok(changes + 1)
}

/// `(n, p)` from sign changes of `e_theta` along the radial line through the
/// peak height and the axial line through the peak radius.
pub fn classify_mode(mode: &ModeSolution) -> Result<ModeIndex> {
    let grid = &mode.grid;
    let (mut best, mut peak_idx) = (0.0f64, 0usize);
    for (k, v) in mode.e_theta.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            peak_idx = k;
        }
    }
    let (i0, j0) = (peak_idx % grid.nr, peak_idx / grid.nr);
    let e = &mode.e_theta;
    let n = count_lobes((0..grid.nr).map(|i| e[grid.index(i, j0)]), best)?;
    let p = count_lobes((0..grid.nz).map(|j| e[grid.index(i0, j)]), best)?;
    Ok((n, p))
}

/// Normalized overlap `|⟨a, b⟩| / (‖a‖ ‖b‖)` in the `ε_r·r` weighted inner
/// product. Modes on grids of different shape have overlap 0.
pub fn mode_overlap(a: &ModeSolution, b: &ModeSolution) -> f64 {
    let g = &a.grid;
    if (g.nr, g.nz) != (b.grid.nr, b.grid.nz) {
        return 0.0;
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for j in 0..g.nz {
        for i in 0..g.nr {
            let k = g.index(i, j);
            let w = g.permittivity_at(i, j) * g.r_of(i);
            ab += w * a.e_theta[k] * b.e_theta[k];
            aa += w * a.e_theta[k] * a.e_theta[k];
            bb += w * b.e_theta[k] * b.e_theta[k];
        }
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    ab.abs() / libm::sqrt(aa * bb)
}

/// Overlap below which a tracked mode is considered lost.
pub const TRACKING_MIN_OVERLAP: f64 = 0.5;

/// Lowest-frequency mode classified as `selector`.
pub fn select_mode(modes: &[ModeSolution], selector: ModeIndex) -> Result<&ModeSolution> {
    modes
        .iter()
        .filter(|m| m.index() == selector)
        .min_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap())
        .ok_or(Error::ModeNotFound { n: selector.0, p: selector.1 })
}

/// Follow `selector` through per-depth mode sets by maximum overlap with the
/// previous depth's mode. `sets[k]` holds the modes solved at `depths[k]`.
pub fn track_mode(depths: &[f64], sets: &[Vec<ModeSolution>], selector: ModeIndex) -> Result<Vec<ModeSolution>> {
    let mut tracked: Vec<ModeSolution> = Vec::with_capacity(sets.len());
    for (k, modes) in sets.iter().enumerate() {
        let next = match tracked.last() {
            None => select_mode(modes, selector)?.clone(),
            Some(prev) => best_overlap(prev, modes, depths[k])?.clone(),
        };
        tracked.push(next);
    }
    Ok(tracked)
}

fn best_overlap<'a>(prev: &ModeSolution, modes: &'a [ModeSolution], depth: f64) -> Result<&'a ModeSolution> {
    let (best, overlap) = modes
        .iter()
        .map(|m| (m, mode_overlap(prev, m)))
        .fold((None, -1.0), |acc, (m, o)| if o > acc.1 { (Some(m), o) } else { acc });
    match best {
        Some(m) if overlap >= TRACKING_MIN_OVERLAP => Ok(m),
        _ => Err(Error::ModeTrackingLost { depth, overlap: overlap.max(0.0) }),
    }
}

/// Settings shared by the plunger and calibration routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub resolution: f64,
    /// Modes solved per geometry; must comfortably include the tracked one.
    pub mode_count: usize,
    pub solver: SolverOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            resolution: 0.25e-3,
            mode_count: 6,
            solver: SolverOptions::default(),
        }
    }
}

fn check_depths(geometry: &CavityGeometry, depths: &[f64]) -> Result<()> {
    if depths.is_empty() {
        return Err(Error::InvalidInput("no plunger depths given".into()));
    }
    if depths.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("plunger depths must be sorted ascending".into()));
    }
    let max = geometry.max_plunger_depth();
    if depths.iter().any(|&d| !(d >= 0.0 && d <= max * (1.0 + 1e-12))) {
        return Err(Error::InvalidInput("plunger depth outside [0, shield_height - ring_top]".into()));
    }
    Ok(())
}

/// Frequency of `selector` versus plunger depth, tracked by field overlap.
pub fn tuning_curve(
    geometry: &CavityGeometry,
    depths: &[f64],
    selector: ModeIndex,
    opts: &SweepOptions,
) -> Result<Vec<(f64, f64)>> {
    check_depths(geometry, depths)?;
    let sets = depths
        .iter()
        .map(|&d| solve_te0_modes_with(&geometry.with_plunger_depth(d), opts.resolution, opts.mode_count, &opts.solver))
        .collect::<Result<Vec<_>>>()?;
    tuning_from_sets(depths, &sets, selector)
}

/// Tuning curve from mode sets solved elsewhere (e.g. in parallel).
pub fn tuning_from_sets(depths: &[f64], sets: &[Vec<ModeSolution>], selector: ModeIndex) -> Result<Vec<(f64, f64)>> {
    let tracked = track_mode(depths, sets, selector)?;
    Ok(depths.iter().copied().zip(tracked.iter().map(|m| m.frequency)).collect())
}

/// Frequency tolerance of [`find_plunger_for_frequency`] (Hz).
pub const PLUNGER_FREQUENCY_TOLERANCE: f64 = 1e6;

/// Coarse samples used to bracket the target before bisection.
const PLUNGER_BRACKET_SAMPLES: usize = 9;

/// Plunger depth at which the tracked `selector` mode resonates at `target`.
pub fn find_plunger_for_frequency(
    geometry: &CavityGeometry,
    target: f64,
    selector: ModeIndex,
    opts: &SweepOptions,
) -> Result<f64> {
    let max = geometry.max_plunger_depth();
    let solve = |d: f64| solve_te0_modes_with(&geometry.with_plunger_depth(d), opts.resolution, opts.mode_count, &opts.solver);
    let depths: Vec<f64> = (0..PLUNGER_BRACKET_SAMPLES)
        .map(|k| max * k as f64 / (PLUNGER_BRACKET_SAMPLES - 1) as f64)
        .collect();
    let sets = depths.iter().map(|&d| solve(d)).collect::<Result<Vec<_>>>()?;
    let tracked = track_mode(&depths, &sets, selector)?;
    let freqs: Vec<f64> = tracked.iter().map(|m| m.frequency).collect();
    let (low, high) = (freqs[0], freqs[freqs.len() - 1]);
    if !(target >= low - PLUNGER_FREQUENCY_TOLERANCE && target <= high + PLUNGER_FREQUENCY_TOLERANCE) {
        return Err(Error::TargetOutOfRange { target, low, high });
    }
    for (k, f) in freqs.iter().enumerate() {
        if (f - target).abs() <= PLUNGER_FREQUENCY_TOLERANCE {
            return Ok(depths[k]);
        }
    }
    let k = (0..freqs.len() - 1)
        .find(|&k| (freqs[k] - target) * (freqs[k + 1] - target) <= 0.0)
        .ok_or(Error::TargetOutOfRange { target, low, high })?;
    let (mut lo, mut hi) = (depths[k], depths[k + 1]);
    let mut reference = tracked[k].clone();
    let rising = freqs[k + 1] > freqs[k];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let modes = solve(mid)?;
        let mode = best_overlap(&reference, &modes, mid)?;
        let f = mode.frequency;
        if (f - target).abs() <= PLUNGER_FREQUENCY_TOLERANCE {
            return Ok(mid);
        }
        if (f < target) == rising {
            lo = mid;
            reference = mode.clone();
        } else {
            hi = mid;
        }
    }
    Err(Error::TargetOutOfRange { target, low, high })
}

/// Loaded quality factor from the resonance linewidth: `Q = f₀ / FWHM`.
pub fn q_from_linewidth(f0: f64, fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) {
        return Err(Error::InvalidInput("linewidth must be > 0".into()));
    }
    Ok(f0 / fwhm)
}

/// Circulating intra-cavity power of a single-port resonator:
/// `P_in · Q · 4β/(1+β)²`.
pub fn circulating_power(p_in: f64, q_loaded: f64, beta: f64) -> Result<f64> {
    if !(p_in >= 0.0) || !(q_loaded > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidInput("require p_in >= 0, Q > 0, beta > 0".into()));
    }
    Ok(p_in * q_loaded * 4.0 * beta / ((1.0 + beta) * (1.0 + beta)))
}

/// Geometry parameters the calibration may adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationParam {
    RelativePermittivity,
    RingOuterRadius,
    RingTop,
}

impl CalibrationParam {
    fn get(self, g: &CavityGeometry) -> f64 {
        match self {
            CalibrationParam::RelativePermittivity => g.dielectric.relative_permittivity,
            CalibrationParam::RingOuterRadius => g.ring_outer_radius,
            CalibrationParam::RingTop => g.ring_top,
        }
    }

    fn set(self, g: &mut CavityGeometry, v: f64) {
        match self {
            CalibrationParam::RelativePermittivity => g.dielectric.relative_permittivity = v,
            CalibrationParam::RingOuterRadius => g.ring_outer_radius = v,
            CalibrationParam::RingTop => g.ring_top = v,
        }
    }

    /// Admissible interval given the rest of the geometry.
    fn bounds(self, g: &CavityGeometry, resolution: f64) -> (f64, f64) {
        let min_span = 4.5 * resolution;
        match self {
            CalibrationParam::RelativePermittivity => (1.0, 1e4),
            CalibrationParam::RingOuterRadius => (g.ring_inner_radius + min_span, g.shield_radius - 2.0 * resolution),
            CalibrationParam::RingTop => (g.ring_bottom + min_span, g.shield_height - g.plunger_depth),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub mode: ModeIndex,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub sweep: SweepOptions,
    pub sweep_limit: usize,
    /// Converged when the cost improves by less than this per sweep.
    pub improvement_tolerance: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            sweep: SweepOptions {
                resolution: 0.5e-3,
                mode_count: 8,
                solver: SolverOptions::default(),
            },
            sweep_limit: 50,
            improvement_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub geometry: CavityGeometry,
    /// Simulated frequency per target (Hz).
    pub frequencies: Vec<f64>,
    /// `(f_sim − f_target)/f_target` per target.
    pub residuals: Vec<f64>,
    pub cost: f64,
    pub sweeps: usize,
}

/// Penalty cost for a geometry where a target mode cannot be found.
const MISSING_MODE_COST: f64 = 1e3;

/// Evaluate the simulated frequencies of the targets on `geometry`.
pub fn target_frequencies(
    geometry: &CavityGeometry,
    targets: &[CalibrationTarget],
    sweep: &SweepOptions,
) -> Result<Vec<f64>> {
    let modes = solve_te0_modes_with(geometry, sweep.resolution, sweep.mode_count, &sweep.solver)?;
    targets
        .iter()
        .map(|t| select_mode(&modes, t.mode).map(|m| m.frequency))
        .collect()
}

fn calibration_cost(freqs: &[f64], targets: &[CalibrationTarget]) -> f64 {
    freqs
        .iter()
        .zip(targets)
        .map(|(f, t)| {
            let r = (f - t.frequency) / t.frequency;
            r * r
        })
        .sum()
}

/// Fit free geometry parameters to target mode frequencies by coordinate
/// descent with bracketed line searches, minimizing
/// `Σ ((f_sim − f_target)/f_target)²`.
pub fn calibrate_geometry(
    base: &CavityGeometry,
    targets: &[CalibrationTarget],
    free: &[CalibrationParam],
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    if targets.is_empty() || targets.len() > 3 || free.is_empty() || free.len() > targets.len() {
        return Err(Error::InvalidInput(
            "calibration requires 1 <= free parameters <= targets <= 3".into(),
        ));
    }
    for (k, p) in free.iter().enumerate() {
        if free[..k].contains(p) {
            return Err(Error::InvalidInput("duplicate calibration parameter".into()));
        }
    }
    base.validate()?;
    let eval = |g: &CavityGeometry| -> f64 {
        if g.validate().is_err() {
            return MISSING_MODE_COST;
        }
        match target_frequencies(g, targets, &opts.sweep) {
            Ok(f) => calibration_cost(&f, targets),
            Err(_) => MISSING_MODE_COST,
        }
    };

    let mut geometry = *base;
    let mut cost = eval(&geometry);
    let mut sweeps = 0;
    let finish = |g: CavityGeometry, sweeps: usize| -> Result<Calibration> {
        let frequencies = target_frequencies(&g, targets, &opts.sweep)?;
        let residuals = frequencies
            .iter()
            .zip(targets)
            .map(|(f, t)| (f - t.frequency) / t.frequency)
            .collect();
        let cost = calibration_cost(&frequencies, targets);
        Ok(Calibration { geometry: g, frequencies, residuals, cost, sweeps })
    };
    if cost < 1e-12 {
        return finish(geometry, 0);
    }
    while sweeps < opts.sweep_limit {
        sweeps += 1;
        let before = cost;
        for &param in free {
            let (lo, hi) = param.bounds(&geometry, opts.sweep.resolution);
            let x0 = param.get(&geometry);
            let step = 0.05 * x0.abs().max(hi - lo) * if sweeps == 1 { 1.0 } else { 0.2 };
            let mut trial = geometry;
            let found = bracketed_minimize(
                |x| {
                    param.set(&mut trial, x);
                    eval(&trial)
                },
                x0,
                step.min(0.25 * (hi - lo)),
                lo,
                hi,
                1e-7 * (hi - lo).max(x0.abs()),
            );
            if found.value < cost {
                param.set(&mut geometry, found.x);
                cost = found.value;
            }
        }
        if before - cost < opts.improvement_tolerance {
            return finish(geometry, sweeps);
        }
    }
    let residuals = target_frequencies(&geometry, targets, &opts.sweep)
        .map(|f| f.iter().zip(targets).map(|(f, t)| (f - t.frequency) / t.frequency).collect())
        .unwrap_or_default();
    Err(Error::CalibrationNoConvergence { sweeps, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_geometry, hollow_cylinder};

    #[test]
    fn bessel_zeros_match_tables() {
        assert!((bessel_j1_zero(1) - 3.831_705_970_207_512).abs() < 1e-12);
        assert!((bessel_j1_zero(2) - 7.015_586_669_815_619).abs() < 1e-12);
        assert!((bessel_j1_zero(3) - 10.173_468_135_062_722).abs() < 1e-12);
    }

    #[test]
    fn analytic_te011_of_reference_cylinder() {
        let f = analytic_te0np(16e-3, 20e-3, 1, 1);
        assert!((f - 13.67e9).abs() < 0.01e9, "{f}");
    }

    #[test]
    fn analytic_monotone_and_scale_invariant() {
        for &(r, l) in &[(16e-3, 20e-3), (5e-3, 40e-3), (30e-3, 3e-3)] {
            assert!(analytic_te0np(r, l, 1, 2) > analytic_te0np(r, l, 1, 1));
            for n in 1..3 {
                for p in 1..4 {
                    let a = analytic_te0np(r, l, n, p);
                    let b = analytic_te0np(2.0 * r, 2.0 * l, n, p);
                    assert!((b - a / 2.0).abs() < 1e-9 * a);
                }
            }
        }
    }

    #[test]
    fn operator_is_r_symmetric_and_dirichlet_rows_are_diagonal() {
        let grid = rasterize(&default_geometry().with_plunger_depth(3.3e-3), 0.5e-3).unwrap();
        let ep = assemble_eigenproblem(&grid);
        assert!(ep.stiffness.asymmetry() < 1e-14);
        // diag(r) A == K on free rows.
        for j in 0..grid.nz {
            for i in 0..grid.nr {
                let idx = grid.index(i, j);
                if grid.is_dirichlet(i, j) {
                    let row: Vec<_> = ep.operator.row(idx).collect();
                    assert_eq!(row, vec![(idx, 1.0)]);
                    continue;
                }
                for (c, v) in ep.operator.row(idx) {
                    let k = ep.stiffness.get(idx, c);
                    assert!((v * grid.r_of(i) - k).abs() <= 1e-12 * k.abs());
                }
            }
        }
    }

    #[test]
    fn stencil_tends_to_five_point_laplacian_at_large_radius() {
        let g = hollow_cylinder(2.0, 1e-2);
        let grid = rasterize(&g, 1e-3).unwrap();
        let ep = assemble_eigenproblem(&grid);
        let (i, j) = (grid.nr - 3, grid.nz / 2);
        let idx = grid.index(i, j);
        let h2 = grid.dr * grid.dr;
        let right = ep.operator.get(idx, grid.index(i + 1, j));
        let left = ep.operator.get(idx, grid.index(i - 1, j));
        assert!((right * h2 + 1.0).abs() < 1e-3);
        assert!((left * h2 + 1.0).abs() < 1e-3);
        let d = ep.operator.get(idx, idx);
        let lap = 2.0 / h2 + 2.0 / (grid.dz * grid.dz);
        assert!((d - lap).abs() / lap < 1e-6);
    }

    #[test]
    fn hollow_cylinder_lowest_mode_matches_oracle() {
        let g = hollow_cylinder(16e-3, 20e-3);
        let modes = solve_te0_modes(&g, 0.5e-3, 3).unwrap();
        let exact = analytic_te0np(16e-3, 20e-3, 1, 1);
        assert!((modes[0].frequency - exact).abs() / exact < 5e-3);
        assert_eq!(modes[0].index(), (1, 1));
        assert_eq!(modes[1].index(), (1, 2));
    }

    #[test]
    fn lanczos_matches_dense_on_small_grid() {
        let g = hollow_cylinder(16e-3, 20e-3);
        let grid = rasterize(&g, 1.0e-3).unwrap();
        let sys = reduced_system(&grid);
        assert!(sys.nodes.len() <= DENSE_FALLBACK_LIMIT);
        let dense = generalized_dense(&sys.stiffness, &sys.mass).unwrap();
        let lz = generalized_lowest_above(&sys.stiffness, &sys.mass, 0.0, 4, &LanczosOptions::default()).unwrap();
        for k in 0..4 {
            assert!((dense.values[k] - lz.values[k]).abs() < 1e-9 * dense.values[k]);
        }
    }

    #[test]
    fn mode_invariants() {
        let modes = solve_te0_modes(&default_geometry(), 0.5e-3, 3).unwrap();
        for m in &modes {
            let g = &m.grid;
            assert!(m.frequency > 0.0);
            let mut norm = 0.0;
            let mut peak = 0.0f64;
            for j in 0..g.nz {
                for i in 0..g.nr {
                    let v = m.e_theta[g.index(i, j)];
                    if g.is_dirichlet(i, j) {
                        assert_eq!(v, 0.0);
                    }
                    if v.abs() > peak.abs() {
                        peak = v;
                    }
                    norm += v * v * g.r_of(i) * g.dr * g.dz;
                    if i == 0 {
                        assert_eq!(m.h_r[g.index(i, j)], 0.0);
                        assert!(m.h_z[g.index(i, j)].is_finite());
                    }
                }
            }
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(peak > 0.0);
        }
    }

    #[test]
    fn uniform_sign_field_is_lowest_order() {
        let mut m = solve_te0_modes(&hollow_cylinder(16e-3, 20e-3), 1e-3, 1).unwrap().remove(0);
        for v in m.e_theta.iter_mut() {
            *v = v.abs();
        }
        assert_eq!(classify_mode(&m).unwrap(), (1, 1));
        for v in m.e_theta.iter_mut() {
            *v = 0.0;
        }
        assert!(matches!(classify_mode(&m), Err(Error::ClassificationAmbiguous { .. })));
    }

    #[test]
    fn q_and_circulating_power() {
        assert_eq!(q_from_linewidth(3.5e9, 3.5e6).unwrap(), 1000.0);
        assert!((q_from_linewidth(2.7e9, 3.5e6).unwrap() - 771.428_571_428_571_4).abs() < 1e-9);
        assert_eq!(q_from_linewidth(2.0e9, 2.0e9).unwrap(), 1.0);
        assert!(q_from_linewidth(1.0, 0.0).is_err());
        assert_eq!(circulating_power(1.0, 1000.0, 1.0).unwrap(), 1000.0);
        let expect = 1000.0 * 4.0 * 0.01 / (1.01 * 1.01);
        assert!((circulating_power(1.0, 1000.0, 0.01).unwrap() - expect).abs() < 1e-12);
        assert!((circulating_power(1.0, 1000.0, 0.01).unwrap() - 39.2).abs() < 0.05);
        assert_eq!(circulating_power(0.0, 1000.0, 0.3).unwrap(), 0.0);
        assert!(circulating_power(1.0, 1000.0, 0.0).is_err());
    }

    #[test]
    fn circulating_power_peaks_at_critical_coupling() {
        let at_one = circulating_power(2.0, 500.0, 1.0).unwrap();
        assert_eq!(at_one, 1000.0);
        for k in 1..200 {
            let beta = k as f64 * 0.02;
            assert!(circulating_power(2.0, 500.0, beta).unwrap() <= at_one);
        }
    }

    #[test]
    fn calibration_rejects_underdetermined() {
        let t = [
            CalibrationTarget { mode: (1, 1), frequency: 2.2e9 },
            CalibrationTarget { mode: (1, 3), frequency: 2.7e9 },
        ];
        let free = [
            CalibrationParam::RelativePermittivity,
            CalibrationParam::RingOuterRadius,
            CalibrationParam::RingTop,
        ];
        let r = calibrate_geometry(&default_geometry(), &t, &free, &CalibrationOptions::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn calibration_fixed_point_returns_base() {
        let opts = CalibrationOptions::default();
        let base = default_geometry();
        let f = target_frequencies(&base, &[CalibrationTarget { mode: (1, 1), frequency: 1.0 }], &opts.sweep).unwrap();
        let t = [CalibrationTarget { mode: (1, 1), frequency: f[0] }];
        let cal = calibrate_geometry(&base, &t, &[CalibrationParam::RelativePermittivity], &opts).unwrap();
        assert_eq!(cal.geometry, base);
        assert_eq!(cal.sweeps, 0);
    }
}
