//! Recovery of the NV axis from ODMR contrasts at the cavity centre and at
//! two azimuths on the circle of peak radial field.
//!
//! In the linear regime the contrast is proportional to `|H_⊥|²`. Taking the
//! centre field as purely axial and the field at `r*` as purely radial gives,
//! for an axis `n = (u, v, w)`,
//!
//! ```text
//! c_center = κ ρ² (1 − w²)
//! c_j      = κ (1 − (u cos φ_j + v sin φ_j)²)
//! ```
//!
//! with `ρ = h_z(0)/h_r(r*)`. Only squares of components enter, so the axis
//! is recovered up to sign flips of its components; `n` and `−n` are the
//! same director and are collapsed to the upper hemisphere.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::fieldmap::{field_at, field_ratio};
use crate::modesolver::ModeSolution;
use crate::nvodmr::{fit_odmr, frequency_grid, local_power, synthesize_spectrum, NVCenter};
use crate::optim::{cholesky_solve, levenberg_marquardt, LeastSquares, LmOptions};
use crate::vec3::Vec3;
use crate::{Error, Result};

/// Tolerance on squared components before a closed-form solution is
/// declared infeasible.
pub const SQUARE_TOLERANCE: f64 = 1e-9;
/// Relative forward-model mismatch accepted by the closed form.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;
/// Local minima within this factor of the best residual are reported.
pub const MINIMA_RESIDUAL_FACTOR: f64 = 1.05;
/// Multi-start grid size per angle.
pub const START_GRID: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePointMeasurement {
    pub c_center: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub rho: f64,
    pub linear_regime: bool,
}

impl ThreePointMeasurement {
    /// Orthogonal-azimuth measurement (`φ_a = 0`, `φ_b = π/2`) in the linear
    /// regime.
    pub fn orthogonal(c_center: f64, c_a: f64, c_b: f64, rho: f64) -> Self {
        ThreePointMeasurement {
            c_center,
            c_a,
            c_b,
            phi_a: 0.0,
            phi_b: FRAC_PI_2,
            rho,
            linear_regime: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.c_center, self.c_a, self.c_b].iter().all(|c| *c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput("contrasts must be finite and >= 0".into()));
        }
        if !self.rho.is_finite() {
            return Err(Error::InvalidInput("rho must be finite".into()));
        }
        if self.rho == 0.0 {
            return Err(Error::DegenerateRatio { value: 0.0, floor: 0.0 });
        }
        if same_mod_pi(self.phi_a, self.phi_b) {
            return Err(Error::InvalidInput("azimuths must differ modulo pi".into()));
        }
        Ok(())
    }
}

fn same_mod_pi(a: f64, b: f64) -> bool {
    let d = (a - b) / PI;
    (d - libm::round(d)).abs() < 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisCandidateSet {
    /// Gauge representatives (upper hemisphere), deduplicated.
    pub candidates: Vec<Vec3>,
    pub gauge_note: String,
    /// `Σ (c_model − c_meas)²` at the candidates.
    pub residual: f64,
    /// Recovered contrast scale `κ`.
    pub kappa: f64,
}

/// Representative of the director `±n`: `n_z ≥ 0`, ties broken by
/// `n_x ≥ 0`, then `n_y ≥ 0`.
pub fn gauge_representative(n: Vec3) -> Vec3 {
    let flip = n.z < 0.0 || (n.z == 0.0 && (n.x < 0.0 || (n.x == 0.0 && n.y < 0.0)));
    let n = if flip { -n } else { n };
    // Adding +0.0 turns any −0.0 into +0.0.
    Vec3::new(n.x + 0.0, n.y + 0.0, n.z + 0.0)
}

/// Model contrast at the circumference azimuth `phi`.
pub fn circumference_contrast(axis: Vec3, phi: f64, kappa: f64) -> f64 {
    let p = axis.x * libm::cos(phi) + axis.y * libm::sin(phi);
    kappa * (1.0 - p * p)
}

/// Model contrast at the centre.
pub fn center_contrast(axis: Vec3, rho: f64, kappa: f64) -> f64 {
    kappa * rho * rho * (1.0 - axis.z * axis.z)
}

/// `(c_center, c_a, c_b)` predicted for `axis`.
pub fn forward_contrasts(axis: Vec3, rho: f64, phi_a: f64, phi_b: f64, kappa: f64) -> (f64, f64, f64) {
    (
        center_contrast(axis, rho, kappa),
        circumference_contrast(axis, phi_a, kappa),
        circumference_contrast(axis, phi_b, kappa),
    )
}

fn gauge_note(candidates: &[Vec3]) -> String {
    format!(
        "axis is a director (n = -n); {} candidate(s) related by sign flips of components are indistinguishable by this protocol",
        candidates.len()
    )
}

/// Angle below which two candidates are considered the same.
const DEDUPE_ANGLE: f64 = 1e-4;

fn push_unique(list: &mut Vec<Vec3>, n: Vec3) {
    let n = gauge_representative(n);
    if !list.iter().any(|m| m.director_angle(n) < DEDUPE_ANGLE) {
        list.push(n);
    }
}

/// Closed-form inversion for azimuths `(0, π/2)`.
pub fn invert_axis_closed_form(m: &ThreePointMeasurement) -> Result<AxisCandidateSet> {
    m.validate()?;
    if !m.linear_regime {
        return Err(Error::InvalidInput("closed form requires a linear-regime measurement".into()));
    }
    if m.phi_a != 0.0 || (m.phi_b - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::InvalidInput("closed form requires azimuths (0, pi/2)".into()));
    }
    let rho2 = m.rho * m.rho;
    let kappa = (m.c_center + rho2 * (m.c_a + m.c_b)) / (2.0 * rho2);
    if !(kappa > 0.0) {
        return Err(Error::InconsistentMeasurement("all contrasts are zero".into()));
    }
    let u2 = 1.0 - m.c_a / kappa;
    let v2 = 1.0 - m.c_b / kappa;
    let w2 = 1.0 - u2 - v2;
    let in_range = |s: f64| (-SQUARE_TOLERANCE..=1.0 + SQUARE_TOLERANCE).contains(&s);
    if !(in_range(u2) && in_range(v2) && in_range(w2)) {
        return Err(Error::InconsistentMeasurement(format!(
            "squared components ({u2:.3e}, {v2:.3e}, {w2:.3e}) outside [0, 1]"
        )));
    }
    let (u, v, w) = (
        libm::sqrt(u2.clamp(0.0, 1.0)),
        libm::sqrt(v2.clamp(0.0, 1.0)),
        libm::sqrt(w2.clamp(0.0, 1.0)),
    );
    let scale = m.c_center.max(m.c_a).max(m.c_b);
    let mut candidates = Vec::new();
    let mut residual = 0.0f64;
    for (sx, sy, sz) in [(1.0, 1.0, 1.0), (-1.0, 1.0, 1.0), (1.0, -1.0, 1.0), (-1.0, -1.0, 1.0), (1.0, 1.0, -1.0), (-1.0, 1.0, -1.0), (1.0, -1.0, -1.0), (-1.0, -1.0, -1.0)] {
        let n = match Vec3::new(sx * u, sy * v, sz * w).normalized() {
            Some(n) => n,
            None => continue,
        };
        let (cc, ca, cb) = forward_contrasts(n, m.rho, m.phi_a, m.phi_b, kappa);
        let errs = [cc - m.c_center, ca - m.c_a, cb - m.c_b];
        if errs.iter().all(|e| e.abs() <= CONSISTENCY_TOLERANCE * scale) {
            residual = residual.max(errs.iter().map(|e| e * e).sum());
            push_unique(&mut candidates, n);
        }
    }
    if candidates.is_empty() {
        return Err(Error::InconsistentMeasurement("no sign combination reproduces the contrasts".into()));
    }
    sort_candidates(&mut candidates);
    Ok(AxisCandidateSet { gauge_note: gauge_note(&candidates), candidates, residual, kappa })
}

fn sort_candidates(c: &mut [Vec3]) {
    c.sort_by(|a, b| {
        (a.x, a.y, a.z)
            .partial_cmp(&(b.x, b.y, b.z))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
}

/// One contrast sample: centre or circumference at `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Sample {
    Center(f64),
    Circle { phi: f64, contrast: f64 },
}

struct AxisProblem {
    samples: Vec<Sample>,
    rho: f64,
}

fn axis_of(theta: f64, psi: f64) -> Vec3 {
    Vec3::from_spherical(theta, psi)
}

impl AxisProblem {
    fn unit_model(&self, n: Vec3) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| match *s {
                Sample::Center(c) => (center_contrast(n, self.rho, 1.0), c),
                Sample::Circle { phi, contrast } => (circumference_contrast(n, phi, 1.0), contrast),
            })
            .collect()
    }

    /// Residual with `κ` eliminated by linear least squares, and that `κ`.
    fn profile(&self, n: Vec3) -> (f64, f64) {
        let pairs = self.unit_model(n);
        let gg: f64 = pairs.iter().map(|(g, _)| g * g).sum();
        let gc: f64 = pairs.iter().map(|(g, c)| g * c).sum();
        let kappa = if gg > 0.0 { (gc / gg).max(0.0) } else { 0.0 };
        let res = pairs.iter().map(|(g, c)| (kappa * g - c) * (kappa * g - c)).sum();
        (res, kappa)
    }
}

impl LeastSquares for AxisProblem {
    fn residual_count(&self) -> usize {
        self.samples.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
        let n = axis_of(p[0], p[1]);
        for (o, (g, c)) in out.iter_mut().zip(self.unit_model(n)) {
            *o = p[2] * g - c;
        }
        true
    }

    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (theta, psi, kappa) = (p[0], p[1], p[2]);
        let (st, ct) = (libm::sin(theta), libm::cos(theta));
        let n = axis_of(theta, psi);
        for (k, s) in self.samples.iter().enumerate() {
            let row = &mut out[3 * k..3 * k + 3];
            match *s {
                Sample::Center(_) => {
                    // κ ρ² (1 − cos²θ) = κ ρ² sin²θ
                    let r2 = self.rho * self.rho;
                    row[0] = kappa * r2 * 2.0 * st * ct;
                    row[1] = 0.0;
                    row[2] = r2 * (1.0 - n.z * n.z);
                }
                Sample::Circle { phi, .. } => {
                    // κ (1 − sin²θ cos²(ψ − φ))
                    let c = libm::cos(psi - phi);
                    let s_ = libm::sin(psi - phi);
                    row[0] = -kappa * 2.0 * st * ct * c * c;
                    row[1] = kappa * 2.0 * st * st * c * s_;
                    row[2] = 1.0 - st * st * c * c;
                }
            }
        }
    }
}

/// Multi-start least-squares inversion over `(θ, ψ, κ)` using the three
/// protocol points plus any `extra` `(φ, contrast)` circumference samples.
pub fn invert_axis_least_squares(m: &ThreePointMeasurement, extra: &[(f64, f64)]) -> Result<AxisCandidateSet> {
    m.validate()?;
    let mut samples = vec![
        Sample::Center(m.c_center),
        Sample::Circle { phi: m.phi_a, contrast: m.c_a },
        Sample::Circle { phi: m.phi_b, contrast: m.c_b },
    ];
    for &(phi, contrast) in extra {
        if !(contrast >= 0.0) || !contrast.is_finite() {
            return Err(Error::InvalidInput("contrasts must be finite and >= 0".into()));
        }
        samples.push(Sample::Circle { phi, contrast });
    }
    let circle: Vec<f64> = samples
        .iter()
        .filter_map(|s| match s {
            Sample::Circle { phi, .. } => Some(*phi),
            _ => None,
        })
        .collect();
    for (i, a) in circle.iter().enumerate() {
        if circle[..i].iter().any(|b| same_mod_pi(*a, *b)) {
            return Err(Error::InvalidInput("azimuths must be pairwise distinct modulo pi".into()));
        }
    }
    // Work with contrasts scaled to O(1) so that κ and the angles are
    // comparably conditioned.
    let c_scale = samples.iter().fold(0.0f64, |acc, s| match *s {
        Sample::Center(c) | Sample::Circle { contrast: c, .. } => acc.max(c),
    });
    if !(c_scale > 0.0) {
        return Err(Error::InconsistentMeasurement("all contrasts are zero".into()));
    }
    for s in samples.iter_mut() {
        match s {
            Sample::Center(c) | Sample::Circle { contrast: c, .. } => *c /= c_scale,
        }
    }
    let problem = AxisProblem { samples, rho: m.rho };
    let opts = LmOptions { max_iterations: 200, relative_cost_tolerance: 1e-12 };
    let mut minima: Vec<(f64, Vec3, f64)> = Vec::new();
    for a in 0..START_GRID {
        for b in 0..START_GRID {
            let theta = (a as f64 + 0.5) * PI / START_GRID as f64;
            let psi = (b as f64 + 0.5) * 2.0 * PI / START_GRID as f64;
            let (_, kappa0) = problem.profile(axis_of(theta, psi));
            let rep = levenberg_marquardt(&problem, &[theta, psi, kappa0.max(1e-6)], &opts);
            if !rep.cost.is_finite() {
                continue;
            }
            let Some((p, cost)) = newton_polish(&problem, &rep.params) else {
                continue;
            };
            if !(p[2] > 0.0) {
                continue;
            }
            minima.push((2.0 * cost, axis_of(p[0], p[1]), p[2]));
        }
    }
    if minima.is_empty() {
        return Err(Error::FitNoConvergence("no multi-start run converged".into()));
    }
    let best = minima.iter().fold(f64::INFINITY, |m, x| m.min(x.0));
    // Zero-residual fits differ only by rounding; an absolute floor keeps
    // equivalent exact solutions together.
    let cutoff = MINIMA_RESIDUAL_FACTOR * best + 1e-20;
    let mut kept: Vec<(f64, Vec3, f64)> = minima.into_iter().filter(|x| x.0 <= cutoff).collect();
    kept.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut candidates = Vec::new();
    for (_, n, _) in &kept {
        push_unique(&mut candidates, *n);
    }
    sort_candidates(&mut candidates);
    Ok(AxisCandidateSet {
        gauge_note: gauge_note(&candidates),
        candidates,
        residual: kept[0].0 * c_scale * c_scale,
        kappa: kept[0].2 * c_scale,
    })
}

fn half_cost(problem: &AxisProblem, p: &[f64], r: &mut [f64]) -> f64 {
    problem.residuals(p, r);
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn gradient(problem: &AxisProblem, p: &[f64]) -> [f64; 3] {
    let nr = problem.residual_count();
    let mut r = vec![0.0; nr];
    let mut jac = vec![0.0; 3 * nr];
    problem.residuals(p, &mut r);
    problem.jacobian(p, &mut jac);
    let mut g = [0.0; 3];
    for k in 0..nr {
        for j in 0..3 {
            g[j] += jac[3 * k + j] * r[k];
        }
    }
    g
}

/// Damped Newton refinement with a finite-difference Hessian of the full
/// cost. Gauss–Newton steps (as in Levenberg–Marquardt) stall at minima
/// where a component of the axis vanishes, because the residuals are then
/// flat to first order and all curvature comes from the second-order term.
/// Returns the refined parameters and `½Σr²`, or `None` if it diverges.
fn newton_polish(problem: &AxisProblem, start: &[f64]) -> Option<(Vec<f64>, f64)> {
    const H: f64 = 1e-5;
    let mut p = start.to_vec();
    let mut r = vec![0.0; problem.residual_count()];
    let mut cost = half_cost(problem, &p, &mut r);
    for _ in 0..100 {
        let g = gradient(problem, &p);
        if cost == 0.0 || g.iter().all(|x| *x == 0.0) {
            return Some((p, cost));
        }
        let mut hess = [0.0; 9];
        for j in 0..3 {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[j] += H;
            minus[j] -= H;
            let (gp, gm) = (gradient(problem, &plus), gradient(problem, &minus));
            for i in 0..3 {
                hess[i * 3 + j] = (gp[i] - gm[i]) / (2.0 * H);
            }
        }
        for i in 0..3 {
            for j in 0..i {
                let avg = 0.5 * (hess[i * 3 + j] + hess[j * 3 + i]);
                hess[i * 3 + j] = avg;
                hess[j * 3 + i] = avg;
            }
        }
        let mut mu = 0.0;
        let mut accepted = None;
        while mu < 1e12 {
            let mut a = hess;
            for d in 0..3 {
                a[d * 4] += mu * (hess[d * 4].abs() + 1e-12);
            }
            let rhs = [-g[0], -g[1], -g[2]];
            if let Some(step) = cholesky_solve(&a, &rhs, 3) {
                let trial: Vec<f64> = p.iter().zip(&step).map(|(x, s)| x + s).collect();
                let c = half_cost(problem, &trial, &mut r);
                if c.is_finite() && c <= cost {
                    accepted = Some((trial, c, step));
                    break;
                }
            }
            mu = if mu == 0.0 { 1e-8 } else { mu * 10.0 };
        }
        let Some((trial, c, step)) = accepted else {
            // No descent at any damping: stationary to working precision.
            return Some((p, cost));
        };
        p = trial;
        cost = c;
        if step.iter().all(|s| s.abs() <= 1e-11) {
            return Some((p, cost));
        }
    }
    None
}

/// Forward-model residual of `axis` with the optimal `κ`, over the three
/// protocol points.
pub fn profile_residual(m: &ThreePointMeasurement, axis: Vec3) -> f64 {
    let problem = AxisProblem {
        samples: vec![
            Sample::Center(m.c_center),
            Sample::Circle { phi: m.phi_a, contrast: m.c_a },
            Sample::Circle { phi: m.phi_b, contrast: m.c_b },
        ],
        rho: m.rho,
    };
    problem.profile(axis).0
}

/// Settings of the simulated protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub phi_a: f64,
    pub phi_b: f64,
    /// Spectrum samples and half-span in linewidths around the resonance.
    pub spectrum_points: usize,
    pub half_span_linewidths: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            phi_a: 0.0,
            phi_b: FRAC_PI_2,
            spectrum_points: 401,
            half_span_linewidths: 10.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Saturation parameter allowed at the strongest protocol point.
pub const LINEAR_REGIME_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisRecovery {
    pub true_axis: Vec3,
    pub measurement: ThreePointMeasurement,
    pub peak_radius: f64,
    pub recovered: AxisCandidateSet,
    /// Director angle from the true axis to each candidate (rad).
    pub errors: Vec<f64>,
    pub nearest_error: f64,
}

/// Run the three-point protocol on simulated fields: synthesize and fit
/// spectra at the centre and at `r*` for both azimuths, take `ρ` from the
/// mode, and invert.
pub fn end_to_end_axis_recovery(
    mode: &ModeSolution,
    nv: &NVCenter,
    z_offset: f64,
    drive_power: f64,
    opts: &ProtocolOptions,
) -> Result<AxisRecovery> {
    nv.validate()?;
    let ratio = field_ratio(mode, z_offset)?;
    let r = ratio.peak_radius;
    let points = [
        (0.0, 0.0),
        (r * libm::cos(opts.phi_a), r * libm::sin(opts.phi_a)),
        (r * libm::cos(opts.phi_b), r * libm::sin(opts.phi_b)),
    ];
    let fields = points
        .iter()
        .map(|&(x, y)| field_at(mode, x, y, z_offset))
        .collect::<Result<Vec<_>>>()?;
    let s_max = fields
        .iter()
        .map(|h| local_power(nv, *h, drive_power) / nv.p_sat)
        .fold(0.0f64, f64::max);
    if s_max > LINEAR_REGIME_LIMIT {
        return Err(Error::InvalidInput(format!(
            "drive power leaves the linear regime (s = {s_max:.3e} > {LINEAR_REGIME_LIMIT})"
        )));
    }
    let half = opts.half_span_linewidths * nv.linewidth_fwhm;
    let freqs = frequency_grid(nv.d_splitting - half, nv.d_splitting + half, opts.spectrum_points);
    let lines = match (nv.strain_e > 0.0, nv.hyperfine_a > 0.0) {
        (false, false) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (true, true) => {
            return Err(Error::InvalidInput("fit supports strain or hyperfine splitting, not both".into()))
        }
    };
    let mut contrasts = [0.0; 3];
    for (k, h) in fields.iter().enumerate() {
        let spectrum = synthesize_spectrum(nv, *h, drive_power, &freqs, opts.noise_sigma, opts.seed.wrapping_add(k as u64))?;
        contrasts[k] = fit_odmr(&spectrum, lines)?.contrast.max(0.0);
    }
    let measurement = ThreePointMeasurement {
        c_center: contrasts[0],
        c_a: contrasts[1],
        c_b: contrasts[2],
        phi_a: opts.phi_a,
        phi_b: opts.phi_b,
        rho: ratio.rho,
        linear_regime: true,
    };
    let recovered = invert_axis_least_squares(&measurement, &[])?;
    let errors: Vec<f64> = recovered.candidates.iter().map(|c| c.director_angle(nv.axis)).collect();
    let nearest_error = errors.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AxisRecovery {
        true_axis: nv.axis,
        measurement,
        peak_radius: r,
        recovered,
        errors,
        nearest_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_axis(rng: &mut ChaCha8Rng) -> Vec3 {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = libm::sqrt(1.0 - z * z);
        Vec3::new(s * libm::cos(phi), s * libm::sin(phi), z)
    }

    fn nearest(set: &AxisCandidateSet, n: Vec3) -> f64 {
        set.candidates.iter().map(|c| c.director_angle(n)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn forward_examples() {
        assert_eq!(forward_contrasts(Vec3::Z, 0.7, 0.0, FRAC_PI_2, 2.0), (0.0, 2.0, 2.0));
        let n = Vec3::new(1.0, 1.0, 1.0).normalized().unwrap();
        let (c, a, b) = forward_contrasts(n, 0.5, 0.0, FRAC_PI_2, 1.0);
        assert!((c - 1.0 / 6.0).abs() < 1e-15);
        assert!((a - 2.0 / 3.0).abs() < 1e-15 && (b - 2.0 / 3.0).abs() < 1e-15);
        let (c2, a2, b2) = forward_contrasts(n, 0.5, 0.0, FRAC_PI_2, 2.0);
        assert_eq!((c2, a2, b2), (2.0 * c, 2.0 * a, 2.0 * b));
    }

    #[test]
    fn closed_form_examples() {
        let m = ThreePointMeasurement::orthogonal(1.0 / 6.0, 2.0 / 3.0, 2.0 / 3.0, 0.5);
        let set = invert_axis_closed_form(&m).unwrap();
        assert!((set.kappa - 1.0).abs() < 1e-14);
        assert_eq!(set.candidates.len(), 4);
        for c in &set.candidates {
            for comp in c.to_array() {
                assert!((comp.abs() - 1.0 / libm::sqrt(3.0)).abs() < 1e-12);
            }
            assert!(c.z >= 0.0);
        }
        let z = invert_axis_closed_form(&ThreePointMeasurement::orthogonal(0.0, 0.4, 0.4, 0.8)).unwrap();
        assert_eq!(z.candidates, vec![Vec3::Z]);
        let bad = ThreePointMeasurement::orthogonal(0.0, 1.0, 0.1, 1.0);
        assert!(matches!(invert_axis_closed_form(&bad), Err(Error::InconsistentMeasurement(_))));
        let zero_rho = ThreePointMeasurement::orthogonal(0.1, 0.1, 0.1, 0.0);
        assert!(matches!(invert_axis_closed_form(&zero_rho), Err(Error::DegenerateRatio { .. })));
        let skew = ThreePointMeasurement { phi_b: 1.0, ..m };
        assert!(invert_axis_closed_form(&skew).is_err());
    }

    #[test]
    fn candidate_count_follows_zero_components() {
        // Sign ambiguity per nonzero component, halved by the director gauge.
        let cases = [
            (Vec3::Z, 1),
            (Vec3::X, 1),
            (Vec3::new(0.6, 0.0, 0.8), 2),
            (Vec3::new(0.0, 0.6, 0.8), 2),
            (Vec3::new(0.6, 0.8, 0.0), 2),
            (Vec3::new(0.48, 0.6, 0.64), 4),
        ];
        for (n, count) in cases {
            let (c, a, b) = forward_contrasts(n, 0.9, 0.0, FRAC_PI_2, 1.3);
            let set = invert_axis_closed_form(&ThreePointMeasurement::orthogonal(c, a, b, 0.9)).unwrap();
            assert_eq!(set.candidates.len(), count, "{n:?}");
            assert!(nearest(&set, n) < 1e-7);
        }
    }

    #[test]
    fn closed_form_round_trip_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let n = random_axis(&mut rng);
            for rho in [0.25, 0.5, 1.0, 2.0] {
                for kappa in [0.5, 1.0, 3.0] {
                    let (c, a, b) = forward_contrasts(n, rho, 0.0, FRAC_PI_2, kappa);
                    let m = ThreePointMeasurement::orthogonal(c, a, b, rho);
                    let set = invert_axis_closed_form(&m).unwrap();
                    assert!(set.kappa > 0.0);
                    assert!(set.candidates.len() <= 4);
                    assert!(nearest(&set, gauge_representative(n)) < 1e-6);
                    for cand in &set.candidates {
                        let (c2, a2, b2) = forward_contrasts(*cand, rho, 0.0, FRAC_PI_2, set.kappa);
                        assert!((c2 - c).abs() < 1e-8 && (a2 - a).abs() < 1e-8 && (b2 - b).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn least_squares_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = random_axis(&mut rng);
            let (c, a, b) = forward_contrasts(n, 0.6, 0.0, FRAC_PI_2, 1.0);
            let m = ThreePointMeasurement::orthogonal(c, a, b, 0.6);
            let cf = invert_axis_closed_form(&m).unwrap();
            let ls = invert_axis_least_squares(&m, &[]).unwrap();
            assert_eq!(cf.candidates.len(), ls.candidates.len(), "{n:?}");
            for cand in &cf.candidates {
                assert!(nearest(&ls, *cand) < 1e-6);
            }
        }
    }

    #[test]
    fn redundant_point_does_not_raise_residual() {
        let n = Vec3::new(0.3, -0.5, 0.81).normalized().unwrap();
        let (c, a, b) = forward_contrasts(n, 0.7, 0.0, FRAC_PI_2, 1.0);
        // Slightly inconsistent three-point data, plus a consistent extra point.
        let m = ThreePointMeasurement::orthogonal(c * 1.02, a, b * 0.99, 0.7);
        let three = invert_axis_least_squares(&m, &[]).unwrap();
        let phi = PI / 4.0;
        let extra = circumference_contrast(n, phi, 1.0);
        let four = invert_axis_least_squares(&m, &[(phi, extra)]).unwrap();
        assert!(four.residual >= three.residual - 1e-15);
        assert!(invert_axis_least_squares(&m, &[(PI, 0.3)]).is_err());
    }

    #[test]
    fn noisy_least_squares_median_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = Vec3::new(1.0, 1.0, 1.0).normalized().unwrap();
        let mut errs = Vec::new();
        for _ in 0..20 {
            let (c, a, b) = forward_contrasts(n, 0.5, 0.0, FRAC_PI_2, 1.0);
            let mut noisy = |x: f64| x * (1.0 + 0.05 * rng.random_range(-1.0..1.0));
            let m = ThreePointMeasurement::orthogonal(noisy(c), noisy(a), noisy(b), 0.5);
            errs.push(nearest(&invert_axis_least_squares(&m, &[]).unwrap(), n));
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(errs[10].to_degrees() < 5.0, "{errs:?}");
    }

    #[test]
    fn gauge_collapse() {
        assert_eq!(gauge_representative(Vec3::new(0.0, 0.0, -1.0)), Vec3::Z);
        assert_eq!(gauge_representative(Vec3::new(-1.0, 0.0, 0.0)), Vec3::X);
        assert_eq!(gauge_representative(Vec3::new(0.0, -1.0, 0.0)), Vec3::Y);
        let n = gauge_representative(Vec3::new(0.1, 0.2, -0.3));
        assert_eq!(n, Vec3::new(-0.1, -0.2, 0.3));
    }

    proptest! {
        #[test]
        fn closed_form_inverts_forward(z in -1.0..1.0f64, phi in 0.0..core::f64::consts::TAU, rho in 0.1..3.0f64, kappa in 0.1..5.0f64) {
            let s = libm::sqrt(1.0 - z * z);
            let n = Vec3::new(s * phi.cos(), s * phi.sin(), z);
            let (c, a, b) = forward_contrasts(n, rho, 0.0, FRAC_PI_2, kappa);
            let set = invert_axis_closed_form(&ThreePointMeasurement::orthogonal(c, a, b, rho)).unwrap();
            prop_assert!(nearest(&set, n) < 1e-6);
            prop_assert!((set.kappa - kappa).abs() < 1e-9 * kappa);
        }
    }
}
