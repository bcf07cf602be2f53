//! NV⁻ ground-state response to the cavity field: Rabi coupling, ODMR
//! synthesis and fitting, power saturation and spatial contrast scans.
//!
//! Powers are in watts throughout. Fields are in the mode-normalized units of
//! [`crate::modesolver`]; `p_sat` is defined at a perpendicular coupling of 1
//! in those units, so only ratios of powers and couplings are physical.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::fieldmap::field_at;
use crate::modesolver::ModeSolution;
use crate::optim::{cholesky_solve, levenberg_marquardt, LeastSquares, LmOptions};
use crate::vec3::Vec3;
use crate::{Error, Result};

/// Zero-field splitting of the NV⁻ ground state (Hz).
pub const ZERO_FIELD_SPLITTING: f64 = 2.870e9;
/// Default saturation power: 5 dBm in watts.
pub const DEFAULT_P_SAT: f64 = 3.162_277_660_168_379_5e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NVCenter {
    /// Unit vector along the N–V axis.
    pub axis: Vec3,
    pub d_splitting: f64,
    pub strain_e: f64,
    /// Hyperfine splitting; 0 disables the triplet structure.
    pub hyperfine_a: f64,
    pub linewidth_fwhm: f64,
    pub contrast_ceiling: f64,
    pub p_sat: f64,
}

impl Default for NVCenter {
    fn default() -> Self {
        NVCenter {
            axis: Vec3::Z,
            d_splitting: ZERO_FIELD_SPLITTING,
            strain_e: 0.0,
            hyperfine_a: 0.0,
            linewidth_fwhm: 10e6,
            contrast_ceiling: 0.12,
            p_sat: DEFAULT_P_SAT,
        }
    }
}

impl NVCenter {
    /// Default center with the given (normalized) axis.
    pub fn with_axis(axis: Vec3) -> Result<Self> {
        let axis = axis
            .normalized()
            .ok_or_else(|| Error::InvalidInput("NV axis must be nonzero".into()))?;
        Ok(NVCenter { axis, ..NVCenter::default() })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("NV center: {what}")));
        if !((self.axis.norm() - 1.0).abs() <= 1e-12) {
            return bad("axis must be a unit vector");
        }
        if !(self.d_splitting > 0.0) {
            return bad("d_splitting must be > 0");
        }
        if !(self.linewidth_fwhm > 0.0) {
            return bad("linewidth_fwhm must be > 0");
        }
        if !(self.contrast_ceiling > 0.0 && self.contrast_ceiling <= 1.0) {
            return bad("contrast_ceiling must lie in (0, 1]");
        }
        if !(self.p_sat > 0.0) {
            return bad("p_sat must be > 0");
        }
        if !(self.strain_e >= 0.0) || !(self.hyperfine_a >= 0.0) {
            return bad("strain_e and hyperfine_a must be >= 0");
        }
        Ok(())
    }
}

/// Magnitude of the field component perpendicular to `axis`.
pub fn rabi_coupling(field: Vec3, axis: Vec3) -> f64 {
    (field - axis * field.dot(axis)).norm()
}

/// Resonance lines `(center Hz, weight)` at zero static field.
pub fn resonance_lines(nv: &NVCenter) -> Vec<(f64, f64)> {
    let electronic: Vec<(f64, f64)> = if nv.strain_e == 0.0 {
        vec![(nv.d_splitting, 1.0)]
    } else {
        vec![(nv.d_splitting - nv.strain_e, 0.5), (nv.d_splitting + nv.strain_e, 0.5)]
    };
    if nv.hyperfine_a == 0.0 {
        return electronic;
    }
    let a = nv.hyperfine_a;
    electronic
        .into_iter()
        .flat_map(|(c, w)| [(c - a, w / 3.0), (c, w / 3.0), (c + a, w / 3.0)])
        .collect()
}

/// Steady-state ODMR contrast `C_max · s/(1+s)` with `s = P/p_sat`.
pub fn saturation_contrast(nv: &NVCenter, local_power: f64) -> f64 {
    let s = local_power.max(0.0) / nv.p_sat;
    nv.contrast_ceiling * s / (1.0 + s)
}

/// Power seen by the spin: `drive_power · rabi_coupling²` (reference
/// coupling 1).
pub fn local_power(nv: &NVCenter, field: Vec3, drive_power: f64) -> f64 {
    let c = rabi_coupling(field, nv.axis);
    drive_power * c * c
}

/// Drive power that puts a spin in `field` at saturation parameter `s`.
/// Field amplitudes are mode-normalized, so this is how a physical operating
/// point (e.g. "linear regime, s = 0.005 at the strongest point") is chosen.
pub fn drive_for_saturation(nv: &NVCenter, field: Vec3, s: f64) -> Result<f64> {
    let c = rabi_coupling(field, nv.axis);
    if !(c > 0.0) || !(s >= 0.0) {
        return Err(Error::InvalidInput("need a coupled field and s >= 0".into()));
    }
    Ok(s * nv.p_sat / (c * c))
}

/// Unit-peak Lorentzian with full width `fwhm`.
pub fn lorentzian(f: f64, center: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    let d = f - center;
    g * g / (d * d + g * g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ODMRSpectrum {
    pub frequencies: Vec<f64>,
    /// Normalized fluorescence; 1 is the off-resonant baseline.
    pub fluorescence: Vec<f64>,
    pub drive_power: f64,
    pub nv: NVCenter,
    pub field: Vec3,
}

impl ODMRSpectrum {
    /// Spectrum from measured data (e.g. an imported file).
    pub fn measured(frequencies: Vec<f64>, fluorescence: Vec<f64>) -> Result<Self> {
        if frequencies.len() != fluorescence.len() {
            return Err(Error::InvalidInput("frequency and fluorescence lengths differ".into()));
        }
        check_increasing(&frequencies)?;
        Ok(ODMRSpectrum {
            frequencies,
            fluorescence,
            drive_power: 0.0,
            nv: NVCenter::default(),
            field: Vec3::new(0.0, 0.0, 0.0),
        })
    }
}

fn check_increasing(f: &[f64]) -> Result<()> {
    if f.is_empty() || f.iter().any(|x| !x.is_finite()) || f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("frequencies must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `count` equally spaced frequencies on `[start, stop]`.
pub fn frequency_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Synthesize a normalized ODMR spectrum with seeded additive Gaussian noise.
pub fn synthesize_spectrum(
    nv: &NVCenter,
    field: Vec3,
    drive_power: f64,
    frequencies: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<ODMRSpectrum> {
    nv.validate()?;
    check_increasing(frequencies)?;
    if !(noise_sigma >= 0.0) || !(drive_power >= 0.0) {
        return Err(Error::InvalidInput("noise_sigma and drive_power must be >= 0".into()));
    }
    let contrast = saturation_contrast(nv, local_power(nv, field, drive_power));
    let lines = resonance_lines(nv);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidInput(format!("{e}")))?;
    let fluorescence = frequencies
        .iter()
        .map(|&f| {
            let dip: f64 = lines.iter().map(|(c, w)| w * lorentzian(f, *c, nv.linewidth_fwhm)).sum();
            let noise = if noise_sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            1.0 - contrast * dip + noise
        })
        .collect();
    Ok(ODMRSpectrum {
        frequencies: frequencies.to_vec(),
        fluorescence,
        drive_power,
        nv: *nv,
        field,
    })
}

/// Result of [`fit_odmr`]. The model is
/// `baseline − contrast · (1/n) Σᵢ L(f; centerᵢ, fwhm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrFit {
    pub centers: Vec<f64>,
    pub fwhm: f64,
    pub contrast: f64,
    pub baseline: f64,
    pub rms_residual: f64,
    /// One-sigma uncertainty of `contrast` from the fit covariance.
    pub contrast_stderr: f64,
    /// `contrast > 3 · contrast_stderr`.
    pub significant: bool,
    pub iterations: usize,
}

struct LineshapeProblem<'a> {
    f: &'a [f64],
    y: &'a [f64],
    n_lines: usize,
    min_fwhm: f64,
    max_fwhm: f64,
    /// Frequencies are shifted/scaled to O(1) for conditioning.
    f0: f64,
    scale: f64,
}

impl LineshapeProblem<'_> {
    fn x(&self, k: usize) -> f64 {
        (self.f[k] - self.f0) / self.scale
    }
}

impl LeastSquares for LineshapeProblem<'_> {
    fn residual_count(&self) -> usize {
        self.f.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
        let (b, c, w) = (p[0], p[1], p[2]);
        let width = w * self.scale;
        if !(width >= self.min_fwhm && width <= self.max_fwhm) || !p.iter().all(|v| v.is_finite()) {
            return false;
        }
        let (lo, hi) = (self.x(0), self.x(self.f.len() - 1));
        if p[3..].iter().any(|&ci| ci < lo || ci > hi) {
            return false;
        }
        let inv_n = 1.0 / self.n_lines as f64;
        for k in 0..self.f.len() {
            let x = self.x(k);
            let dip: f64 = p[3..].iter().map(|&ci| lorentzian(x, ci, w)).sum();
            out[k] = b - c * inv_n * dip - self.y[k];
        }
        true
    }

    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (c, w) = (p[1], p[2]);
        let np = p.len();
        let g = 0.5 * w;
        let inv_n = 1.0 / self.n_lines as f64;
        for k in 0..self.f.len() {
            let x = self.x(k);
            let row = &mut out[k * np..(k + 1) * np];
            row[0] = 1.0;
            row[1] = 0.0;
            row[2] = 0.0;
            for (li, &ci) in p[3..].iter().enumerate() {
                let d = x - ci;
                let den = d * d + g * g;
                let l = g * g / den;
                row[1] -= inv_n * l;
                // ∂L/∂w = g d²/den², ∂L/∂c = 2 d g²/den².
                row[2] -= c * inv_n * g * d * d / (den * den);
                row[3 + li] = -c * inv_n * 2.0 * d * g * g / (den * den);
            }
        }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn smooth5(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(2);
            let hi = (k + 2).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Narrowest resolvable width, in sample spacings. Without it the fit can
/// lock onto single-sample noise spikes.
pub const MIN_SAMPLES_PER_FWHM: f64 = 3.0;

/// Fit `n_lines` Lorentzian dips with a common width to a spectrum.
pub fn fit_odmr(spectrum: &ODMRSpectrum, n_lines: usize) -> Result<OdmrFit> {
    let f = &spectrum.frequencies;
    let y = &spectrum.fluorescence;
    if !(1..=3).contains(&n_lines) {
        return Err(Error::InvalidInput("n_lines must be 1, 2 or 3".into()));
    }
    check_increasing(f)?;
    if f.len() != y.len() || f.len() < 3 * n_lines + 3 {
        return Err(Error::InvalidInput("too few spectrum samples for the fit".into()));
    }
    let n = f.len();
    let spacing = (f[n - 1] - f[0]) / (n - 1) as f64;

    // Initial guesses.
    let baseline = median(y);
    let sm = smooth5(y);
    let mut minima: Vec<usize> = (0..n)
        .filter(|&k| (k == 0 || sm[k] <= sm[k - 1]) && (k == n - 1 || sm[k] < sm[k + 1]))
        .collect();
    minima.sort_by(|a, b| sm[*a].partial_cmp(&sm[*b]).unwrap());
    let deepest = minima.first().copied().unwrap_or(0);
    let depth = (baseline - sm[deepest]).max(0.0);
    let half = baseline - 0.5 * depth;
    let mut left = deepest;
    while left > 0 && sm[left] < half {
        left -= 1;
    }
    let mut right = deepest;
    while right < n - 1 && sm[right] < half {
        right += 1;
    }
    let fwhm0 = (f[right] - f[left]).max(1.5 * MIN_SAMPLES_PER_FWHM * spacing);
    let span = f[n - 1] - f[0];
    if span < 3.0 * fwhm0 {
        return Err(Error::InsufficientSpan { span, fwhm: fwhm0 });
    }
    let mut centers0: Vec<f64> = minima.iter().take(n_lines).map(|&k| f[k]).collect();
    let mut k = 1.0;
    while centers0.len() < n_lines {
        let side = if centers0.len() % 2 == 1 { -1.0 } else { 1.0 };
        centers0.push(f[deepest] + side * k * fwhm0);
        k += 1.0;
    }
    centers0.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let f0 = f[deepest];
    let scale = fwhm0;
    let problem = LineshapeProblem {
        f,
        y,
        n_lines,
        min_fwhm: MIN_SAMPLES_PER_FWHM * spacing,
        max_fwhm: span / 3.0,
        f0,
        scale,
    };
    let mut start = vec![baseline, depth * n_lines as f64, 1.0];
    start.extend(centers0.iter().map(|c| (c - f0) / scale));
    let report = levenberg_marquardt(&problem, &start, &LmOptions::default());
    if !report.converged || !report.cost.is_finite() {
        return Err(Error::FitNoConvergence(format!(
            "{} iterations, cost {:e}",
            report.iterations, report.cost
        )));
    }
    let p = &report.params;
    let rms = libm::sqrt(2.0 * report.cost / n as f64);

    // Covariance of the contrast: σ² (JᵀJ)⁻¹ restricted to (b, C) when the
    // lineshape is degenerate, full otherwise.
    let np = p.len();
    let mut jac = vec![0.0; n * np];
    problem.jacobian(p, &mut jac);
    let dof = (n - np).max(1) as f64;
    let sigma2 = 2.0 * report.cost / dof;
    let contrast_stderr = contrast_variance(&jac, n, np).map(|v| libm::sqrt(v * sigma2)).unwrap_or(f64::INFINITY);

    let mut centers: Vec<f64> = p[3..].iter().map(|c| f0 + c * scale).collect();
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(OdmrFit {
        centers,
        fwhm: p[2] * scale,
        contrast: p[1],
        baseline: p[0],
        rms_residual: rms,
        contrast_stderr,
        significant: p[1] > 3.0 * contrast_stderr,
        iterations: report.iterations,
    })
}

/// `[(JᵀJ)⁻¹]₁₁`, falling back to the (baseline, contrast) block when the
/// full normal matrix is singular (e.g. a flat spectrum).
fn contrast_variance(jac: &[f64], n: usize, np: usize) -> Option<f64> {
    let normal = |cols: &[usize]| {
        let m = cols.len();
        let mut a = vec![0.0; m * m];
        for k in 0..n {
            for (ai, &ca) in cols.iter().enumerate() {
                for (bi, &cb) in cols.iter().enumerate() {
                    a[ai * m + bi] += jac[k * np + ca] * jac[k * np + cb];
                }
            }
        }
        a
    };
    let all: Vec<usize> = (0..np).collect();
    let mut e1 = vec![0.0; np];
    e1[1] = 1.0;
    if let Some(x) = cholesky_solve(&normal(&all), &e1, np) {
        return Some(x[1]);
    }
    cholesky_solve(&normal(&[0, 1]), &[0.0, 1.0], 2).map(|x| x[1])
}

/// Coordinate used as the scan position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastScan {
    pub axis: ScanAxis,
    /// Coordinate along `axis` (m).
    pub positions: Vec<f64>,
    pub contrasts: Vec<f64>,
    /// True when the contrasts were divided by their maximum.
    pub normalized: bool,
}

/// Points `(x, y, z_offset)` stepping along `axis` from `start` to `stop`
/// (inclusive) with the other coordinates fixed at `base`.
pub fn line_path(axis: ScanAxis, start: f64, stop: f64, step: f64, base: [f64; 3]) -> Result<Vec<[f64; 3]>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidInput("scan requires step > 0 and stop >= start".into()));
    }
    let count = libm::floor((stop - start) / step + 1e-9) as usize + 1;
    let k = match axis {
        ScanAxis::X => 0,
        ScanAxis::Y => 1,
        ScanAxis::Z => 2,
    };
    Ok((0..count)
        .map(|i| {
            let mut p = base;
            p[k] = start + i as f64 * step;
            p
        })
        .collect())
}

/// ODMR contrast at each `(x, y, z_offset)` of `path`.
///
/// When `normalize` is set and any contrast is positive, all contrasts are
/// divided by the maximum so that it equals exactly 1.
pub fn contrast_scan(
    mode: &ModeSolution,
    nv: &NVCenter,
    axis: ScanAxis,
    path: &[[f64; 3]],
    drive_power: f64,
    normalize: bool,
) -> Result<ContrastScan> {
    nv.validate()?;
    let k = match axis {
        ScanAxis::X => 0,
        ScanAxis::Y => 1,
        ScanAxis::Z => 2,
    };
    let mut contrasts = Vec::with_capacity(path.len());
    for p in path {
        let h = field_at(mode, p[0], p[1], p[2])?;
        contrasts.push(saturation_contrast(nv, local_power(nv, h, drive_power)));
    }
    let max = contrasts.iter().fold(0.0f64, |m, c| m.max(*c));
    let normalized = normalize && max > 0.0;
    if normalized {
        // x / x == 1 exactly in IEEE arithmetic, so the maximum maps to 1.
        for c in contrasts.iter_mut() {
            *c /= max;
        }
    }
    Ok(ContrastScan {
        axis,
        positions: path.iter().map(|p| p[k]).collect(),
        contrasts,
        normalized,
    })
}
