//! TOML run configuration.
//!
//! Lengths are given in millimeters, frequencies in GHz (MHz for the NV
//! linewidth-scale quantities) and powers as `"<x>dBm"` / `"<x>W"` strings.
//! Everything is converted to SI on the way into the core types. Unknown
//! keys are rejected at every level.

use std::path::Path;

use nvcav_core::geometry::{default_geometry, Bottom, CavityGeometry, Material};
use nvcav_core::modesolver::{
    CalibrationOptions, CalibrationParam, CalibrationTarget, ModeIndex, SolverOptions, SweepOptions,
};
use nvcav_core::nvodmr::NVCenter;
use nvcav_core::vec3::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const MM: f64 = 1e-3;
const GHZ: f64 = 1e9;
const MHZ: f64 = 1e6;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Option<GeometrySection>,
    pub solver: Option<SolverSection>,
    pub nv: Option<NvSection>,
    pub tune: Option<TuneSection>,
    pub fieldmap: Option<FieldmapSection>,
    pub odmr: Option<OdmrSection>,
    pub scan: Option<ScanSection>,
    pub invert: Option<InvertSection>,
    pub calibrate: Option<CalibrateSection>,
    pub output: Option<OutputSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The geometry section, converted and validated.
    pub fn geometry(&self) -> Result<CavityGeometry, CliError> {
        require(&self.geometry, "geometry")?.to_core()
    }

    /// Solver settings; the section is optional and defaults apply.
    pub fn sweep(&self) -> Result<SweepOptions, CliError> {
        self.solver.clone().unwrap_or_default().to_core()
    }

    pub fn nv(&self) -> Result<NVCenter, CliError> {
        require(&self.nv, "nv")?.to_core()
    }
}

pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BottomKind {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub shield_radius_mm: f64,
    pub shield_height_mm: f64,
    pub ring_inner_radius_mm: f64,
    pub ring_outer_radius_mm: f64,
    pub ring_bottom_mm: f64,
    pub ring_top_mm: f64,
    pub plunger_radius_mm: f64,
    pub plunger_depth_mm: f64,
    pub bottom: BottomKind,
    pub bottom_extension_mm: f64,
    pub relative_permittivity: f64,
    pub loss_tangent: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection::from_core(&default_geometry())
    }
}

impl GeometrySection {
    pub fn from_core(g: &CavityGeometry) -> Self {
        let (bottom, ext) = match g.bottom {
            Bottom::Open { extension } => (BottomKind::Open, extension),
            Bottom::Closed => (BottomKind::Closed, 10e-3),
        };
        GeometrySection {
            shield_radius_mm: g.shield_radius / MM,
            shield_height_mm: g.shield_height / MM,
            ring_inner_radius_mm: g.ring_inner_radius / MM,
            ring_outer_radius_mm: g.ring_outer_radius / MM,
            ring_bottom_mm: g.ring_bottom / MM,
            ring_top_mm: g.ring_top / MM,
            plunger_radius_mm: g.plunger_radius / MM,
            plunger_depth_mm: g.plunger_depth / MM,
            bottom,
            bottom_extension_mm: ext / MM,
            relative_permittivity: g.dielectric.relative_permittivity,
            loss_tangent: g.dielectric.loss_tangent,
        }
    }

    pub fn to_core(&self) -> Result<CavityGeometry, CliError> {
        let g = CavityGeometry {
            shield_radius: self.shield_radius_mm * MM,
            shield_height: self.shield_height_mm * MM,
            ring_inner_radius: self.ring_inner_radius_mm * MM,
            ring_outer_radius: self.ring_outer_radius_mm * MM,
            ring_bottom: self.ring_bottom_mm * MM,
            ring_top: self.ring_top_mm * MM,
            plunger_radius: self.plunger_radius_mm * MM,
            plunger_depth: self.plunger_depth_mm * MM,
            bottom: match self.bottom {
                BottomKind::Open => Bottom::Open {
                    extension: self.bottom_extension_mm * MM,
                },
                BottomKind::Closed => Bottom::Closed,
            },
            dielectric: Material {
                relative_permittivity: self.relative_permittivity,
                loss_tangent: self.loss_tangent,
            },
            ambient: Material::VACUUM,
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub resolution_mm: f64,
    pub mode_count: usize,
    pub window_low_ghz: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SweepOptions::default();
        SolverSection {
            resolution_mm: d.resolution / MM,
            mode_count: d.mode_count,
            window_low_ghz: d.solver.window_low / GHZ,
        }
    }
}

impl SolverSection {
    pub fn to_core(&self) -> Result<SweepOptions, CliError> {
        if !(self.resolution_mm > 0.0) || self.mode_count == 0 || !(self.window_low_ghz >= 0.0) {
            return Err(CliError::Config(
                "solver: need resolution_mm > 0, mode_count >= 1, window_low_ghz >= 0".into(),
            ));
        }
        Ok(SweepOptions {
            resolution: self.resolution_mm * MM,
            mode_count: self.mode_count,
            solver: SolverOptions {
                window_low: self.window_low_ghz * GHZ,
                ..SolverOptions::default()
            },
        })
    }
}

/// Parse a power given as `"<x>dBm"` or `"<x>W"` into watts.
pub fn parse_power(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let bad = || CliError::Config(format!("cannot parse power {s:?}; expected \"<x>dBm\" or \"<x>W\""));
    let watts = if let Some(v) = t.strip_suffix("dBm") {
        let dbm: f64 = v.trim().parse().map_err(|_| bad())?;
        1e-3 * 10f64.powf(dbm / 10.0)
    } else if let Some(v) = t.strip_suffix('W') {
        v.trim().parse().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    if !watts.is_finite() || watts < 0.0 {
        return Err(bad());
    }
    Ok(watts)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvSection {
    pub axis: [f64; 3],
    pub d_splitting_ghz: f64,
    pub strain_e_mhz: f64,
    pub hyperfine_a_mhz: f64,
    pub linewidth_mhz: f64,
    pub contrast_ceiling: f64,
    pub p_sat: String,
}

impl Default for NvSection {
    fn default() -> Self {
        let nv = NVCenter::default();
        NvSection {
            axis: nv.axis.to_array(),
            d_splitting_ghz: nv.d_splitting / GHZ,
            strain_e_mhz: nv.strain_e / MHZ,
            hyperfine_a_mhz: nv.hyperfine_a / MHZ,
            linewidth_mhz: nv.linewidth_fwhm / MHZ,
            contrast_ceiling: nv.contrast_ceiling,
            p_sat: "5dBm".into(),
        }
    }
}

impl NvSection {
    pub fn to_core(&self) -> Result<NVCenter, CliError> {
        let [x, y, z] = self.axis;
        let axis = Vec3::new(x, y, z)
            .normalized()
            .ok_or_else(|| CliError::Config("nv.axis must be nonzero".into()))?;
        let nv = NVCenter {
            axis,
            d_splitting: self.d_splitting_ghz * GHZ,
            strain_e: self.strain_e_mhz * MHZ,
            hyperfine_a: self.hyperfine_a_mhz * MHZ,
            linewidth_fwhm: self.linewidth_mhz * MHZ,
            contrast_ceiling: self.contrast_ceiling,
            p_sat: parse_power(&self.p_sat)?,
        };
        nv.validate()?;
        Ok(nv)
    }
}

/// Microwave drive: an absolute power or a saturation parameter at the
/// strongest point of the run (mode fields are normalized, so the latter is
/// usually the meaningful choice).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    Power(f64),
    Saturation(f64),
}

fn drive_of(power: &Option<String>, saturation: Option<f64>, section: &str) -> Result<Drive, CliError> {
    match (power, saturation) {
        (Some(p), None) => Ok(Drive::Power(parse_power(p)?)),
        (None, Some(s)) if s >= 0.0 && s.is_finite() => Ok(Drive::Saturation(s)),
        (None, Some(_)) => Err(CliError::Config(format!("{section}.saturation must be finite and >= 0"))),
        (None, None) => Err(CliError::Config(format!("{section}: set one of drive or saturation"))),
        (Some(_), Some(_)) => Err(CliError::Config(format!("{section}: drive and saturation are exclusive"))),
    }
}

fn mode_index(m: [usize; 2], section: &str) -> Result<ModeIndex, CliError> {
    if m[0] == 0 || m[1] == 0 {
        return Err(CliError::Config(format!("{section}.mode indices start at 1")));
    }
    Ok((m[0], m[1]))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    #[serde(default = "default_mode")]
    pub mode: [usize; 2],
    #[serde(default)]
    pub depth_start_mm: f64,
    /// Defaults to the deepest admissible insertion.
    pub depth_stop_mm: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Optional resonance target; the plunger depth reaching it is reported.
    pub target_ghz: Option<f64>,
}

fn default_mode() -> [usize; 2] {
    [1, 3]
}

fn default_steps() -> usize {
    15
}

impl TuneSection {
    pub fn mode(&self) -> Result<ModeIndex, CliError> {
        mode_index(self.mode, "tune")
    }

    pub fn depths(&self, geometry: &CavityGeometry) -> Result<Vec<f64>, CliError> {
        let start = self.depth_start_mm * MM;
        let stop = self.depth_stop_mm.map_or(geometry.max_plunger_depth(), |d| d * MM);
        if self.steps < 2 || !(stop > start) || start < 0.0 {
            return Err(CliError::Config(
                "tune: need steps >= 2 and 0 <= depth_start_mm < depth_stop_mm".into(),
            ));
        }
        Ok((0..self.steps)
            .map(|k| start + (stop - start) * k as f64 / (self.steps - 1) as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldmapSection {
    #[serde(default = "default_mode")]
    pub mode: [usize; 2],
    #[serde(default = "default_offsets")]
    pub offsets_mm: Vec<f64>,
    /// Half-width of an optional Cartesian `x–y` grid (mm).
    pub grid_extent_mm: Option<f64>,
    #[serde(default = "default_grid_step")]
    pub grid_step_mm: f64,
}

fn default_offsets() -> Vec<f64> {
    vec![1.0]
}

fn default_grid_step() -> f64 {
    0.5
}

impl FieldmapSection {
    pub fn mode(&self) -> Result<ModeIndex, CliError> {
        mode_index(self.mode, "fieldmap")
    }

    pub fn offsets(&self) -> Result<Vec<f64>, CliError> {
        if self.offsets_mm.is_empty() || self.offsets_mm.iter().any(|o| !(*o >= 0.0)) {
            return Err(CliError::Config("fieldmap.offsets_mm must be a non-empty list of values >= 0".into()));
        }
        Ok(self.offsets_mm.iter().map(|o| o * MM).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdmrSection {
    /// Spectrum file (`frequency_ghz,fluorescence`) to fit instead of
    /// synthesizing one; relative paths resolve against the config file.
    pub input: Option<String>,
    #[serde(default = "default_mode")]
    pub mode: [usize; 2],
    /// `[x, y, offset below the cavity]` in mm.
    #[serde(default = "default_position")]
    pub position_mm: [f64; 3],
    pub drive: Option<String>,
    pub saturation: Option<f64>,
    #[serde(default = "default_start")]
    pub start_ghz: f64,
    #[serde(default = "default_stop")]
    pub stop_ghz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Lines in the fit model; defaults to the NV's resonance line count.
    pub lines: Option<usize>,
}

fn default_position() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_start() -> f64 {
    2.82
}

fn default_stop() -> f64 {
    2.92
}

fn default_points() -> usize {
    401
}

impl OdmrSection {
    pub fn mode(&self) -> Result<ModeIndex, CliError> {
        mode_index(self.mode, "odmr")
    }

    pub fn drive(&self) -> Result<Drive, CliError> {
        drive_of(&self.drive, self.saturation, "odmr")
    }

    pub fn position(&self) -> [f64; 3] {
        self.position_mm.map(|v| v * MM)
    }

    pub fn frequencies(&self) -> Result<Vec<f64>, CliError> {
        if self.points < 2 || !(self.stop_ghz > self.start_ghz) || !(self.noise_sigma >= 0.0) {
            return Err(CliError::Config(
                "odmr: need points >= 2, stop_ghz > start_ghz and noise_sigma >= 0".into(),
            ));
        }
        Ok(nvcav_core::nvodmr::frequency_grid(
            self.start_ghz * GHZ,
            self.stop_ghz * GHZ,
            self.points,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "default_mode")]
    pub mode: [usize; 2],
    pub axis: AxisName,
    pub start_mm: f64,
    pub stop_mm: f64,
    pub step_mm: f64,
    /// Fixed coordinates `[x, y, offset]` in mm; the scanned one is replaced.
    #[serde(default = "default_position")]
    pub base_mm: [f64; 3],
    pub drive: Option<String>,
    pub saturation: Option<f64>,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

impl ScanSection {
    pub fn mode(&self) -> Result<ModeIndex, CliError> {
        mode_index(self.mode, "scan")
    }

    pub fn drive(&self) -> Result<Drive, CliError> {
        drive_of(&self.drive, self.saturation, "scan")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    ClosedForm,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertSection {
    #[serde(default = "default_method")]
    pub method: InversionMethod,
    pub measurement: Option<MeasurementSection>,
    pub simulate: Option<SimulateSection>,
}

fn default_method() -> InversionMethod {
    InversionMethod::LeastSquares
}

/// Measured three-point contrasts; azimuths in degrees.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub c_center: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub rho: f64,
    #[serde(default)]
    pub phi_a_deg: f64,
    #[serde(default = "default_phi_b")]
    pub phi_b_deg: f64,
    #[serde(default = "default_true")]
    pub linear_regime: bool,
    /// Additional circumference points `[phi_deg, contrast]`.
    #[serde(default)]
    pub extra: Vec<[f64; 2]>,
}

fn default_phi_b() -> f64 {
    90.0
}

/// Simulated protocol on the solved mode.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_mode")]
    pub mode: [usize; 2],
    #[serde(default = "default_offset")]
    pub offset_mm: f64,
    pub drive: Option<String>,
    pub saturation: Option<f64>,
    #[serde(default)]
    pub phi_a_deg: f64,
    #[serde(default = "default_phi_b")]
    pub phi_b_deg: f64,
    #[serde(default = "default_points")]
    pub spectrum_points: usize,
    #[serde(default = "default_half_span")]
    pub half_span_linewidths: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_offset() -> f64 {
    1.0
}

fn default_half_span() -> f64 {
    10.0
}

impl SimulateSection {
    pub fn mode(&self) -> Result<ModeIndex, CliError> {
        mode_index(self.mode, "invert.simulate")
    }

    pub fn drive(&self) -> Result<Drive, CliError> {
        drive_of(&self.drive, self.saturation, "invert.simulate")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    RelativePermittivity,
    RingOuterRadius,
    RingTop,
}

impl From<ParamName> for CalibrationParam {
    fn from(p: ParamName) -> Self {
        match p {
            ParamName::RelativePermittivity => CalibrationParam::RelativePermittivity,
            ParamName::RingOuterRadius => CalibrationParam::RingOuterRadius,
            ParamName::RingTop => CalibrationParam::RingTop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub mode: [usize; 2],
    pub frequency_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub targets: Vec<TargetEntry>,
    pub free: Vec<ParamName>,
    #[serde(default = "default_cal_resolution")]
    pub resolution_mm: f64,
    #[serde(default = "default_cal_modes")]
    pub mode_count: usize,
    #[serde(default = "default_sweep_limit")]
    pub sweep_limit: usize,
    #[serde(default = "default_improvement")]
    pub improvement_tolerance: f64,
}

fn default_cal_resolution() -> f64 {
    CalibrationOptions::default().sweep.resolution / MM
}

fn default_cal_modes() -> usize {
    CalibrationOptions::default().sweep.mode_count
}

fn default_sweep_limit() -> usize {
    CalibrationOptions::default().sweep_limit
}

fn default_improvement() -> f64 {
    CalibrationOptions::default().improvement_tolerance
}

impl CalibrateSection {
    pub fn targets(&self) -> Result<Vec<CalibrationTarget>, CliError> {
        self.targets
            .iter()
            .map(|t| {
                if !(t.frequency_ghz > 0.0) {
                    return Err(CliError::Config("calibrate: target frequency must be > 0".into()));
                }
                Ok(CalibrationTarget {
                    mode: mode_index(t.mode, "calibrate.targets")?,
                    frequency: t.frequency_ghz * GHZ,
                })
            })
            .collect()
    }

    pub fn free(&self) -> Vec<CalibrationParam> {
        self.free.iter().map(|&p| p.into()).collect()
    }

    pub fn options(&self, solver: &SweepOptions) -> Result<CalibrationOptions, CliError> {
        if !(self.resolution_mm > 0.0) || self.mode_count == 0 || self.sweep_limit == 0 {
            return Err(CliError::Config(
                "calibrate: need resolution_mm > 0, mode_count >= 1, sweep_limit >= 1".into(),
            ));
        }
        Ok(CalibrationOptions {
            sweep: SweepOptions {
                resolution: self.resolution_mm * MM,
                mode_count: self.mode_count,
                solver: solver.solver,
            },
            sweep_limit: self.sweep_limit,
            improvement_tolerance: self.improvement_tolerance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; `--out` takes precedence.
    pub dir: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_units() {
        assert!((parse_power("0dBm").unwrap() - 1e-3).abs() < 1e-18);
        assert!((parse_power("30 dBm").unwrap() - 1.0).abs() < 1e-12);
        assert!((parse_power("-10dBm").unwrap() - 1e-4).abs() < 1e-18);
        assert_eq!(parse_power("0.25W").unwrap(), 0.25);
        assert_eq!(parse_power(" 2 W ").unwrap(), 2.0);
        for bad in ["", "1", "1mW", "dBm", "-1W", "xW", "NaNW"] {
            assert!(parse_power(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        assert!(RunConfig::parse("[geometry]\nshield_radius_mm = 16\n").is_ok());
        assert!(RunConfig::parse("[geometry]\nshield_radius = 16\n").is_err());
        assert!(RunConfig::parse("[bogus]\nx = 1\n").is_err());
        assert!(RunConfig::parse("top_level = 1\n").is_err());
        assert!(RunConfig::parse("[invert.measurement]\nc_center=0\nc_a=0\nc_b=0\nrho=1\nphi=0\n").is_err());
    }

    #[test]
    fn geometry_defaults_round_trip() {
        let g = RunConfig::parse("[geometry]\n").unwrap().geometry().unwrap();
        let d = default_geometry();
        assert!((g.shield_radius - d.shield_radius).abs() < 1e-15);
        assert!((g.ring_top - d.ring_top).abs() < 1e-15);
        assert_eq!(g.bottom, d.bottom);
        assert_eq!(g.dielectric, d.dielectric);
    }

    #[test]
    fn missing_section_is_config_error() {
        let cfg = RunConfig::parse("").unwrap();
        assert!(matches!(cfg.geometry(), Err(CliError::Config(_))));
        assert!(matches!(cfg.nv(), Err(CliError::Config(_))));
        assert!(cfg.sweep().is_ok());
    }

    #[test]
    fn drive_is_exclusive() {
        let base = "axis = \"x\"\nstart_mm = 0\nstop_mm = 1\nstep_mm = 0.5\n";
        let both: RunConfig = RunConfig::parse(&format!("[scan]\n{base}drive = \"0dBm\"\nsaturation = 0.1\n")).unwrap();
        assert!(both.scan.unwrap().drive().is_err());
        let none = RunConfig::parse(&format!("[scan]\n{base}")).unwrap();
        assert!(none.scan.unwrap().drive().is_err());
        let sat = RunConfig::parse(&format!("[scan]\n{base}saturation = 0.1\n")).unwrap();
        assert_eq!(sat.scan.unwrap().drive().unwrap(), Drive::Saturation(0.1));
    }

    #[test]
    fn nv_section_converts_units() {
        let cfg = RunConfig::parse("[nv]\naxis = [0, 0, 2]\nlinewidth_mhz = 5\np_sat = \"1W\"\n").unwrap();
        let nv = cfg.nv().unwrap();
        assert_eq!(nv.axis, Vec3::Z);
        assert_eq!(nv.linewidth_fwhm, 5e6);
        assert_eq!(nv.p_sat, 1.0);
        let bad = RunConfig::parse("[nv]\ncontrast_ceiling = 1.5\n").unwrap();
        assert!(matches!(bad.nv(), Err(CliError::Core(_))));
    }
}
