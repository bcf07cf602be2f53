use alloc::string::String;
use alloc::vec::Vec;

/// Errors reported by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("resolution too coarse: dielectric spans {cells_r:.2} x {cells_z:.2} cells, need at least 4 in each direction")]
    ResolutionTooCoarse { cells_r: f64, cells_z: f64 },
    #[error("eigen-solver did not converge: {converged} of {requested} modes after {iterations} Lanczos steps")]
    SolverNoConvergence {
        iterations: usize,
        converged: usize,
        requested: usize,
    },
    #[error("mode classification ambiguous: scan-line peak {line_peak:e} below 1e-3 of global max {global_max:e}")]
    ClassificationAmbiguous { line_peak: f64, global_max: f64 },
    #[error("mode tracking lost at plunger depth {depth:e} m (best overlap {overlap:.3})")]
    ModeTrackingLost { depth: f64, overlap: f64 },
    #[error("mode TE0,{n},{p} not found among the computed modes")]
    ModeNotFound { n: usize, p: usize },
    #[error("target frequency {target:e} Hz outside tuning range [{low:e}, {high:e}] Hz")]
    TargetOutOfRange { target: f64, low: f64, high: f64 },
    #[error("calibration did not converge after {sweeps} sweeps (relative residuals {residuals:?})")]
    CalibrationNoConvergence { sweeps: usize, residuals: Vec<f64> },
    #[error("offset outside the modeled domain: {0}")]
    OffsetOutsideDomain(String),
    #[error("degenerate field ratio: |h_r(r*)| = {value:e} below floor {floor:e}")]
    DegenerateRatio { value: f64, floor: f64 },
    #[error("fit did not converge: {0}")]
    FitNoConvergence(String),
    #[error("insufficient spectral span: {span:e} Hz < 3 x linewidth {fwhm:e} Hz")]
    InsufficientSpan { span: f64, fwhm: f64 },
    #[error("inconsistent measurement: {0}")]
    InconsistentMeasurement(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;
