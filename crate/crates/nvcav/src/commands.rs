//! Subcommand bodies. Each one reads its sections from the [`RunConfig`],
//! runs the core routines and renders its artifacts into an [`Outputs`] set;
//! nothing touches the filesystem until the caller commits that set.

use std::path::{Path, PathBuf};

use nvcav_core::axisinversion::{
    end_to_end_axis_recovery, invert_axis_closed_form, invert_axis_least_squares,
    AxisCandidateSet, ProtocolOptions, ThreePointMeasurement,
};
use nvcav_core::fieldmap::{field_at, field_ratio, node_radii, sample_plane};
use nvcav_core::modesolver::{
    calibrate_geometry, find_plunger_for_frequency, select_mode, solve_te0_modes_with, tuning_from_sets,
    ModeIndex, ModeSolution, SweepOptions,
};
use nvcav_core::geometry::CavityGeometry;
use nvcav_core::nvodmr::{
    contrast_scan, drive_for_saturation, fit_odmr, line_path, local_power, lorentzian, resonance_lines,
    synthesize_spectrum, NVCenter, ODMRSpectrum, ScanAxis,
};
use nvcav_core::vec3::Vec3;
use nvcav_core::Error;
use rayon::prelude::*;

use crate::config::{
    require, AxisName, Drive, GeometrySection, InversionMethod, MeasurementSection, RunConfig, SimulateSection,
};
use crate::error::CliError;
use crate::output::{csv_table, num, read_spectrum, Outputs};

const MM: f64 = 1e-3;
const GHZ: f64 = 1e9;

/// Invocation context shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Context {
    /// `--seed`; overrides seeds in the config when present.
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps (`--jobs`); `None` = all cores.
    pub jobs: Option<usize>,
    /// Directory against which relative input paths resolve.
    pub config_dir: PathBuf,
}

#[derive(Debug, Default)]
pub struct Report {
    pub outputs: Outputs,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

fn solve(geometry: &CavityGeometry, sweep: &SweepOptions) -> Result<Vec<ModeSolution>, CliError> {
    Ok(solve_te0_modes_with(geometry, sweep.resolution, sweep.mode_count, &sweep.solver)?)
}

fn solve_selected(cfg: &RunConfig, selector: ModeIndex) -> Result<ModeSolution, CliError> {
    let modes = solve(&cfg.geometry()?, &cfg.sweep()?)?;
    Ok(select_mode(&modes, selector)?.clone())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be >= 1".into()));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn modes(cfg: &RunConfig) -> Result<Report, CliError> {
    let modes = solve(&cfg.geometry()?, &cfg.sweep()?)?;
    let mut report = Report::default();
    let rows = modes.iter().enumerate().map(|(k, m)| {
        vec![
            (k + 1).to_string(),
            m.n_radial.to_string(),
            m.p_axial.to_string(),
            num(m.frequency / GHZ),
        ]
    });
    report
        .outputs
        .add("modes.csv", csv_table(&["index", "n", "p", "frequency_ghz"], rows)?);
    for (k, m) in modes.iter().enumerate() {
        let g = &m.grid;
        let rows = (0..g.nz).flat_map(|j| {
            (0..g.nr).map(move |i| {
                let idx = g.index(i, j);
                vec![
                    num(g.r_of(i) / MM),
                    num(g.z_of(j) / MM),
                    num(m.e_theta[idx]),
                    num(m.h_r[idx]),
                    num(m.h_z[idx]),
                ]
            })
        });
        report.outputs.add(
            format!("mode_{}.csv", k + 1),
            csv_table(&["r_mm", "z_mm", "e_theta", "h_r", "h_z"], rows)?,
        );
        report.summary.push(format!(
            "TE0{}{}  {:.6} GHz",
            m.n_radial,
            m.p_axial,
            m.frequency / GHZ
        ));
    }
    Ok(report)
}

pub fn tune(cfg: &RunConfig, ctx: &Context) -> Result<Report, CliError> {
    let sec = require(&cfg.tune, "tune")?;
    let geometry = cfg.geometry()?;
    let sweep = cfg.sweep()?;
    let selector = sec.mode()?;
    let depths = sec.depths(&geometry)?;
    if depths.last().is_some_and(|&d| d > geometry.max_plunger_depth() * (1.0 + 1e-12)) {
        return Err(CliError::Config(format!(
            "tune: depth_stop_mm exceeds the deepest insertion {} mm",
            geometry.max_plunger_depth() / MM
        )));
    }
    let (sets, plunger) = with_pool(ctx.jobs, || {
        let sets = depths
            .par_iter()
            .map(|&d| solve(&geometry.with_plunger_depth(d), &sweep))
            .collect::<Result<Vec<_>, _>>();
        let plunger = sec
            .target_ghz
            .map(|t| find_plunger_for_frequency(&geometry, t * GHZ, selector, &sweep));
        (sets, plunger)
    })?;
    let curve = tuning_from_sets(&depths, &sets?, selector)?;
    let mut report = Report::default();
    let rows = curve.iter().map(|(d, f)| vec![num(d / MM), num(f / GHZ)]);
    report
        .outputs
        .add("tuning.csv", csv_table(&["depth_mm", "frequency_ghz"], rows)?);
    report.summary.push(format!(
        "TE0{}{}: {:.6} GHz at {} mm -> {:.6} GHz at {} mm",
        selector.0,
        selector.1,
        curve[0].1 / GHZ,
        curve[0].0 / MM,
        curve[curve.len() - 1].1 / GHZ,
        curve[curve.len() - 1].0 / MM
    ));
    if let (Some(target), Some(depth)) = (sec.target_ghz, plunger) {
        let depth = depth?;
        report.outputs.add(
            "plunger.csv",
            csv_table(&["target_ghz", "depth_mm"], [vec![num(target), num(depth / MM)]])?,
        );
        report.summary.push(format!("{target} GHz reached at plunger depth {:.4} mm", depth / MM));
    }
    Ok(report)
}

fn offset_label(offset_mm: f64) -> String {
    num(offset_mm).replace('.', "p")
}

pub fn fieldmap(cfg: &RunConfig) -> Result<Report, CliError> {
    let sec = require(&cfg.fieldmap, "fieldmap")?;
    let offsets = sec.offsets()?;
    let mode = solve_selected(cfg, sec.mode()?)?;
    let mut report = Report::default();
    let radii = node_radii(&mode);
    for (&offset, &offset_mm) in offsets.iter().zip(&sec.offsets_mm) {
        let plane = sample_plane(&mode, offset, &radii)?;
        let rows = (0..plane.radii.len()).map(|k| {
            vec![
                num(plane.radii[k] / MM),
                num(plane.h_r[k]),
                num(plane.h_z[k]),
                num(plane.normalized_h_r[k]),
                num(plane.normalized_h_z[k]),
            ]
        });
        report.outputs.add(
            format!("plane_{}mm.csv", offset_label(offset_mm)),
            csv_table(&["r_mm", "h_r", "h_z", "norm_h_r", "norm_h_z"], rows)?,
        );
        let ratio = field_ratio(&mode, offset)?;
        report.summary.push(format!(
            "offset {offset_mm} mm: |h_r| peaks at r = {} mm, rho = {:.6}",
            ratio.peak_radius / MM,
            ratio.rho
        ));
        if let Some(extent) = sec.grid_extent_mm {
            if !(extent > 0.0) || !(sec.grid_step_mm > 0.0) {
                return Err(CliError::Config("fieldmap: need grid_extent_mm > 0 and grid_step_mm > 0".into()));
            }
            let n = (2.0 * extent / sec.grid_step_mm + 1e-9).floor() as usize + 1;
            let coords: Vec<f64> = (0..n).map(|k| -extent + k as f64 * sec.grid_step_mm).collect();
            let mut rows = Vec::with_capacity(n * n);
            for &y in &coords {
                for &x in &coords {
                    let h = field_at(&mode, x * MM, y * MM, offset)?;
                    rows.push(vec![num(x), num(y), num(-offset_mm), num(h.x), num(h.y), num(h.z)]);
                }
            }
            report.outputs.add(
                format!("grid_{}mm.csv", offset_label(offset_mm)),
                csv_table(&["x_mm", "y_mm", "z_mm", "hx", "hy", "hz"], rows)?,
            );
        }
    }
    Ok(report)
}

/// Drive power from the configured drive; a saturation parameter refers to
/// the most strongly coupled of `fields`.
fn resolve_drive(drive: Drive, nv: &NVCenter, fields: &[Vec3]) -> Result<f64, CliError> {
    match drive {
        Drive::Power(p) => Ok(p),
        Drive::Saturation(s) => {
            let strongest = fields
                .iter()
                .copied()
                .max_by(|a, b| local_power(nv, *a, 1.0).total_cmp(&local_power(nv, *b, 1.0)))
                .ok_or_else(|| CliError::Config("no field points".into()))?;
            Ok(drive_for_saturation(nv, strongest, s)?)
        }
    }
}

fn spectrum_rows<'a>(f: &'a [f64], y: &'a [f64]) -> impl Iterator<Item = Vec<String>> + 'a {
    f.iter().zip(y).map(|(f, y)| vec![num(f / GHZ), num(*y)])
}

pub fn odmr(cfg: &RunConfig, ctx: &Context) -> Result<Report, CliError> {
    let sec = require(&cfg.odmr, "odmr")?;
    let mut report = Report::default();
    let (spectrum, lines) = match &sec.input {
        Some(input) => {
            let path = ctx.config_dir.join(input);
            let (f, y) = read_spectrum(&path)?;
            let spectrum = ODMRSpectrum::measured(f, y)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (spectrum, sec.lines.unwrap_or(1))
        }
        None => {
            let nv = cfg.nv()?;
            let frequencies = sec.frequencies()?;
            let mode = solve_selected(cfg, sec.mode()?)?;
            let [x, y, z] = sec.position();
            let field = field_at(&mode, x, y, z)?;
            let drive = resolve_drive(sec.drive()?, &nv, &[field])?;
            let seed = ctx.seed.unwrap_or(sec.seed);
            let spectrum = synthesize_spectrum(&nv, field, drive, &frequencies, sec.noise_sigma, seed)?;
            report.outputs.add(
                "spectrum.csv",
                csv_table(
                    &["frequency_ghz", "fluorescence"],
                    spectrum_rows(&spectrum.frequencies, &spectrum.fluorescence),
                )?,
            );
            report.summary.push(format!(
                "synthesized {} points, drive {drive:e} W, s = {:.4e}",
                frequencies.len(),
                local_power(&nv, field, drive) / nv.p_sat
            ));
            (spectrum, sec.lines.unwrap_or(resonance_lines(&nv).len()))
        }
    };
    let fit = fit_odmr(&spectrum, lines)?;
    let model: Vec<f64> = spectrum
        .frequencies
        .iter()
        .map(|&f| {
            let dip: f64 = fit.centers.iter().map(|&c| lorentzian(f, c, fit.fwhm)).sum::<f64>() / lines as f64;
            fit.baseline - fit.contrast * dip
        })
        .collect();
    report.outputs.add(
        "fit.csv",
        csv_table(
            &["frequency_ghz", "fluorescence"],
            spectrum_rows(&spectrum.frequencies, &model),
        )?,
    );
    let mut params = vec![
        vec!["contrast".into(), num(fit.contrast)],
        vec!["contrast_stderr".into(), num(fit.contrast_stderr)],
        vec!["significant".into(), fit.significant.to_string()],
        vec!["fwhm_mhz".into(), num(fit.fwhm / 1e6)],
        vec!["baseline".into(), num(fit.baseline)],
        vec!["rms_residual".into(), num(fit.rms_residual)],
    ];
    for (k, c) in fit.centers.iter().enumerate() {
        params.push(vec![format!("center_{}_ghz", k + 1), num(c / GHZ)]);
    }
    report
        .outputs
        .add("fit_params.csv", csv_table(&["parameter", "value"], params)?);
    report.summary.push(format!(
        "fit: contrast {:.5} +/- {:.2e}{}, fwhm {:.3} MHz",
        fit.contrast,
        fit.contrast_stderr,
        if fit.significant { "" } else { " (not significant)" },
        fit.fwhm / 1e6
    ));
    Ok(report)
}

pub fn scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let sec = require(&cfg.scan, "scan")?;
    let nv = cfg.nv()?;
    let axis = match sec.axis {
        AxisName::X => ScanAxis::X,
        AxisName::Y => ScanAxis::Y,
        AxisName::Z => ScanAxis::Z,
    };
    let path = line_path(
        axis,
        sec.start_mm * MM,
        sec.stop_mm * MM,
        sec.step_mm * MM,
        sec.base_mm.map(|v| v * MM),
    )?;
    let drive_cfg = sec.drive()?;
    let mode = solve_selected(cfg, sec.mode()?)?;
    let fields = path
        .iter()
        .map(|p| field_at(&mode, p[0], p[1], p[2]))
        .collect::<Result<Vec<_>, Error>>()?;
    let drive = resolve_drive(drive_cfg, &nv, &fields)?;
    let result = contrast_scan(&mode, &nv, axis, &path, drive, sec.normalize)?;
    let rows = result
        .positions
        .iter()
        .zip(&result.contrasts)
        .map(|(p, c)| vec![num(p / MM), num(*c)]);
    let mut report = Report::default();
    report
        .outputs
        .add("scan.csv", csv_table(&["position_mm", "contrast"], rows)?);
    let (k, c) = result
        .contrasts
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |(kb, cb), (k, c)| if *c > cb { (k, *c) } else { (kb, cb) });
    report.summary.push(format!(
        "{} points, maximum contrast {c:.6} at {} mm",
        result.positions.len(),
        result.positions[k] / MM
    ));
    Ok(report)
}

fn measurement_of(m: &MeasurementSection) -> ThreePointMeasurement {
    ThreePointMeasurement {
        c_center: m.c_center,
        c_a: m.c_a,
        c_b: m.c_b,
        phi_a: m.phi_a_deg.to_radians(),
        phi_b: m.phi_b_deg.to_radians(),
        rho: m.rho,
        linear_regime: m.linear_regime,
    }
}

/// Candidate table; every candidate carries the set's residual, which covers
/// all fitted points (including extra azimuths).
fn candidates_csv(set: &AxisCandidateSet) -> Result<Vec<u8>, CliError> {
    let rows = set
        .candidates
        .iter()
        .map(|c| vec![num(c.x), num(c.y), num(c.z), num(set.residual)]);
    let mut bytes = format!("# {}\n", set.gauge_note.replace('\n', " ")).into_bytes();
    bytes.extend(csv_table(&["nx", "ny", "nz", "residual"], rows)?);
    Ok(bytes)
}

fn simulate(cfg: &RunConfig, sim: &SimulateSection, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let nv = cfg.nv()?;
    let mode = solve_selected(cfg, sim.mode()?)?;
    let offset = sim.offset_mm * MM;
    let opts = ProtocolOptions {
        phi_a: sim.phi_a_deg.to_radians(),
        phi_b: sim.phi_b_deg.to_radians(),
        spectrum_points: sim.spectrum_points,
        half_span_linewidths: sim.half_span_linewidths,
        noise_sigma: sim.noise_sigma,
        seed: ctx.seed.unwrap_or(sim.seed),
    };
    let r = field_ratio(&mode, offset)?.peak_radius;
    let fields = [(0.0, 0.0), (r, opts.phi_a), (r, opts.phi_b)]
        .iter()
        .map(|&(r, phi)| field_at(&mode, r * phi.cos(), r * phi.sin(), offset))
        .collect::<Result<Vec<_>, Error>>()?;
    let drive = resolve_drive(sim.drive()?, &nv, &fields)?;
    let rec = end_to_end_axis_recovery(&mode, &nv, offset, drive, &opts)?;
    report
        .outputs
        .add("candidates.csv", candidates_csv(&rec.recovered)?);
    let m = rec.measurement;
    report.outputs.add(
        "measurement.csv",
        csv_table(
            &["c_center", "c_a", "c_b", "rho", "peak_radius_mm"],
            [vec![num(m.c_center), num(m.c_a), num(m.c_b), num(m.rho), num(rec.peak_radius / MM)]],
        )?,
    );
    report.summary.push(format!(
        "true axis ({:.4}, {:.4}, {:.4}); {} candidates; nearest director error {:.3} deg",
        rec.true_axis.x,
        rec.true_axis.y,
        rec.true_axis.z,
        rec.recovered.candidates.len(),
        rec.nearest_error.to_degrees()
    ));
    Ok(())
}

pub fn invert_axis(cfg: &RunConfig, ctx: &Context) -> Result<Report, CliError> {
    let sec = require(&cfg.invert, "invert")?;
    let mut report = Report::default();
    match (&sec.measurement, &sec.simulate) {
        (Some(ms), None) => {
            let m = measurement_of(ms);
            let extra: Vec<(f64, f64)> = ms.extra.iter().map(|[phi, c]| (phi.to_radians(), *c)).collect();
            let set = match sec.method {
                InversionMethod::ClosedForm if !extra.is_empty() => {
                    return Err(CliError::Config(
                        "invert: extra points require method = \"least_squares\"".into(),
                    ))
                }
                InversionMethod::ClosedForm => invert_axis_closed_form(&m)?,
                InversionMethod::LeastSquares => invert_axis_least_squares(&m, &extra)?,
            };
            report.outputs.add("candidates.csv", candidates_csv(&set)?);
            report.summary.push(format!(
                "{} candidates, kappa {:.6e}, residual {:.3e}",
                set.candidates.len(),
                set.kappa,
                set.residual
            ));
        }
        (None, Some(sim)) => simulate(cfg, sim, ctx, &mut report)?,
        _ => {
            return Err(CliError::Config(
                "invert: give exactly one of [invert.measurement] or [invert.simulate]".into(),
            ))
        }
    }
    Ok(report)
}

pub fn calibrate(cfg: &RunConfig) -> Result<Report, CliError> {
    let sec = require(&cfg.calibrate, "calibrate")?;
    let base = cfg.geometry()?;
    let targets = sec.targets()?;
    let opts = sec.options(&cfg.sweep()?)?;
    let cal = calibrate_geometry(&base, &targets, &sec.free(), &opts)?;
    let rows = targets.iter().enumerate().map(|(k, t)| {
        vec![
            t.mode.0.to_string(),
            t.mode.1.to_string(),
            num(t.frequency / GHZ),
            num(cal.frequencies[k] / GHZ),
            num(cal.residuals[k]),
        ]
    });
    let mut report = Report::default();
    report.outputs.add(
        "calibration.csv",
        csv_table(&["n", "p", "target_ghz", "simulated_ghz", "residual"], rows)?,
    );
    #[derive(serde::Serialize)]
    struct Calibrated {
        geometry: GeometrySection,
    }
    let text = toml::to_string(&Calibrated {
        geometry: GeometrySection::from_core(&cal.geometry),
    })
    .map_err(|e| CliError::Io(e.to_string()))?;
    report.outputs.add("calibrated_geometry.toml", text.into_bytes());
    report.summary.push(format!(
        "cost {:.3e} after {} sweeps; residuals {:?}",
        cal.cost, cal.sweeps, cal.residuals
    ));
    Ok(report)
}

/// Output directory: `--out`, else `[output] dir`, else the working directory.
pub fn output_dir(cli_out: Option<&Path>, cfg: &RunConfig, ctx: &Context) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    match cfg.output.as_ref().and_then(|o| o.dir.as_ref()) {
        Some(d) => ctx.config_dir.join(d),
        None => PathBuf::from("."),
    }
}
