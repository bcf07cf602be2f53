//! Config keys read by each subcommand, shown by `--help`.

pub const GEOMETRY_KEYS: &str = "\
[geometry]  (lengths in mm; omitted keys take the built-in defaults)
  shield_radius_mm, shield_height_mm, ring_inner_radius_mm,
  ring_outer_radius_mm, ring_bottom_mm, ring_top_mm, plunger_radius_mm,
  plunger_depth_mm, bottom (\"open\" | \"closed\"), bottom_extension_mm,
  relative_permittivity, loss_tangent
[solver]  (optional)
  resolution_mm = 0.25, mode_count = 6, window_low_ghz = 1.0";

pub const NV_KEYS: &str = "\
[nv]
  axis = [0, 0, 1], d_splitting_ghz = 2.87, strain_e_mhz = 0,
  hyperfine_a_mhz = 0, linewidth_mhz = 10, contrast_ceiling = 0.12,
  p_sat = \"5dBm\"  (powers as \"<x>dBm\" or \"<x>W\")";

pub const OUTPUT_KEYS: &str = "\
[output]  (optional)
  dir  (overridden by --out)";

pub fn modes() -> String {
    format!("Config keys:\n{GEOMETRY_KEYS}\n{OUTPUT_KEYS}\n\nWrites modes.csv (index,n,p,frequency_ghz) and mode_<k>.csv (r_mm,z_mm,e_theta,h_r,h_z).")
}

pub fn tune() -> String {
    format!(
        "Config keys:\n{GEOMETRY_KEYS}\n[tune]\n  mode = [1, 3], depth_start_mm = 0, depth_stop_mm (default: deepest),\n  steps = 15, target_ghz (optional)\n{OUTPUT_KEYS}\n\nWrites tuning.csv (depth_mm,frequency_ghz) and, with target_ghz, plunger.csv."
    )
}

pub fn fieldmap() -> String {
    format!(
        "Config keys:\n{GEOMETRY_KEYS}\n[fieldmap]\n  mode = [1, 3], offsets_mm = [1.0], grid_extent_mm (optional), grid_step_mm = 0.5\n{OUTPUT_KEYS}\n\nWrites plane_<offset>mm.csv (r_mm,h_r,h_z,norm_h_r,norm_h_z) and, with\ngrid_extent_mm, grid_<offset>mm.csv (x_mm,y_mm,z_mm,hx,hy,hz)."
    )
}

pub fn odmr() -> String {
    format!(
        "Config keys:\n{GEOMETRY_KEYS}\n{NV_KEYS}\n[odmr]\n  input (spectrum CSV to fit; skips synthesis), mode = [1, 3],\n  position_mm = [0, 0, 1], drive (\"<x>dBm\"/\"<x>W\") | saturation,\n  start_ghz = 2.82, stop_ghz = 2.92, points = 401, noise_sigma = 0, seed = 0,\n  lines (default: NV line count, 1 for imported spectra)\n{OUTPUT_KEYS}\n\nWrites spectrum.csv, fit.csv (frequency_ghz,fluorescence) and fit_params.csv."
    )
}

pub fn scan() -> String {
    format!(
        "Config keys:\n{GEOMETRY_KEYS}\n{NV_KEYS}\n[scan]\n  mode = [1, 3], axis (\"x\" | \"y\" | \"z\"), start_mm, stop_mm, step_mm,\n  base_mm = [0, 0, 1], drive | saturation, normalize = true\n{OUTPUT_KEYS}\n\nWrites scan.csv (position_mm,contrast)."
    )
}

pub fn invert() -> String {
    format!(
        "Config keys:\n[invert]\n  method = \"least_squares\" | \"closed_form\"  (measurement input only)\n[invert.measurement]\n  c_center, c_a, c_b, rho, phi_a_deg = 0, phi_b_deg = 90,\n  linear_regime = true, extra = [[phi_deg, contrast], ...]\n[invert.simulate]  (needs [geometry] and [nv])\n  mode = [1, 3], offset_mm = 1, drive | saturation, phi_a_deg = 0,\n  phi_b_deg = 90, spectrum_points = 401, half_span_linewidths = 10,\n  noise_sigma = 0, seed = 0\n{GEOMETRY_KEYS}\n{NV_KEYS}\n{OUTPUT_KEYS}\n\nWrites candidates.csv (nx,ny,nz,residual after a '#' gauge note) and, when\nsimulating, measurement.csv."
    )
}

pub fn calibrate() -> String {
    format!(
        "Config keys:\n{GEOMETRY_KEYS}\n[calibrate]\n  targets = [{{ mode = [1, 1], frequency_ghz = 2.2 }}, ...],\n  free = [\"relative_permittivity\" | \"ring_outer_radius\" | \"ring_top\", ...],\n  resolution_mm = 0.5, mode_count = 8, sweep_limit = 50,\n  improvement_tolerance = 1e-6\n{OUTPUT_KEYS}\n\nWrites calibration.csv (n,p,target_ghz,simulated_ghz,residual) and\ncalibrated_geometry.toml."
    )
}

pub const EXIT_CODES: &str = "\
Exit codes: 0 success, 1 output i/o failure, 2 configuration error,
3 numerical failure, 4 infeasible target or measurement.";
