use nvcav_core::axisinversion::{end_to_end_axis_recovery, ProtocolOptions};
use nvcav_core::fieldmap::{field_at, field_ratio};
use nvcav_core::geometry::default_geometry;
use nvcav_core::modesolver::{select_mode, solve_te0_modes, ModeSolution};
use nvcav_core::nvodmr::{contrast_scan, drive_for_saturation, line_path, rabi_coupling, NVCenter, ScanAxis};
use nvcav_core::vec3::Vec3;
use std::sync::OnceLock;

fn mode() -> &'static ModeSolution {
    static M: OnceLock<ModeSolution> = OnceLock::new();
    M.get_or_init(|| select_mode(&solve_te0_modes(&default_geometry(), 0.5e-3, 4).unwrap(), (1, 3)).unwrap().clone())
}

fn x_scan(axis: Vec3) -> Vec<f64> {
    let m = mode();
    let nv = NVCenter::with_axis(axis).unwrap();
    let path = line_path(ScanAxis::X, -12e-3, 12e-3, 1e-3, [0.0, 0.0, 1e-3]).unwrap();
    // Same drive for every axis: s ≤ 0.005 wherever |H| ≤ |H(7 mm)|.
    let h = field_at(m, 7e-3, 0.0, 1e-3).unwrap().norm();
    let drive = 0.005 * nv.p_sat / (h * h);
    contrast_scan(m, &nv, ScanAxis::X, &path, drive, true).unwrap().contrasts
}

#[test]
fn scan_is_even_for_axes_in_the_yz_plane() {
    for deg in [0.0f64, 20.0, 45.0, 70.0, 90.0] {
        let a = deg.to_radians();
        let c = x_scan(Vec3::new(0.0, a.sin(), a.cos()));
        let n = c.len();
        for k in 0..n {
            assert!((c[k] - c[n - 1 - k]).abs() < 1e-10, "{deg}");
        }
        assert_eq!(c.iter().cloned().fold(0.0, f64::max), 1.0);
    }
}

#[test]
fn xz_tilt_breaks_x_parity() {
    // |H_⊥|² contains 2 h_r h_z n_x n_z sign(x): an axis tilted toward the
    // scan direction makes the two sides differ.
    let a = 45f64.to_radians();
    let c = x_scan(Vec3::new(a.sin(), 0.0, a.cos()));
    let n = c.len();
    let asym = (0..n).map(|k| (c[k] - c[n - 1 - k]).abs()).fold(0.0, f64::max);
    assert!(asym > 0.05, "{asym}");
    // Mirroring the axis mirrors the scan.
    let d = x_scan(Vec3::new(-a.sin(), 0.0, a.cos()));
    for k in 0..n {
        assert!((c[k] - d[n - 1 - k]).abs() < 1e-10);
    }
}

#[test]
fn center_contrast_vanishes_only_for_axial_spin() {
    let m = mode();
    let h0 = field_at(m, 0.0, 0.0, 1e-3).unwrap();
    assert_eq!(rabi_coupling(h0, Vec3::Z), 0.0);
    for axis in [Vec3::X, Vec3::new(0.01, 0.0, 1.0), Vec3::new(1.0, -2.0, 0.5)] {
        assert!(rabi_coupling(h0, axis.normalized().unwrap()) > 0.0);
    }
}

#[test]
fn axial_spin_is_recovered_end_to_end() {
    let m = mode();
    let nv = NVCenter::default();
    let r = field_ratio(m, 1e-3).unwrap().peak_radius;
    let drive = drive_for_saturation(&nv, field_at(m, r, 0.0, 1e-3).unwrap(), 0.005).unwrap();
    let rec = end_to_end_axis_recovery(m, &nv, 1e-3, drive, &ProtocolOptions::default()).unwrap();
    assert!(rec.recovered.candidates.iter().all(|c| c.z * c.z > 0.99));
    // Outside the linear regime the protocol refuses to run.
    assert!(end_to_end_axis_recovery(m, &nv, 1e-3, 100.0 * drive, &ProtocolOptions::default()).is_err());
}
