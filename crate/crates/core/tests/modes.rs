use nvcav_core::geometry::{default_geometry, hollow_cylinder, rasterize, Bottom};
use nvcav_core::modesolver::{
    analytic_te0np, assemble_eigenproblem, mode_overlap, select_mode, solve_te0_modes, track_mode, ModeSolution,
};
use nvcav_core::Error;

fn weighted_dot(a: &ModeSolution, b: &ModeSolution) -> f64 {
    let g = &a.grid;
    let mut s = 0.0;
    for j in 0..g.nz {
        for i in 0..g.nr {
            let k = g.index(i, j);
            s += g.permittivity_at(i, j) * g.r_of(i) * a.e_theta[k] * b.e_theta[k] * g.dr * g.dz;
        }
    }
    s
}

#[test]
fn distinct_modes_are_eps_r_orthogonal() {
    let modes = solve_te0_modes(&default_geometry().with_plunger_depth(2.5e-3), 0.5e-3, 5).unwrap();
    for a in 0..modes.len() {
        let norm = weighted_dot(&modes[a], &modes[a]);
        for b in 0..a {
            assert!(weighted_dot(&modes[a], &modes[b]).abs() < 1e-8 * norm, "{a} {b}");
        }
    }
}

#[test]
fn second_order_convergence_on_hollow_cylinder() {
    let (r, l) = (16e-3, 20e-3);
    for (n, p) in [(1, 1), (1, 2)] {
        let exact = analytic_te0np(r, l, n, p);
        let err = |h: f64| {
            let modes = solve_te0_modes(&hollow_cylinder(r, l), h, 3).unwrap();
            (select_mode(&modes, (n, p)).unwrap().frequency - exact).abs()
        };
        let (e1, e2, e3) = (err(1e-3), err(0.5e-3), err(0.25e-3));
        assert!((e1 / e2).log2() > 1.8 && (e2 / e3).log2() > 1.8, "{e1} {e2} {e3}");
    }
}

#[test]
fn bottom_extension_is_long_enough() {
    let base = default_geometry();
    let long = nvcav_core::geometry::CavityGeometry { bottom: Bottom::Open { extension: 20e-3 }, ..base };
    let f = |g| {
        let modes = solve_te0_modes(&g, 0.5e-3, 3).unwrap();
        select_mode(&modes, (1, 3)).unwrap().frequency
    };
    let (a, b) = (f(base), f(long));
    assert!((a - b).abs() / a < 1e-3, "{a} {b}");
}

#[test]
fn axis_fields_are_regular() {
    let modes = solve_te0_modes(&default_geometry(), 0.5e-3, 3).unwrap();
    for m in &modes {
        let g = &m.grid;
        for j in 0..g.nz {
            assert_eq!(m.e_theta[g.index(0, j)], 0.0);
            assert_eq!(m.h_r[g.index(0, j)], 0.0);
            // h_z is continuous onto the axis.
            let (a, b, c) = (m.h_z[g.index(0, j)], m.h_z[g.index(1, j)], m.h_z[g.index(2, j)]);
            let scale = m.h_z.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            assert!((a - b).abs() <= 2.0 * (b - c).abs() + 1e-6 * scale);
        }
    }
}

#[test]
fn dirichlet_rows_and_plunger_footprint() {
    let g = default_geometry().with_plunger_depth(4e-3);
    let grid = rasterize(&g, 0.5e-3).unwrap();
    let ep = assemble_eigenproblem(&grid);
    assert_eq!(ep.operator.n, grid.len());
    let metal = (0..grid.nz)
        .flat_map(|j| (0..grid.nr).map(move |i| (i, j)))
        .filter(|&(i, j)| grid.is_dirichlet(i, j))
        .count();
    let unit_rows = (0..grid.len())
        .filter(|&k| ep.operator.row(k).collect::<Vec<_>>() == vec![(k, 1.0)])
        .count();
    assert_eq!(metal, unit_rows);
}

#[test]
fn tracking_follows_overlap_and_reports_loss() {
    let g = default_geometry();
    let depths = [0.0, 0.5e-3, 1.0e-3];
    let sets: Vec<_> = depths
        .iter()
        .map(|&d| solve_te0_modes(&g.with_plunger_depth(d), 0.5e-3, 4).unwrap())
        .collect();
    let tracked = track_mode(&depths, &sets, (1, 3)).unwrap();
    for w in tracked.windows(2) {
        assert!(mode_overlap(&w[0], &w[1]) > 0.9);
        assert!(w[1].frequency >= w[0].frequency);
    }
    // A set without any similar mode breaks the track.
    let other = solve_te0_modes(&hollow_cylinder(16e-3, 20e-3), 0.5e-3, 1).unwrap();
    let bad = vec![sets[0].clone(), other];
    assert!(matches!(track_mode(&depths[..2], &bad, (1, 3)), Err(Error::ModeTrackingLost { .. })));
}
