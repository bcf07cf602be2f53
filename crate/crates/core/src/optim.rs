//! Small dense optimizers: Levenberg–Marquardt for the lineshape and
//! axis fits, bracketed golden-section search for calibration.

use alloc::vec;
use alloc::vec::Vec;

/// Stopping rules for [`levenberg_marquardt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative decrease of the cost falls below this.
    pub relative_cost_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            relative_cost_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// `½·Σ r²` at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Least-squares problem: residuals and their Jacobian.
pub trait LeastSquares {
    fn residual_count(&self) -> usize;
    /// Fill residuals; return `false` when `params` is infeasible.
    fn residuals(&self, params: &[f64], out: &mut [f64]) -> bool;
    /// Row-major Jacobian `∂r_i/∂p_j` (`out[i·np + j]`).
    fn jacobian(&self, params: &[f64], out: &mut [f64]);
}

/// Levenberg–Marquardt with Marquardt diagonal scaling.
pub fn levenberg_marquardt<P: LeastSquares>(problem: &P, start: &[f64], opts: &LmOptions) -> LmReport {
    let np = start.len();
    let nr = problem.residual_count();
    let mut p = start.to_vec();
    let mut r = vec![0.0; nr];
    if !problem.residuals(&p, &mut r) {
        return LmReport { params: p, cost: f64::INFINITY, iterations: 0, converged: false };
    }
    let mut cost = half_sq(&r);
    let mut jac = vec![0.0; nr * np];
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; np];
    let mut r_trial = vec![0.0; nr];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        problem.jacobian(&p, &mut jac);
        let mut jtj = vec![0.0; np * np];
        let mut jtr = vec![0.0; np];
        for i in 0..nr {
            let row = &jac[i * np..(i + 1) * np];
            for a in 0..np {
                jtr[a] += row[a] * r[i];
                for b in a..np {
                    jtj[a * np + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[a * np + b] = jtj[b * np + a];
            }
        }
        let grad_norm = jtr.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm == 0.0 {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..np {
                let diag = jtj[d * np + d];
                a[d * np + d] += lambda * (diag + 1e-12 * (1.0 + diag));
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let step = match cholesky_solve(&a, &rhs, np) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            for d in 0..np {
                trial[d] = p[d] + step[d];
            }
            if problem.residuals(&trial, &mut r_trial) {
                let c = half_sq(&r_trial);
                if c.is_finite() && c <= cost {
                    let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    let step_small = step
                        .iter()
                        .zip(&p)
                        .all(|(s, x)| s.abs() <= 1e-15 * (x.abs() + 1e-300));
                    p.copy_from_slice(&trial);
                    r.copy_from_slice(&r_trial);
                    cost = c;
                    lambda = (lambda * 0.3).max(1e-15);
                    accepted = true;
                    if rel < opts.relative_cost_tolerance || step_small {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: stationary to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmReport { params: p, cost, iterations, converged }
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

/// Solve `A x = b` for symmetric positive definite `A` (row-major, n × n).
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Result of a bracketed line minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMin {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimize a 1-D function on `[lo, hi]` starting from `x0`: expand a
/// downhill bracket from `x0` with growing steps, then golden-section
/// search until the bracket is narrower than `x_tol`.
pub fn bracketed_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    initial_step: f64,
    lo: f64,
    hi: f64,
    x_tol: f64,
) -> LineMin {
    let evals = core::cell::Cell::new(0usize);
    let mut eval = |x: f64| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let x0 = x0.clamp(lo, hi);
    let f0 = eval(x0);
    let step = initial_step.abs().max(x_tol);

    // Pick the downhill direction.
    let xp = (x0 + step).min(hi);
    let fp = eval(xp);
    let (dir, mut x1, mut f1) = if fp < f0 {
        (1.0, xp, fp)
    } else {
        let xm = (x0 - step).max(lo);
        let fm = eval(xm);
        if fm < f0 {
            (-1.0, xm, fm)
        } else {
            // x0 already brackets a minimum in [xm, xp].
            let m = golden(&mut eval, xm, x0, xp, f0, x_tol);
            return LineMin { evaluations: evals.get(), ..m };
        }
    };
    let mut a = x0;
    let mut s = step;
    loop {
        s *= 1.618;
        let x2 = if dir > 0.0 { (x1 + s).min(hi) } else { (x1 - s).max(lo) };
        if x2 == x1 {
            // Hit the bound while still descending.
            return LineMin { x: x1, value: f1, evaluations: evals.get() };
        }
        let f2 = eval(x2);
        if f2 >= f1 {
            let (l, h) = if dir > 0.0 { (a, x2) } else { (x2, a) };
            let m = golden(&mut eval, l, x1, h, f1, x_tol);
            return LineMin { evaluations: evals.get(), ..m };
        }
        a = x1;
        x1 = x2;
        f1 = f2;
    }
}

/// Golden-section search on `[a, c]` with interior point `b` (`f(b) = fb`).
fn golden<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, b: f64, mut c: f64, fb: f64, x_tol: f64) -> LineMin {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut best = (b, fb);
    let mut x1 = c - R * (c - a);
    let mut x2 = a + R * (c - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    while (c - a).abs() > x_tol {
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - R * (c - a);
            f1 = f(x1);
            if f1 < best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (c - a);
            f2 = f(x2);
            if f2 < best.1 {
                best = (x2, f2);
            }
        }
    }
    LineMin { x: best.0, value: best.1, evaluations: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;
    impl LeastSquares for Rosenbrock {
        fn residual_count(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
            true
        }
        fn jacobian(&self, p: &[f64], out: &mut [f64]) {
            out[0] = -20.0 * p[0];
            out[1] = 10.0;
            out[2] = -1.0;
            out[3] = 0.0;
        }
    }

    #[test]
    fn lm_solves_rosenbrock() {
        let rep = levenberg_marquardt(&Rosenbrock, &[-1.2, 1.0], &LmOptions::default());
        assert!((rep.params[0] - 1.0).abs() < 1e-8, "{rep:?}");
        assert!((rep.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cholesky_solves_spd() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = cholesky_solve(&a, &[1.0, 2.0], 2).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(cholesky_solve(&[0.0, 0.0, 0.0, 1.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn line_search_finds_parabola_minimum() {
        let m = bracketed_minimize(|x| (x - 3.3) * (x - 3.3) + 1.0, 0.0, 0.1, -10.0, 10.0, 1e-9);
        assert!((m.x - 3.3).abs() < 1e-8, "{m:?}");
        let m = bracketed_minimize(|x| (x - 3.3) * (x - 3.3), 5.0, 0.1, -10.0, 10.0, 1e-9);
        assert!((m.x - 3.3).abs() < 1e-8);
    }

    #[test]
    fn line_search_respects_bounds() {
        let m = bracketed_minimize(|x| -x, 0.0, 0.1, -1.0, 2.0, 1e-9);
        assert_eq!(m.x, 2.0);
    }
}
