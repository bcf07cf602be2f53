//! Sparse and banded linear algebra for the mode solver.
//!
//! The generalized problem `K x = λ M x` (K symmetric positive definite,
//! M positive diagonal) is solved by shift-invert Lanczos with full
//! reorthogonalization. Shifted systems are factored with a banded LU with
//! partial pivoting; the grid ordering keeps the bandwidth at one grid row.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(col, value)` lists; columns are sorted and
    /// duplicate entries summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Largest |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(c, _)| c.abs_diff(i)))
            .max()
            .unwrap_or(0)
    }

    /// Largest |a_ij − a_ji| relative to the largest |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

/// LU factorization with partial pivoting of a banded matrix with equal
/// lower and upper bandwidth `b` (fill-in extends the upper band to `2b`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    b: usize,
    width: usize,
    /// Row `i` stores columns `i − b ..= i + 2b`.
    upper: Vec<f64>,
    /// Multipliers: `lower[k·b + t]` eliminates row `k + 1 + t` at step `k`.
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factor `a − shift·diag(weights)`.
    pub fn factor_shifted(a: &CsrMatrix, shift: f64, weights: &[f64]) -> Result<Self> {
        let n = a.n;
        let b = a.bandwidth();
        let width = 3 * b + 1;
        let mut upper = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                upper[i * width + (j + b - i)] += v;
            }
            upper[i * width + b] -= shift * weights[i];
        }
        let at = |row: usize, col: usize| row * width + (col + b - row);
        let mut lower = vec![0.0; n * b.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last = (k + b).min(n - 1);
            let mut p = k;
            let mut best = upper[at(k, k)].abs();
            for r in k + 1..=last {
                let v = upper[at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::InvalidInput("singular shifted operator".into()));
            }
            let col_end = (k + 2 * b).min(n - 1);
            if p != k {
                for c in k..=col_end {
                    let (ik, ip) = (at(k, c), at(p, c));
                    upper.swap(ik, ip);
                }
            }
            let pivot = upper[at(k, k)];
            for r in k + 1..=last {
                let m = upper[at(r, k)] / pivot;
                lower[k * b + (r - k - 1)] = m;
                upper[at(r, k)] = 0.0;
                if m != 0.0 {
                    for c in k + 1..=col_end {
                        let u = upper[at(k, c)];
                        upper[at(r, c)] -= m * u;
                    }
                }
            }
        }
        Ok(BandedLu { n, b, width, upper, lower, pivots })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                let last = (k + b).min(n - 1);
                for r in k + 1..=last {
                    x[r] -= self.lower[k * b + (r - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let col_end = (k + 2 * b).min(n - 1);
            let row = &self.upper[k * w..(k + 1) * w];
            let mut s = x[k];
            for c in k + 1..=col_end {
                s -= row[c + b - k] * x[c];
            }
            x[k] = s / row[b];
        }
    }
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL.
///
/// `d` holds the diagonal, `e[1..]` the sub-diagonal (`e[0]` ignored).
/// Returns eigenvalues ascending and the column-major eigenvector matrix
/// (`z[row·n + col]`, column `col` ↔ eigenvalue `col`).
pub fn tridiagonal_eigen(d: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let mut d = d.to_vec();
    let mut e = e.to_vec();
    tql2(&mut d, &mut e, &mut z, n)?;
    Ok((d, z))
}

/// Symmetric tridiagonal QL with accumulated transforms (JAMA tql2).
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::SolverNoConvergence {
                        iterations: iter,
                        converged: l,
                        requested: n,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                let mut i = m;
                while i > l {
                    i -= 1;
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk1 = z[k * n + i + 1];
                        let zk = z[k * n + i];
                        z[k * n + i + 1] = s * zk + c * zk1;
                        z[k * n + i] = c * zk - s * zk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    // Sort ascending.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                z.swap(row * n + i, row * n + k);
            }
        }
    }
    Ok(())
}

/// Dense symmetric eigen-decomposition (Householder tridiagonalization + QL).
///
/// `a` is row-major `n × n`; returns ascending eigenvalues and column-major
/// eigenvectors as in [`tridiagonal_eigen`]. Intended for small problems.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut d, &mut e, &mut v, n)?;
    Ok((d, v))
}

/// Householder reduction to tridiagonal form (JAMA tred2).
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    if n == 0 {
        return;
    }
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Settings for [`generalized_lowest_above`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Relative Ritz residual required for convergence.
    pub tolerance: f64,
    /// Upper bound on the Krylov dimension.
    pub max_dimension: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tolerance: 1e-11,
            max_dimension: 600,
        }
    }
}

/// Eigenpairs of `K x = λ M x`: ascending eigenvalues and M-orthonormal
/// eigenvectors (`vectors[k]` belongs to `values[k]`).
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// The `count` eigenvalues of `K x = λ M x` closest to and above `shift`,
/// by shift-invert Lanczos with full reorthogonalization.
///
/// `m_diag` must be strictly positive. Works in the symmetric variable
/// `y = M^{1/2} x`, where the shift-inverted operator
/// `M^{1/2} (K − σM)^{-1} M^{1/2}` is symmetric.
pub fn generalized_lowest_above(
    k: &CsrMatrix,
    m_diag: &[f64],
    shift: f64,
    count: usize,
    opts: &LanczosOptions,
) -> Result<EigenPairs> {
    let n = k.n;
    if count == 0 || count > n {
        return Err(Error::InvalidInput("requested mode count out of range".into()));
    }
    let lu = BandedLu::factor_shifted(k, shift, m_diag)?;
    let sqrt_m: Vec<f64> = m_diag.iter().map(|&m| libm::sqrt(m)).collect();
    let apply = |y: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = sqrt_m[i] * y[i];
        }
        lu.solve_in_place(out);
        for i in 0..n {
            out[i] *= sqrt_m[i];
        }
    };

    let max_dim = opts.max_dimension.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    // Deterministic, non-degenerate start vector.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * libm::sin(0.7 * i as f64 + 0.3) + 0.25 * libm::cos(1.3 * i as f64))
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let check_every = 10;
    let first_check = (2 * count + 10).min(max_dim);

    loop {
        apply(&v, &mut w);
        let a = dot(&w, &v);
        basis.push(v.clone());
        alpha.push(a);
        // Full reorthogonalization (twice is enough).
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(-c, q, &mut w);
            }
        }
        let b = libm::sqrt(dot(&w, &w));
        let m = basis.len();
        let exhausted = b <= 1e-14 * a.abs().max(1e-300);

        if m >= first_check && ((m - first_check).is_multiple_of(check_every) || m == max_dim || exhausted) {
            let mut e = vec![0.0; m];
            e[1..m].copy_from_slice(&beta[..m - 1]);
            let (theta, s) = tridiagonal_eigen(&alpha, &e)?;
            // Largest positive theta ↔ eigenvalue closest above the shift.
            let mut order: Vec<usize> = (0..m).filter(|&t| theta[t] > 0.0).collect();
            order.sort_by(|&x, &y| theta[y].partial_cmp(&theta[x]).unwrap());
            let wanted: Vec<usize> = order.iter().copied().take(count).collect();
            let converged = wanted
                .iter()
                .filter(|&&t| (b * s[(m - 1) * m + t]).abs() <= opts.tolerance * theta[t].abs())
                .count();
            if (wanted.len() == count && converged == count) || exhausted || m == max_dim {
                if wanted.len() < count || converged < count {
                    return Err(Error::SolverNoConvergence {
                        iterations: m,
                        converged,
                        requested: count,
                    });
                }
                let mut values = Vec::with_capacity(count);
                let mut vectors = Vec::with_capacity(count);
                for &t in &wanted {
                    values.push(shift + 1.0 / theta[t]);
                    let mut x = vec![0.0; n];
                    for (row, q) in basis.iter().enumerate() {
                        axpy(s[row * m + t], q, &mut x);
                    }
                    for i in 0..n {
                        x[i] /= sqrt_m[i];
                    }
                    vectors.push(x);
                }
                return Ok(EigenPairs { values, vectors, iterations: m });
            }
        }
        if exhausted || m == max_dim {
            return Err(Error::SolverNoConvergence {
                iterations: m,
                converged: 0,
                requested: count,
            });
        }
        beta.push(b);
        for i in 0..n {
            v[i] = w[i] / b;
        }
    }
}

/// Dense reference for `K x = λ M x` (small problems only).
pub fn generalized_dense(k: &CsrMatrix, m_diag: &[f64]) -> Result<EigenPairs> {
    let n = k.n;
    let inv_sqrt: Vec<f64> = m_diag.iter().map(|&m| 1.0 / libm::sqrt(m)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for (j, v) in k.row(i) {
            a[i * n + j] = v * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let (values, z) = symmetric_eigen(&a, n)?;
    let vectors = (0..n)
        .map(|col| (0..n).map(|row| z[row * n + col] * inv_sqrt[row]).collect())
        .collect();
    Ok(EigenPairs { values, vectors, iterations: n })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(v: &mut [f64]) {
    let n = libm::sqrt(dot(v, v));
    for x in v.iter_mut() {
        *x /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn banded_lu_solves_shifted_system() {
        let n = 40;
        let a = laplacian_1d(n);
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        // Shift inside the spectrum to force an indefinite system and pivoting.
        let lu = BandedLu::factor_shifted(&a, 0.37, &w).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let mut rhs = vec![0.0; n];
        a.mul_vec(&x_true, &mut rhs);
        for i in 0..n {
            rhs[i] -= 0.37 * w[i] * x_true[i];
        }
        lu.solve_in_place(&mut rhs);
        for i in 0..n {
            assert!((rhs[i] - x_true[i]).abs() < 1e-9, "{i}: {} vs {}", rhs[i], x_true[i]);
        }
    }

    #[test]
    fn tridiagonal_eigen_of_laplacian() {
        let n = 12;
        let d = vec![2.0; n];
        let mut e = vec![-1.0; n];
        e[0] = 0.0;
        let (vals, _) = tridiagonal_eigen(&d, &e).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * libm::cos((k + 1) as f64 * core::f64::consts::PI / (n + 1) as f64);
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let n = 80;
        let k = laplacian_1d(n);
        let m: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.3).collect();
        let dense = generalized_dense(&k, &m).unwrap();
        let lz = generalized_lowest_above(&k, &m, 0.0, 5, &LanczosOptions::default()).unwrap();
        for t in 0..5 {
            assert!((dense.values[t] - lz.values[t]).abs() < 1e-10 * dense.values[t].max(1.0));
            // M-orthonormality
            let mut mx = lz.vectors[t].clone();
            for i in 0..n {
                mx[i] *= m[i];
            }
            for s in 0..5 {
                let ip = dot(&mx, &lz.vectors[s]);
                let expect = if s == t { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shift_selects_modes_above() {
        let n = 60;
        let k = laplacian_1d(n);
        let m = vec![1.0; n];
        let dense = generalized_dense(&k, &m).unwrap();
        let shift = 0.5 * (dense.values[3] + dense.values[4]);
        let lz = generalized_lowest_above(&k, &m, shift, 3, &LanczosOptions::default()).unwrap();
        for t in 0..3 {
            assert!((lz.values[t] - dense.values[4 + t]).abs() < 1e-10);
        }
    }

    #[test]
    fn csr_symmetry_and_bandwidth() {
        let a = laplacian_1d(10);
        assert_eq!(a.bandwidth(), 1);
        assert_eq!(a.asymmetry(), 0.0);
    }
}
