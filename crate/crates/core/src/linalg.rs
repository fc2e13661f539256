//! Small dense and tridiagonal linear algebra used throughout the crate.
//!
//! Everything here is sized for desk-scale problems: Hermitian matrices of
//! order at most a few dozen (Nakano forms live on `T ⊗ T`, so `n² ≤ 9`) and
//! symmetric tridiagonal pencils of order a few thousand.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense row-major complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |r, c| self[(c, r)].conj())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }

    /// Largest entry of `self - self^*` in absolute value.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for c in 0..self.n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn determinant(&self) -> C64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = C64::new(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap_or(col);
            if a[pivot * n + col].norm() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
            }
        }
        det
    }

    /// Lower-triangular `L` with `L L^* = self`; fails unless positive-definite.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::SingularMetric);
            }
            let d = d.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Inverse via Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap_or(col);
            if a[pivot * n + col].norm() < 1e-300 {
                return Err(Error::SingularMetric);
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                    inv.swap(pivot * n + k, col * n + k);
                }
            }
            let p = a[col * n + col];
            for k in 0..n {
                a[col * n + k] /= p;
                inv[col * n + k] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    let (av, iv) = (a[col * n + k], inv[col * n + k]);
                    a[r * n + k] -= f * av;
                    inv[r * n + k] -= f * iv;
                }
            }
        }
        Ok(Self { n, data: inv })
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.n + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.n + c]
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<C64>>,
}

/// Cyclic complex Jacobi iteration. Only the Hermitian part of `h` is used.
pub fn hermitian_eigen(h: &CMatrix) -> HermitianEigen {
    let n = h.dim();
    let mut a = CMatrix::from_fn(n, |r, c| (h[(r, c)] + h[(c, r)].conj()) * 0.5);
    let mut v = CMatrix::identity(n);
    let scale = a.max_abs().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let c = a[(p, q)];
                let m = c.norm();
                if m <= 1e-300 {
                    continue;
                }
                let phase = c / m;
                let zeta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * m);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let e = phase.conj();
                let upp = C64::new(cs, 0.0);
                let upq = C64::new(sn, 0.0);
                let uqp = e * (-sn);
                let uqq = e * cs;
                for k in 0..n {
                    let (xp, xq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = xp * upp + xq * uqp;
                    a[(k, q)] = xp * upq + xq * uqq;
                }
                for k in 0..n {
                    let (xp, xq) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = upp.conj() * xp + uqp.conj() * xq;
                    a[(q, k)] = upq.conj() * xp + uqq.conj() * xq;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..n {
                    let (xp, xq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = xp * upp + xq * uqp;
                    v[(k, q)] = xp * upq + xq * uqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    HermitianEigen {
        values: order.iter().map(|&k| a[(k, k)].re).collect(),
        vectors: order.iter().map(|&k| (0..n).map(|r| v[(r, k)]).collect()).collect(),
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(h: &CMatrix) -> f64 {
    hermitian_eigen(h).values.first().copied().unwrap_or(0.0)
}

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x`, from the negative LDLᵀ pivots.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "eigenvalue index {k} out of range for order {}",
                self.len()
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (hi - lo).abs().max(1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Unit eigenvector for a converged eigenvalue, by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let scale = self.diag.iter().chain(self.off.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        let shift = lambda + 1e-14 * scale.max(1e-300);
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 % 97) as f64 / 97.0)).collect();
        for _ in 0..4 {
            let y = solve_shifted_tridiagonal(self, shift, &x)?;
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::NoConvergence);
            }
            x = y.into_iter().map(|v| v / norm).collect();
        }
        Ok(x)
    }
}

/// Solves `(T - shift I) y = b` with partial pivoting (LAPACK `gtsv` style).
fn solve_shifted_tridiagonal(t: &SymTridiagonal, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = t.len();
    if n == 1 {
        let d = t.diag[0] - shift;
        let d = if d == 0.0 { 1e-300 } else { d };
        return Ok(vec![b[0] / d]);
    }
    let mut dl: Vec<f64> = t.off.clone();
    let mut d: Vec<f64> = t.diag.iter().map(|v| v - shift).collect();
    let mut du: Vec<f64> = t.off.clone();
    let mut du2 = vec![0.0; n];
    let mut y = b.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let piv = if d[i] == 0.0 { 1e-300 } else { d[i] };
            let f = dl[i] / piv;
            d[i + 1] -= f * du[i];
            y[i + 1] -= f * y[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            y.swap(i, i + 1);
            y[i + 1] -= f * y[i];
        }
    }
    let last = if d[n - 1] == 0.0 { 1e-300 } else { d[n - 1] };
    y[n - 1] /= last;
    let pn2 = if d[n - 2] == 0.0 { 1e-300 } else { d[n - 2] };
    y[n - 2] = (y[n - 2] - du[n - 2] * y[n - 1]) / pn2;
    for i in (0..n.saturating_sub(2)).rev() {
        let piv = if d[i] == 0.0 { 1e-300 } else { d[i] };
        y[i] = (y[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / piv;
    }
    Ok(y)
}

/// Solves a general (non-symmetric) tridiagonal system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::SingularMetric);
    }
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::SingularMetric);
        }
        if i + 1 < n {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Least-squares solution of `A x ≈ b` (A is `rows × cols`, row-major) by Householder QR.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if rows < cols {
        return Err(Error::InvalidArgument("underdetermined least-squares system".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    for k in 0..cols {
        let norm = (k..rows).map(|r| a[r * cols + k] * a[r * cols + k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("rank-deficient least-squares system".into()));
        }
        let alpha = if a[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|r| a[r * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in k..cols {
            let dot: f64 = (k..rows).map(|r| v[r - k] * a[r * cols + c]).sum();
            let f = 2.0 * dot / vnorm2;
            for r in k..rows {
                a[r * cols + c] -= f * v[r - k];
            }
        }
        let dot: f64 = (k..rows).map(|r| v[r - k] * b[r]).sum();
        let f = 2.0 * dot / vnorm2;
        for r in k..rows {
            b[r] -= f * v[r - k];
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut s = b[k];
        for c in k + 1..cols {
            s -= a[k * cols + c] * x[c];
        }
        let d = a[k * cols + k];
        if d.abs() < 1e-300 {
            return Err(Error::InvalidArgument("rank-deficient least-squares system".into()));
        }
        x[k] = s / d;
    }
    Ok(x)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else if order == 1 { x } else { p1 };
            let pm1 = if order == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_hermitian() {
        let h = CMatrix::from_fn(3, |r, c| match (r, c) {
            (0, 0) => C64::new(2.0, 0.0),
            (1, 1) => C64::new(-1.0, 0.0),
            (2, 2) => C64::new(0.5, 0.0),
            (0, 1) => C64::new(0.3, 0.4),
            (1, 0) => C64::new(0.3, -0.4),
            (1, 2) => C64::new(0.0, 1.0),
            (2, 1) => C64::new(0.0, -1.0),
            _ => C64::new(0.0, 0.0),
        });
        let e = hermitian_eigen(&h);
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            let hv = h.mul_vec(v);
            for (a, b) in hv.iter().zip(v) {
                assert!((a - b * lam).norm() < 1e-13);
            }
        }
        let trace: f64 = e.values.iter().sum();
        assert!((trace - 1.5).abs() < 1e-13);
    }

    #[test]
    fn tridiagonal_bisection_matches_known_spectrum() {
        // -x'' Dirichlet stencil: eigenvalues 2 - 2 cos(k pi / (n + 1)).
        let n = 50;
        let t = SymTridiagonal { diag: vec![2.0; n], off: vec![-1.0; n - 1] };
        for k in 0..5 {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * core::f64::consts::PI / (n as f64 + 1.0)).cos();
            let got = t.eigenvalue(k).unwrap();
            assert!((got - exact).abs() < 1e-13, "{k}: {got} vs {exact}");
            let v = t.eigenvector(got).unwrap();
            let tv = t.mul_vec(&v);
            let res = tv.iter().zip(&v).map(|(a, b)| (a - got * b).abs()).fold(0.0, f64::max);
            assert!(res < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let rows = 20;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..rows {
            let x = i as f64 / 19.0;
            a.extend_from_slice(&[1.0, x, x * x]);
            b.push(3.0 - 2.0 * x + 0.5 * x * x);
        }
        let c = least_squares(&a, rows, 3, &b).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_and_inverse_roundtrip() {
        let h = CMatrix::from_fn(2, |r, c| match (r, c) {
            (0, 0) => C64::new(3.0, 0.0),
            (1, 1) => C64::new(2.0, 0.0),
            (0, 1) => C64::new(0.5, 1.0),
            _ => C64::new(0.5, -1.0),
        });
        let l = h.cholesky().unwrap();
        let back = l.mul(&l.adjoint());
        for r in 0..2 {
            for c in 0..2 {
                assert!((back[(r, c)] - h[(r, c)]).norm() < 1e-14);
            }
        }
        let prod = h.mul(&h.inverse().unwrap());
        assert!((prod[(0, 0)] - 1.0).norm() < 1e-14 && prod[(0, 1)].norm() < 1e-14);
        assert!((h.determinant() - C64::new(6.0 - 1.25, 0.0)).norm() < 1e-14);
    }
}
