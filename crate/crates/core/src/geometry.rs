//! U(n)-invariant Kähler metrics on Pⁿ (n = 1, 2) in momentum form.
//!
//! A metric is described by the momentum profile θ(τ) on `[0, 1]`. In the
//! affine chart with `r = |z|²` and `s = ln r`, the Kähler potential φ(s)
//! satisfies `φ'(s) = Aτ` and `φ''(s) = Aθ(τ)` with `A = n + 1`, so
//!
//! ```text
//! g_{j̄i} = (Aτ / r) δ_ij + A (θ − τ) z̄_i z_j / r²,    ds/dτ = 1/θ.
//! ```
//!
//! Fubini–Study is `θ = τ(1 − τ)`; the constant `A` is fixed by demanding
//! scalar curvature `R ≡ n` there. Smooth compactification forces the
//! endpoint slopes `θ'(0) = 1` and `θ'(1) = −1`.
//!
//! In the unitary frame at the chart point `(x, 0, …)` (index 0 radial,
//! index 1 angular) the only nonzero curvature components are
//!
//! ```text
//! R_{0̄00̄0} = −θ''/A
//! R_{0̄01̄1} = R_{1̄10̄0} = R_{0̄11̄0} = R_{1̄00̄1} = (θ − τθ')/(Aτ²)
//! R_{1̄11̄1} = 2(1 − θ/τ)/(Aτ)
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, least_squares, CMatrix, C64};
use crate::numerics::{cumulative_integral, fd_weights, integral, Order};

/// Potential scale `A = n + 1` that makes Fubini–Study satisfy `R ≡ n`.
pub fn amplitude(n: usize) -> f64 {
    (n + 1) as f64
}

/// Endpoint slopes `(θ'(0), θ'(1))` required for a smooth metric.
pub const BOUNDARY_SLOPES: [f64; 2] = [1.0, -1.0];

/// Default τ-grid size for a given dimension.
pub fn default_grid(n: usize) -> usize {
    if n == 1 {
        512
    } else {
        256
    }
}

pub(crate) fn check_dimension(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// Volume form `ωⁿ = n (πA)ⁿ τ^{n−1} dτ` pushed forward to the moment interval,
/// as a density in τ.
pub fn volume_density(n: usize, tau: f64) -> f64 {
    let a = amplitude(n);
    n as f64 * (core::f64::consts::PI * a).powi(n as i32) * tau.powi(n as i32 - 1)
}

/// Total volume `∫ωⁿ = (πA)ⁿ`; it depends only on the class.
pub fn total_volume(n: usize) -> f64 {
    (core::f64::consts::PI * amplitude(n)).powi(n as i32)
}

/// Samples of θ on a uniform τ-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumProfile {
    n: usize,
    theta: Vec<f64>,
    boundary_slopes: [f64; 2],
}

impl MomentumProfile {
    /// Validates positivity and the endpoint conditions.
    pub fn new(n: usize, theta: Vec<f64>) -> Result<Self> {
        check_dimension(n)?;
        let m = theta.len();
        if m < 8 {
            return Err(Error::InvalidProfile(format!("grid of {m} points is too small")));
        }
        if theta[0] != 0.0 || theta[m - 1] != 0.0 {
            return Err(Error::InvalidProfile("endpoint values must be exactly zero".into()));
        }
        let h = 1.0 / (m - 1) as f64;
        for (i, &v) in theta.iter().enumerate().take(m - 1).skip(1) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::PositivityViolated { tau: i as f64 * h });
            }
        }
        Ok(Self { n, theta, boundary_slopes: BOUNDARY_SLOPES })
    }

    /// Samples `f` on an `m`-point grid and zeroes the endpoints.
    pub fn from_fn(n: usize, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 1.0 / (m.max(2) - 1) as f64;
        let mut theta: Vec<f64> = (0..m).map(|i| f(i as f64 * h)).collect();
        if let Some(first) = theta.first_mut() {
            *first = 0.0;
        }
        if let Some(last) = theta.last_mut() {
            *last = 0.0;
        }
        Self::new(n, theta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn boundary_slopes(&self) -> [f64; 2] {
        self.boundary_slopes
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        1.0 / (self.len() - 1) as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.tau(i)).collect()
    }

    /// One-sided (fourth-order) endpoint slopes minus the required values.
    pub fn slope_defect(&self) -> [f64; 2] {
        let m = self.len();
        let xs: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let w = fd_weights(0.0, &xs, 1);
        let h = self.h();
        let left: f64 = (0..5).map(|k| w[1][k] * self.theta[k]).sum::<f64>() / h;
        let right: f64 = -(0..5).map(|k| w[1][k] * self.theta[m - 1 - k]).sum::<f64>() / h;
        [left - self.boundary_slopes[0], right - self.boundary_slopes[1]]
    }

    /// Same profile with θ replaced; used by the flow.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.n, theta)
    }
}

/// Fubini–Study on the default grid.
pub fn fubini_study_profile(n: usize) -> Result<MomentumProfile> {
    check_dimension(n)?;
    fubini_study_profile_on(n, default_grid(n))
}

/// Fubini–Study on an `m`-point grid.
pub fn fubini_study_profile_on(n: usize, m: usize) -> Result<MomentumProfile> {
    MomentumProfile::from_fn(n, m, |t| t * (1.0 - t))
}

/// `θ = w + ε w² (1 + κ(2τ − 1))`, `w = τ(1 − τ)`: a perturbation of Fubini–Study of
/// relative size `ε/4` at the midpoint, concave (positive bisectional curvature)
/// when `ε(1 + |κ|) < 1`.
pub fn perturbed_profile(n: usize, m: usize, eps: f64, kappa: f64) -> Result<MomentumProfile> {
    MomentumProfile::from_fn(n, m, |t| {
        let w = t * (1.0 - t);
        w + eps * w * w * (1.0 + kappa * (2.0 * t - 1.0))
    })
}

/// Derivatives of θ on the grid, fourth order, with the endpoint slopes imposed.
pub fn profile_jets(p: &MomentumProfile) -> (Vec<f64>, Vec<f64>) {
    let th = p.theta();
    let m = th.len();
    let h = p.h();
    let base = crate::numerics::jets(th, h, Order::Fourth);
    let (mut d1, mut d2) = (base.d1, base.d2);
    // Near each end: quintic through five values plus the prescribed slope.
    let slope = p.boundary_slopes();
    for side in 0..2 {
        let s = slope[side] * if side == 0 { 1.0 } else { -1.0 };
        let vals: Vec<f64> = (0..5).map(|k| if side == 0 { th[k] } else { th[m - 1 - k] }).collect();
        for node in 0..2 {
            // Unknowns: coefficients of (t - node)^d, d = 0..5, in mirrored index units.
            let mut a = Vec::with_capacity(36);
            let mut b = Vec::with_capacity(6);
            for (k, v) in vals.iter().enumerate() {
                let t = k as f64 - node as f64;
                for d in 0..6 {
                    a.push(t.powi(d));
                }
                b.push(*v);
            }
            let t0 = -(node as f64);
            for d in 0..6 {
                a.push(if d == 0 { 0.0 } else { d as f64 * t0.powi(d - 1) });
            }
            b.push(s * h);
            let c = least_squares(&a, 6, 6, &b).expect("endpoint stencil is nonsingular");
            let i = if side == 0 { node } else { m - 1 - node };
            let sign = if side == 0 { 1.0 } else { -1.0 };
            d1[i] = sign * c[1] / h;
            d2[i] = 2.0 * c[2] / (h * h);
        }
    }
    (d1, d2)
}

/// Frame curvature coefficients `(a, b, c)` from the profile jet at τ.
fn frame_coefficients(n: usize, tau: f64, th: f64, d1: f64, d2: f64) -> (f64, f64, f64) {
    let a_ = amplitude(n);
    let a = -d2 / a_;
    if tau == 0.0 {
        (a, -d2 / (2.0 * a_), -d2 / a_)
    } else {
        let b = (th - tau * d1) / (a_ * tau * tau);
        let c = 2.0 * (1.0 - th / tau) / (a_ * tau);
        (a, b, c)
    }
}

/// Pointwise curvature data of a profile at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGeometry {
    pub n: usize,
    pub h: f64,
    pub tau: Vec<f64>,
    pub theta: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// `F = n − (n−1)θ/τ − θ'`, so that `Aτ − F = θ u_τ`.
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    /// Ricci eigenvalue (relative to g) in the radial direction.
    pub rho_radial: Vec<f64>,
    /// Ricci eigenvalue in the angular directions (equal to `rho_radial` when n = 1).
    pub rho_angular: Vec<f64>,
    pub scalar: Vec<f64>,
    /// Frame curvature coefficients `(a, b, c)` per node.
    pub frame: Vec<(f64, f64, f64)>,
}

impl ProfileGeometry {
    pub fn new(p: &MomentumProfile) -> Self {
        let (d1, d2) = profile_jets(p);
        Self::from_jets(p.n(), p.h(), p.theta().to_vec(), d1, d2)
    }

    pub fn from_jets(n: usize, h: f64, theta: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        let m = theta.len();
        let a_ = amplitude(n);
        let nf = n as f64;
        let mut tau = vec![0.0; m];
        let mut f = vec![0.0; m];
        let mut fp = vec![0.0; m];
        let mut rr = vec![0.0; m];
        let mut ra = vec![0.0; m];
        let mut sc = vec![0.0; m];
        let mut frame = vec![(0.0, 0.0, 0.0); m];
        for i in 0..m {
            let t = i as f64 * h;
            tau[i] = t;
            let (th, p1, p2) = (theta[i], d1[i], d2[i]);
            let (theta_over_tau, q) = if i == 0 {
                (p1, p2 / 2.0)
            } else {
                (th / t, (p1 * t - th) / (t * t))
            };
            f[i] = nf - (nf - 1.0) * theta_over_tau - p1;
            fp[i] = -(nf - 1.0) * q - p2;
            let f_over_tau = if i == 0 { fp[i] } else { f[i] / t };
            rr[i] = fp[i] / a_;
            ra[i] = if n == 1 { rr[i] } else { f_over_tau / a_ };
            sc[i] = (nf - 1.0) * f_over_tau / a_ + fp[i] / a_;
            frame[i] = frame_coefficients(n, t, th, p1, p2);
        }
        Self {
            n,
            h,
            tau,
            theta,
            d1,
            d2,
            f,
            f_prime: fp,
            rho_radial: rr,
            rho_angular: ra,
            scalar: sc,
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// `∫ f ωⁿ` for grid samples `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let w: Vec<f64> = f.iter().zip(&self.tau).map(|(v, t)| v * volume_density(self.n, *t)).collect();
        integral(&w, self.h)
    }

    /// `sup |Ric − g|` in the g-operator norm.
    pub fn sup_ric_minus_g(&self) -> f64 {
        self.rho_radial
            .iter()
            .zip(&self.rho_angular)
            .fold(0.0, |m, (a, b)| m.max((a - 1.0).abs()).max((b - 1.0).abs()))
    }

    /// Unitary-frame curvature tensor at node `i`.
    pub fn frame_tensor(&self, i: usize) -> CurvatureTensor {
        let (a, b, c) = self.frame[i];
        frame_model_tensor(self.n, a, b, c)
    }
}

/// Frame tensor with the closed-form sparsity pattern and identity metric.
pub fn frame_model_tensor(n: usize, a: f64, b: f64, c: f64) -> CurvatureTensor {
    let mut t = CurvatureTensor::zeros(n, CMatrix::identity(n));
    t.set(0, 0, 0, 0, C64::new(a, 0.0));
    if n >= 2 {
        let bb = C64::new(b, 0.0);
        t.set(0, 0, 1, 1, bb);
        t.set(1, 1, 0, 0, bb);
        t.set(0, 1, 1, 0, bb);
        t.set(1, 0, 0, 1, bb);
        t.set(1, 1, 1, 1, C64::new(c, 0.0));
    }
    t
}

/// Curvature components `R_{j̄il̄k}` at one point, stored with the metric there.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    n: usize,
    /// Chart coordinates of the point (empty for abstract frame tensors).
    pub point: Vec<C64>,
    pub metric: CMatrix,
    comps: Vec<C64>,
}

impl CurvatureTensor {
    pub fn zeros(n: usize, metric: CMatrix) -> Self {
        Self { n, point: Vec::new(), metric, comps: vec![C64::new(0.0, 0.0); n * n * n * n] }
    }

    pub fn from_fn(n: usize, metric: CMatrix, mut f: impl FnMut(usize, usize, usize, usize) -> C64) -> Self {
        let mut t = Self::zeros(n, metric);
        for j in 0..n {
            for i in 0..n {
                for l in 0..n {
                    for k in 0..n {
                        t.set(j, i, l, k, f(j, i, l, k));
                    }
                }
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, j: usize, i: usize, l: usize, k: usize) -> usize {
        ((j * self.n + i) * self.n + l) * self.n + k
    }

    /// `R_{j̄il̄k}`.
    pub fn get(&self, j: usize, i: usize, l: usize, k: usize) -> C64 {
        self.comps[self.idx(j, i, l, k)]
    }

    pub fn set(&mut self, j: usize, i: usize, l: usize, k: usize, v: C64) {
        let id = self.idx(j, i, l, k);
        self.comps[id] = v;
    }

    pub fn components(&self) -> &[C64] {
        &self.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest violation of the Kähler and conjugation symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                for l in 0..n {
                    for k in 0..n {
                        let v = self.get(j, i, l, k);
                        worst = worst
                            .max((v - self.get(l, i, j, k)).norm())
                            .max((v - self.get(j, k, l, i)).norm())
                            .max((v - self.get(i, j, k, l).conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// Component-wise linear combination `self + s·other` (metric of `self` kept).
    pub fn add_scaled(&self, other: &CurvatureTensor, s: f64) -> CurvatureTensor {
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            *a += *b * s;
        }
        out
    }

    /// `g_{j̄i} g_{l̄k}` built from this tensor's metric.
    pub fn metric_square(&self) -> CurvatureTensor {
        let g = &self.metric;
        CurvatureTensor::from_fn(self.n, g.clone(), |j, i, l, k| g[(j, i)] * g[(l, k)])
    }

    /// `g_{j̄i} g_{l̄k} + g_{j̄k} g_{l̄i}`.
    pub fn metric_square_sym(&self) -> CurvatureTensor {
        let g = &self.metric;
        CurvatureTensor::from_fn(self.n, g.clone(), |j, i, l, k| g[(j, i)] * g[(l, k)] + g[(j, k)] * g[(l, i)])
    }

    /// `R_{j̄i} g_{l̄k}` for a Ricci form `ric`.
    pub fn ricci_times_metric(&self, ric: &CMatrix) -> CurvatureTensor {
        let g = &self.metric;
        CurvatureTensor::from_fn(self.n, g.clone(), |j, i, l, k| ric[(j, i)] * g[(l, k)])
    }

    /// Components in a g-unitary frame (the metric becomes the identity).
    pub fn in_unitary_frame(&self) -> Result<CurvatureTensor> {
        let n = self.n;
        let e = unitary_frame(&self.metric)?;
        let mut out = CurvatureTensor::zeros(n, CMatrix::identity(n));
        out.point = self.point.clone();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = C64::new(0.0, 0.0);
                        for j in 0..n {
                            for i in 0..n {
                                for l in 0..n {
                                    for k in 0..n {
                                        s += e[(j, a)].conj() * e[(i, b)] * e[(l, c)].conj() * e[(k, d)] * self.get(j, i, l, k);
                                    }
                                }
                            }
                        }
                        out.set(a, b, c, d, s);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Columns form a g-orthonormal frame: `E^* G E = I`, with `E = L^{−*}` for `G = L L^*`.
pub fn unitary_frame(g: &CMatrix) -> Result<CMatrix> {
    let l = g.cholesky()?;
    Ok(l.inverse()?.adjoint())
}

/// Ricci form and scalar curvature at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciData {
    /// `R_{j̄i}` stored as `ricci[(j, i)]`.
    pub ricci: CMatrix,
    pub scalar: f64,
}

/// Traces the curvature against the inverse metric.
pub fn ricci_and_scalar(c: &CurvatureTensor) -> Result<RicciData> {
    let n = c.n();
    let ginv = c.metric.inverse()?;
    let mut ric = CMatrix::zeros(n);
    for j in 0..n {
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    s += ginv[(k, l)] * c.get(j, i, l, k);
                }
            }
            ric[(j, i)] = s;
        }
    }
    let mut scalar = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            scalar += ginv[(i, j)] * ric[(j, i)];
        }
    }
    Ok(RicciData { ricci: ric, scalar: scalar.re })
}

/// `R_{j̄il̄k} V̄^j V^i W̄^l W^k`.
pub fn bisectional(c: &CurvatureTensor, v: &[C64], w: &[C64]) -> Result<f64> {
    let n = c.n();
    if v.iter().all(|z| z.norm() == 0.0) || w.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::ZeroVector);
    }
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            for l in 0..n {
                for k in 0..n {
                    s += c.get(j, i, l, k) * v[j].conj() * v[i] * w[l].conj() * w[k];
                }
            }
        }
    }
    Ok(s.re)
}

/// Smooth interpolant `θ = w(1 + wχ)`, `w = τ(1 − τ)`, with χ a Chebyshev
/// series. The endpoint slopes are exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProfile {
    n: usize,
    coeffs: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

/// Default Chebyshev degree for [`SmoothProfile::fit`].
pub const SMOOTH_DEGREE: usize = 28;

fn chebyshev(x: f64, coeffs: &[f64]) -> (f64, f64, f64) {
    // Values, first and second x-derivatives of Σ c_k T_k(x).
    let (mut t0, mut t1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut v = 0.0;
    let mut dv = 0.0;
    let mut sv = 0.0;
    for (k, c) in coeffs.iter().enumerate() {
        let (t, d, s) = match k {
            0 => (t0, d0, s0),
            1 => (t1, d1, s1),
            _ => {
                let t2 = 2.0 * x * t1 - t0;
                let d2 = 2.0 * t1 + 2.0 * x * d1 - d0;
                let s2 = 4.0 * d1 + 2.0 * x * s1 - s0;
                t0 = t1;
                t1 = t2;
                d0 = d1;
                d1 = d2;
                s0 = s1;
                s1 = s2;
                (t2, d2, s2)
            }
        };
        v += c * t;
        dv += c * d;
        sv += c * s;
    }
    (v, dv, sv)
}

impl SmoothProfile {
    /// Least-squares fit of χ on the grid (rows weighted by w² so that the
    /// residual is measured in θ itself).
    pub fn fit(p: &MomentumProfile) -> Result<Self> {
        Self::fit_degree(p, SMOOTH_DEGREE)
    }

    pub fn fit_degree(p: &MomentumProfile, degree: usize) -> Result<Self> {
        let m = p.len();
        let cols = (degree + 1).min(m.saturating_sub(2));
        let rows = m - 2;
        let mut a = Vec::with_capacity(rows * cols);
        let mut b = Vec::with_capacity(rows);
        for i in 1..m - 1 {
            let t = p.tau(i);
            let w = t * (1.0 - t);
            let x = 2.0 * t - 1.0;
            let (mut t0, mut t1) = (1.0, x);
            for k in 0..cols {
                let tk = match k {
                    0 => 1.0,
                    1 => x,
                    _ => {
                        let t2 = 2.0 * x * t1 - t0;
                        t0 = t1;
                        t1 = t2;
                        t2
                    }
                };
                a.push(w * w * tk);
            }
            b.push(p.theta()[i] - w);
        }
        let coeffs = least_squares(&a, rows, cols, &b)?;
        Ok(Self::from_coefficients(p.n(), coeffs))
    }

    pub fn from_coefficients(n: usize, coeffs: Vec<f64>) -> Self {
        Self { n, coeffs, gl: gauss_legendre(48) }
    }

    pub fn fubini_study(n: usize) -> Self {
        Self::from_coefficients(n, vec![0.0])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `(θ, θ', θ'')` at τ.
    pub fn jet(&self, tau: f64) -> (f64, f64, f64) {
        let x = 2.0 * tau - 1.0;
        let (c, cx, cxx) = chebyshev(x, &self.coeffs);
        let (cp, cpp) = (2.0 * cx, 4.0 * cxx);
        let w = tau * (1.0 - tau);
        let wp = 1.0 - 2.0 * tau;
        let wpp = -2.0;
        let th = w + w * w * c;
        let d1 = wp + 2.0 * w * wp * c + w * w * cp;
        let d2 = wpp + 2.0 * (wp * wp + w * wpp) * c + 4.0 * w * wp * cp + w * w * cpp;
        (th, d1, d2)
    }

    pub fn theta(&self, tau: f64) -> f64 {
        self.jet(tau).0
    }

    /// `q = 1/θ − 1/w = −χ / (1 + wχ)`, smooth on the closed interval.
    fn q(&self, tau: f64) -> f64 {
        let (c, _, _) = chebyshev(2.0 * tau - 1.0, &self.coeffs);
        let w = tau * (1.0 - tau);
        -c / (1.0 + w * c)
    }

    /// `Q(τ) = ∫_{1/2}^{τ} q`.
    pub fn big_q(&self, tau: f64) -> f64 {
        let (x, w) = &self.gl;
        let half = 0.5 * (tau - 0.5);
        let mid = 0.5 * (tau + 0.5);
        x.iter().zip(w).map(|(x, w)| w * self.q(mid + half * x)).sum::<f64>() * half
    }

    /// `s = ln r` as a function of τ, normalized so that `s(1/2) = 0`.
    pub fn s_of_tau(&self, tau: f64) -> f64 {
        (tau / (1.0 - tau)).ln() + self.big_q(tau)
    }

    /// Inverts `s(τ)` by safeguarded Newton iteration in τ.
    pub fn tau_of_s(&self, s: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut t = 1.0 / (1.0 + (-s).exp());
        for _ in 0..200 {
            let f = self.s_of_tau(t) - s;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let th = self.theta(t);
            let mut next = t - f * th;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 * t.max(1e-300) || hi - lo < 1e-300 {
                return Ok(next);
            }
            t = next;
        }
        Ok(t)
    }

    /// Resamples onto an `m`-point grid.
    pub fn resample(&self, m: usize) -> Result<MomentumProfile> {
        MomentumProfile::from_fn(self.n, m, |t| self.theta(t))
    }

    /// Closed-form curvature at τ in chart coordinates at the point `(√r(τ), 0, …)`.
    pub fn curvature_at(&self, tau: f64) -> Result<CurvatureTensor> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::BoundaryPoint(tau));
        }
        let n = self.n;
        let (th, d1, d2) = self.jet(tau);
        if !(th > 0.0) {
            return Err(Error::PositivityViolated { tau });
        }
        let (a, b, c) = frame_coefficients(n, tau, th, d1, d2);
        let r = self.s_of_tau(tau).exp();
        let aa = amplitude(n);
        // Metric at (x, 0): diag(Aθ/r, Aτ/r, …).
        let scales: Vec<f64> = (0..n).map(|i| if i == 0 { aa * th / r } else { aa * tau / r }).collect();
        let metric = CMatrix::from_fn(n, |i, j| if i == j { C64::new(scales[i], 0.0) } else { C64::new(0.0, 0.0) });
        let frame = frame_model_tensor(n, a, b, c);
        let mut out = CurvatureTensor::from_fn(n, metric, |j, i, l, k| {
            frame.get(j, i, l, k) * (scales[j] * scales[i] * scales[l] * scales[k]).sqrt()
        });
        out.point = (0..n).map(|i| if i == 0 { C64::new(r.sqrt(), 0.0) } else { C64::new(0.0, 0.0) }).collect();
        Ok(out)
    }

    /// Metric matrix `g_{j̄i}` at a chart point.
    pub fn metric_at(&self, z: &[C64]) -> Result<CMatrix> {
        let n = self.n;
        if z.len() != n {
            return Err(Error::InvalidArgument(format!("chart point has {} coordinates, expected {n}", z.len())));
        }
        let r: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let aa = amplitude(n);
        if !r.is_finite() {
            return Err(Error::ExcludedLocus);
        }
        if r == 0.0 {
            let scale = aa * (-self.big_q(0.0)).exp();
            return Ok(CMatrix::from_fn(n, |i, j| if i == j { C64::new(scale, 0.0) } else { C64::new(0.0, 0.0) }));
        }
        let tau = self.tau_of_s(r.ln())?;
        if !(tau < 1.0 - 1e-13) {
            return Err(Error::ExcludedLocus);
        }
        let th = self.theta(tau);
        let radial = aa * (th - tau) / (r * r);
        Ok(CMatrix::from_fn(n, |j, i| {
            let d = if i == j { aa * tau / r } else { 0.0 };
            C64::new(d, 0.0) + z[i].conj() * z[j] * radial
        }))
    }
}

/// Chart points at which a metric is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub n: usize,
    pub points: Vec<Vec<C64>>,
}

impl ChartSpec {
    pub fn new(n: usize, points: Vec<Vec<C64>>) -> Self {
        Self { n, points }
    }

    /// The `3^{2n}` lattice `center + h Σ σ_a e_a`, `σ_a ∈ {−1, 0, 1}`, over the
    /// real coordinates `(x_1, y_1, …)`. The center is point 0.
    pub fn stencil(center: &[C64], h: f64) -> Self {
        let n = center.len();
        let dims = 2 * n;
        let total = 3_usize.pow(dims as u32);
        let mut points = Vec::with_capacity(total);
        points.push(center.to_vec());
        for code in 0..total {
            let mut c = code;
            let mut p = center.to_vec();
            let mut zero = true;
            for a in 0..dims {
                let sgn = (c % 3) as f64 - 1.0;
                c /= 3;
                if sgn != 0.0 {
                    zero = false;
                }
                let re = a % 2 == 0;
                let delta = if re { C64::new(sgn * h, 0.0) } else { C64::new(0.0, sgn * h) };
                p[a / 2] += delta;
            }
            if !zero {
                points.push(p);
            }
        }
        Self { n, points }
    }
}

/// Metric matrices sampled at chart points.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub n: usize,
    pub chart_points: Vec<Vec<C64>>,
    pub g: Vec<CMatrix>,
    pub det_g: Vec<f64>,
}

impl MetricField {
    /// Evaluates `f` at each chart point and checks positivity.
    pub fn from_fn(chart: &ChartSpec, mut f: impl FnMut(&[C64]) -> Result<CMatrix>) -> Result<Self> {
        let mut g = Vec::with_capacity(chart.points.len());
        let mut det = Vec::with_capacity(chart.points.len());
        for z in &chart.points {
            let m = f(z)?;
            if m.hermitian_defect() > 1e-12 * m.max_abs().max(1.0) {
                return Err(Error::SingularMetric);
            }
            m.cholesky()?;
            det.push(m.determinant().re);
            g.push(m);
        }
        Ok(Self { n: chart.n, chart_points: chart.points.clone(), g, det_g: det })
    }

    fn find(&self, z: &[C64], tol: f64) -> Option<usize> {
        self.chart_points
            .iter()
            .position(|p| p.iter().zip(z).all(|(a, b)| (a - b).norm() <= tol))
    }

    /// Smallest eigenvalue of g over all points.
    pub fn min_eigenvalue(&self) -> f64 {
        self.g
            .iter()
            .map(crate::linalg::hermitian_min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the metric encoded by `p` at the chart points.
pub fn metric_from_profile(p: &MomentumProfile, chart: &ChartSpec) -> Result<MetricField> {
    let sp = SmoothProfile::fit(p)?;
    metric_from_smooth(&sp, chart)
}

pub fn metric_from_smooth(sp: &SmoothProfile, chart: &ChartSpec) -> Result<MetricField> {
    if chart.n != sp.n() {
        return Err(Error::InvalidArgument("chart dimension differs from profile dimension".into()));
    }
    MetricField::from_fn(chart, |z| sp.metric_at(z))
}

/// Closed-form curvature at moment value τ (chart point `(√r(τ), 0, …)`).
pub fn curvature_closed_form(p: &MomentumProfile, tau: f64) -> Result<CurvatureTensor> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::BoundaryPoint(tau));
    }
    SmoothProfile::fit(p)?.curvature_at(tau)
}

/// Finite-difference curvature at chart point `point` of `m`, using the
/// lattice neighbours at spacing `h`:
/// `R_{j̄il̄k} = −∂_k∂_l̄ g_{j̄i} + g^{pq̄} ∂_k g_{q̄i} ∂_l̄ g_{j̄p}`.
pub fn curvature_fd_oracle(m: &MetricField, point: usize, h: f64) -> Result<CurvatureTensor> {
    let n = m.n;
    let dims = 2 * n;
    let center = m.chart_points.get(point).ok_or(Error::StencilOutsideChart)?.clone();
    let tol = 1e-6 * h;
    let shifted = |offs: &[(usize, f64)]| -> Result<&CMatrix> {
        let mut z = center.clone();
        for &(a, s) in offs {
            let d = if a % 2 == 0 { C64::new(s * h, 0.0) } else { C64::new(0.0, s * h) };
            z[a / 2] += d;
        }
        m.find(&z, tol).map(|i| &m.g[i]).ok_or(Error::StencilOutsideChart)
    };
    let g0 = &m.g[point];
    let zero = CMatrix::zeros(n);
    let mut d = vec![zero.clone(); dims];
    let mut dd = vec![vec![zero.clone(); dims]; dims];
    for a in 0..dims {
        let gp = shifted(&[(a, 1.0)])?;
        let gm = shifted(&[(a, -1.0)])?;
        d[a] = CMatrix::from_fn(n, |r, c| (gp[(r, c)] - gm[(r, c)]) / (2.0 * h));
        dd[a][a] = CMatrix::from_fn(n, |r, c| (gp[(r, c)] - g0[(r, c)] * 2.0 + gm[(r, c)]) / (h * h));
        for b in a + 1..dims {
            let pp = shifted(&[(a, 1.0), (b, 1.0)])?;
            let pm = shifted(&[(a, 1.0), (b, -1.0)])?;
            let mp = shifted(&[(a, -1.0), (b, 1.0)])?;
            let mm = shifted(&[(a, -1.0), (b, -1.0)])?;
            let v = CMatrix::from_fn(n, |r, c| (pp[(r, c)] - pm[(r, c)] - mp[(r, c)] + mm[(r, c)]) / (4.0 * h * h));
            dd[a][b] = v.clone();
            dd[b][a] = v;
        }
    }
    let i_ = C64::new(0.0, 1.0);
    // Wirtinger derivatives ∂_k and ∂_l̄ of each metric entry.
    let dk = |k: usize| CMatrix::from_fn(n, |r, c| (d[2 * k][(r, c)] - i_ * d[2 * k + 1][(r, c)]) * 0.5);
    let dlbar = |l: usize| CMatrix::from_fn(n, |r, c| (d[2 * l][(r, c)] + i_ * d[2 * l + 1][(r, c)]) * 0.5);
    let dkdl = |k: usize, l: usize| {
        CMatrix::from_fn(n, |r, c| {
            (dd[2 * k][2 * l][(r, c)]
                + dd[2 * k + 1][2 * l + 1][(r, c)]
                + i_ * (dd[2 * k][2 * l + 1][(r, c)] - dd[2 * k + 1][2 * l][(r, c)]))
                * 0.25
        })
    };
    let ginv = g0.inverse()?;
    let dks: Vec<CMatrix> = (0..n).map(dk).collect();
    let dls: Vec<CMatrix> = (0..n).map(dlbar).collect();
    let mut out = CurvatureTensor::zeros(n, g0.clone());
    out.point = center;
    for k in 0..n {
        for l in 0..n {
            let second = dkdl(k, l);
            for j in 0..n {
                for i in 0..n {
                    let mut v = -second[(j, i)];
                    for p in 0..n {
                        for q in 0..n {
                            v += ginv[(p, q)] * dks[k][(q, i)] * dls[l][(j, p)];
                        }
                    }
                    out.set(j, i, l, k, v);
                }
            }
        }
    }
    Ok(out)
}

/// Normalized Ricci potential on the profile grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciPotential {
    pub n: usize,
    pub h: f64,
    pub u: Vec<f64>,
    /// `du/dτ` per node.
    pub u_tau: Vec<f64>,
    /// Additive constant applied to enforce `∫e^{−u}ωⁿ = ∫ωⁿ`.
    pub norm_constant: f64,
}

impl RicciPotential {
    pub fn zero(n: usize, m: usize) -> Self {
        let h = 1.0 / (m - 1) as f64;
        Self { n, h, u: vec![0.0; m], u_tau: vec![0.0; m], norm_constant: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `max u − min u`.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = self.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }

    /// `∫e^{−u}ωⁿ / ∫ωⁿ`.
    pub fn normalization_ratio(&self) -> f64 {
        let tau: Vec<f64> = (0..self.len()).map(|i| i as f64 * self.h).collect();
        let w: Vec<f64> = self.u.iter().zip(&tau).map(|(u, t)| (-u).exp() * volume_density(self.n, *t)).collect();
        integral(&w, self.h) / total_volume(self.n)
    }

    /// Scales u (and its derivative) and renormalizes; used for synthetic fixtures.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let raw: Vec<f64> = self.u.iter().map(|v| v * factor).collect();
        let u_tau = self.u_tau.iter().map(|v| v * factor).collect();
        normalize(self.n, self.h, raw, u_tau)
    }
}

fn normalize(n: usize, h: f64, raw: Vec<f64>, u_tau: Vec<f64>) -> Result<RicciPotential> {
    let m = raw.len();
    let w: Vec<f64> = (0..m).map(|i| (-raw[i]).exp() * volume_density(n, i as f64 * h)).collect();
    let ratio = integral(&w, h) / total_volume(n);
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Quadrature(format!("normalization integral ratio {ratio}")));
    }
    let c = ratio.ln();
    Ok(RicciPotential { n, h, u: raw.iter().map(|v| v + c).collect(), u_tau, norm_constant: c })
}

/// Solves `∂∂̄u = g − Ric` by integrating `u_τ = (Aτ − F)/θ`, then fixes the constant.
pub fn ricci_potential(p: &MomentumProfile) -> Result<RicciPotential> {
    ricci_potential_from(&ProfileGeometry::new(p))
}

pub fn ricci_potential_from(geo: &ProfileGeometry) -> Result<RicciPotential> {
    let n = geo.n;
    let m = geo.len();
    let aa = amplitude(n);
    let mut ut = vec![0.0; m];
    for i in 1..m - 1 {
        ut[i] = (aa * geo.tau[i] - geo.f[i]) / geo.theta[i];
    }
    ut[0] = (aa - geo.f_prime[0]) / geo.d1[0];
    ut[m - 1] = (aa - geo.f_prime[m - 1]) / geo.d1[m - 1];
    if ut.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("non-integrable Ricci potential residual".into()));
    }
    let raw = cumulative_integral(&ut, geo.h);
    normalize(n, geo.h, raw, ut)
}
