//! Y, Z, Futaki invariant, K-energy and soliton checks on flow snapshots.
//!
//! The gradient of the Ricci potential is radial: `∇u = (u_τ/A)·E` with `E` the
//! Euler field, so `|∇u|² = θu_τ²/A` and `Ric(∇u, ∇ū) = ρ_r |∇u|²`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowState, TimeSeries};
use crate::geometry::{amplitude, ProfileGeometry, RicciPotential, SmoothProfile};
use crate::linalg::C64;
use crate::numerics::{jets, Order};
use crate::spectral::{self, HolomorphicBasis, VectorFieldMode};

/// `∂̄`-energy ratio above which a field is rejected as non-holomorphic.
pub const HOLOMORPHIC_TOL: f64 = 1e-8;

/// Angular nodes used to average the phase `e^{ijα}` of a sector.
pub const ANGULAR_NODES: usize = 16;

fn grad_sq(geo: &ProfileGeometry, u: &RicciPotential) -> Vec<f64> {
    let a = amplitude(geo.n);
    (0..geo.len()).map(|i| geo.theta[i] * u.u_tau[i] * u.u_tau[i] / a).collect()
}

/// `Y = ∫|∇u|² ωⁿ`.
pub fn compute_y(s: &FlowState) -> f64 {
    s.geometry.integrate(&grad_sq(&s.geometry, &s.u))
}

/// The two terms of Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTerms {
    /// `∫|∇u|²(R − n)`.
    pub scalar_term: f64,
    /// `∫ Ric(∇u, ∇ū) − |∇u|²`.
    pub ricci_term: f64,
    pub total: f64,
}

pub fn compute_z(s: &FlowState) -> ZTerms {
    let geo = &s.geometry;
    let nf = geo.n as f64;
    let g2 = grad_sq(geo, &s.u);
    let f1: Vec<f64> = g2.iter().zip(&geo.scalar).map(|(g, r)| g * (r - nf)).collect();
    let f2: Vec<f64> = g2.iter().zip(&geo.rho_radial).map(|(g, r)| g * (r - 1.0)).collect();
    let scalar_term = geo.integrate(&f1);
    let ricci_term = geo.integrate(&f2);
    ZTerms { scalar_term, ricci_term, total: scalar_term + ricci_term }
}

/// `u_ττ` at the nodes.
fn u_second(s: &FlowState) -> Vec<f64> {
    jets(&s.u.u_tau, s.u.h, Order::Fourth).d1
}

/// `sup |∂̄∇u| = sup θ|u_ττ|/A`.
pub fn soliton_residual(s: &FlowState) -> f64 {
    let a = amplitude(s.n());
    let utt = u_second(s);
    s.geometry.theta.iter().zip(&utt).fold(0.0_f64, |m, (t, v)| m.max(t * v.abs() / a))
}

/// `∫ Ric(∇u,∇ū) − |∇u|²` minus `∫(n − R)|∇u|²`; these agree on solitons.
pub fn soliton_identity_check(s: &FlowState) -> f64 {
    let z = compute_z(s);
    z.ricci_term + z.scalar_term
}

/// Phase average `(1/N) Σ e^{ijα_k}` on equally spaced angles.
fn phase_average(j: i32) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..ANGULAR_NODES {
        let a = 2.0 * PI * k as f64 / ANGULAR_NODES as f64;
        acc += C64::from_polar(1.0, j as f64 * a);
    }
    acc / ANGULAR_NODES as f64
}

/// `r^{j/2}` at grid nodes, with exponential coordinate `s = ln r` from a smooth fit.
fn radial_power(geo: &ProfileGeometry, smooth: &SmoothProfile, j: i32) -> Vec<Option<f64>> {
    geo.tau
        .iter()
        .map(|&t| {
            if j == 0 {
                Some(1.0)
            } else if t <= 0.0 || t >= 1.0 {
                None
            } else {
                Some((0.5 * j as f64 * smooth.s_of_tau(t)).exp())
            }
        })
        .collect()
}

/// Fills endpoint gaps by quadratic extrapolation from the neighbouring nodes.
fn fill_ends(v: Vec<Option<f64>>) -> Vec<f64> {
    let m = v.len();
    let mut out: Vec<f64> = v.iter().map(|x| x.unwrap_or(0.0)).collect();
    if m >= 4 {
        if v[0].is_none() {
            out[0] = 3.0 * out[1] - 3.0 * out[2] + out[3];
        }
        if v[m - 1].is_none() {
            out[m - 1] = 3.0 * out[m - 2] - 3.0 * out[m - 3] + out[m - 4];
        }
    }
    out
}

fn radial_moment(geo: &ProfileGeometry, pw: &[Option<f64>], f: impl Fn(usize) -> f64) -> f64 {
    let vals: Vec<Option<f64>> = pw.iter().enumerate().map(|(i, p)| p.map(|p| p * f(i))).collect();
    geo.integrate(&fill_ends(vals))
}

fn check_holomorphic(geo: &ProfileGeometry, mode: &VectorFieldMode) -> Result<()> {
    if mode.j.unsigned_abs() > 1 || mode.samples.len() != geo.len() {
        return Err(Error::NotHolomorphic(f64::INFINITY));
    }
    let k = if geo.n == 1 { 1 } else { mode.j.max(0) as usize };
    let ops = spectral::build_l(geo, k.max(1))?;
    let op = ops
        .iter()
        .find(|o| o.j == mode.j)
        .ok_or(Error::NotHolomorphic(f64::INFINITY))?;
    let ratio = op.energy(&mode.samples).abs() / op.inner(&mode.samples, &mode.samples);
    if !(ratio <= HOLOMORPHIC_TOL) {
        return Err(Error::NotHolomorphic(ratio));
    }
    Ok(())
}

/// `Fut(V) = ∫ V(u) ωⁿ` for a field `V = e^{ijα} r^{j/2} g E`, where `V(u) = e^{ijα} r^{j/2} g θ u_τ`.
pub fn futaki(geo: &ProfileGeometry, u: &RicciPotential, mode: &VectorFieldMode) -> Result<C64> {
    check_holomorphic(geo, mode)?;
    if u.len() != geo.len() {
        return Err(Error::GridMismatch("potential and geometry grids differ".into()));
    }
    let phase = phase_average(mode.j);
    let radial = if mode.j == 0 {
        let f: Vec<f64> = (0..geo.len()).map(|i| mode.samples[i] * geo.theta[i] * u.u_tau[i]).collect();
        geo.integrate(&f)
    } else {
        let p = crate::geometry::MomentumProfile::new(geo.n, geo.theta.clone())?;
        let smooth = SmoothProfile::fit(&p)?;
        let pw = radial_power(geo, &smooth, mode.j);
        radial_moment(geo, &pw, |i| mode.samples[i] * geo.theta[i] * u.u_tau[i])
    };
    Ok(phase * radial)
}

/// Futaki values on the representable holomorphic basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutakiReport {
    pub basis_labels: Vec<String>,
    /// `[re, im]` per basis element.
    pub values: Vec<[f64; 2]>,
    pub metric_id: String,
}

impl FutakiReport {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v[0].hypot(v[1])))
    }
}

pub fn futaki_report(s: &FlowState, metric_id: &str) -> Result<FutakiReport> {
    let basis = spectral::holomorphic_fields(s.n(), &s.geometry, &s.u)?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for mode in &basis.modes {
        let v = futaki(&s.geometry, &s.u, mode)?;
        labels.push(mode.label.clone());
        values.push([v.re, v.im]);
    }
    Ok(FutakiReport { basis_labels: labels, values, metric_id: metric_id.into() })
}

/// Orthogonal projection of `∇u` onto the holomorphic fields under `⟨,⟩_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<C64>,
    /// `Fut(π∇u)`.
    pub futaki: C64,
    /// `max_k |⟨∇u − π, ξ_k⟩_0|`.
    pub residual_orthogonality: f64,
    /// Relative norm of `∇u − π`.
    pub residual_norm: f64,
}

/// Projects `∇u` onto `basis`, solving the Gram normal equations.
pub fn futaki_projection(s: &FlowState, basis: &HolomorphicBasis) -> Result<Projection> {
    let geo = &s.geometry;
    let u = &s.u;
    let a = amplitude(s.n());
    let d = basis.dim();
    if d == 0 {
        return Err(Error::BasisDegenerate(f64::INFINITY));
    }
    let cond = basis.condition_number(spectral::Weighting::Plain);
    if !(cond < 1e8) {
        return Err(Error::BasisDegenerate(cond));
    }
    let p = crate::geometry::MomentumProfile::new(geo.n, geo.theta.clone())?;
    let smooth = SmoothProfile::fit(&p)?;
    // Gram entries and right-hand sides in the same units: |V_k|² = r^j g² Aθ.
    let mut gram = vec![C64::new(0.0, 0.0); d * d];
    let mut rhs = vec![C64::new(0.0, 0.0); d];
    let mut futs = vec![C64::new(0.0, 0.0); d];
    for (k, mk) in basis.modes.iter().enumerate() {
        check_holomorphic(geo, mk)?;
        let pw = radial_power(geo, &smooth, mk.j);
        for (l, ml) in basis.modes.iter().enumerate() {
            if ml.j != mk.j || ml.copy != mk.copy {
                continue;
            }
            let pw2 = radial_power(geo, &smooth, 2 * mk.j);
            let v = radial_moment(geo, &pw2, |i| mk.samples[i] * ml.samples[i] * a * geo.theta[i]);
            gram[k * d + l] = C64::new(v, 0.0);
        }
        // ⟨∇u, V_k⟩_0 = avg(e^{−ijα}) ∫ r^{j/2} g θ u_τ.
        let radial = radial_moment(geo, &pw, |i| mk.samples[i] * geo.theta[i] * u.u_tau[i]);
        rhs[k] = phase_average(-mk.j) * radial;
        futs[k] = futaki(geo, u, mk)?;
    }
    let coefficients = solve_complex(&gram, &rhs, d)?;
    let futaki = coefficients.iter().zip(&futs).map(|(c, f)| c * f).sum();
    let mut resid = 0.0_f64;
    for k in 0..d {
        let mut g = rhs[k];
        for l in 0..d {
            g -= gram[k * d + l] * coefficients[l];
        }
        resid = resid.max(g.norm());
    }
    let norm_grad = geo.integrate(&grad_sq(geo, u));
    let proj_sq: f64 = (0..d)
        .map(|k| (0..d).map(|l| (coefficients[k].conj() * gram[k * d + l] * coefficients[l]).re).sum::<f64>())
        .sum();
    let residual_norm = if norm_grad > 0.0 { ((norm_grad - proj_sq).max(0.0) / norm_grad).sqrt() } else { 0.0 };
    Ok(Projection { coefficients, futaki, residual_orthogonality: resid, residual_norm })
}

fn solve_complex(a: &[C64], b: &[C64], d: usize) -> Result<Vec<C64>> {
    let mut m = crate::linalg::CMatrix::from_fn(d, |r, c| a[r * d + c]);
    m = m.inverse()?;
    Ok(m.mul_vec(b))
}

/// Real part of `Fut(π∇u)` on the full representable basis.
pub fn futaki_projection_value(s: &FlowState) -> f64 {
    // Only the Euler field carries a nonzero phase average; its projection is closed form.
    let geo = &s.geometry;
    let a = amplitude(s.n());
    let f: Vec<f64> = (0..geo.len()).map(|i| geo.theta[i] * s.u.u_tau[i]).collect();
    let fut = geo.integrate(&f);
    let norm = a * geo.integrate(&geo.theta);
    fut * fut / norm
}

/// K-energy along a run from `dK/dt = −Y`, `K(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEnergy {
    pub t: Vec<f64>,
    pub k: Vec<f64>,
    /// Trapezoid error bound of each interval.
    pub error_bound: Vec<f64>,
    pub monotone: bool,
}

pub fn kenergy_along_run(series: &TimeSeries) -> Result<KEnergy> {
    let t = series.times();
    let y: Vec<f64> = series.samples.iter().map(|s| s.y).collect();
    kenergy_from(&t, &y)
}

pub fn kenergy_from(t: &[f64], y: &[f64]) -> Result<KEnergy> {
    let m = t.len();
    if m < 2 {
        return Err(Error::InsufficientSamples { need: 2, have: m });
    }
    let second = |i: usize| -> f64 {
        if m < 3 {
            return 0.0;
        }
        let c = i.clamp(1, m - 2);
        let h1 = t[c] - t[c - 1];
        let h2 = t[c + 1] - t[c];
        2.0 * ((y[c + 1] - y[c]) / h2 - (y[c] - y[c - 1]) / h1) / (h1 + h2)
    };
    let mut k = vec![0.0; m];
    let mut bound = Vec::with_capacity(m - 1);
    let mut monotone = true;
    for i in 0..m - 1 {
        let dt = t[i + 1] - t[i];
        k[i + 1] = k[i] - 0.5 * dt * (y[i] + y[i + 1]);
        let e = dt.powi(3) / 12.0 * second(i).abs().max(second(i + 1).abs());
        bound.push(e);
        if k[i + 1] > k[i] + e {
            monotone = false;
        }
    }
    Ok(KEnergy { t: t.to_vec(), k, error_bound: bound, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fubini_study_profile_on, MomentumProfile};

    fn perturbed(n: usize, m: usize) -> MomentumProfile {
        crate::geometry::perturbed_profile(n, m, 0.8, 0.1)
        .unwrap()
    }

    #[test]
    fn round_metric_functionals_vanish() {
        for n in 1..=2 {
            let s = FlowState::new(fubini_study_profile_on(n, 129).unwrap()).unwrap();
            assert!(compute_y(&s) < 1e-20);
            assert!(compute_z(&s).total.abs() < 1e-12);
            assert!(soliton_residual(&s) < 1e-9);
            assert!(soliton_identity_check(&s).abs() < 1e-12);
            let rep = futaki_report(&s, "fs").unwrap();
            assert!(rep.max_abs() < 1e-12);
        }
    }

    #[test]
    fn y_is_quadratic_in_u() {
        let p = perturbed(1, 257);
        let s = FlowState::new(p.clone()).unwrap();
        let doubled = FlowState::with_potential(p, s.u.scaled(2.0).unwrap()).unwrap();
        assert!((compute_y(&doubled) - 4.0 * compute_y(&s)).abs() <= 1e-12 * compute_y(&s));
        assert!(compute_y(&s) > 0.0);
    }

    #[test]
    fn synthetic_soliton_on_round_metric() {
        // u = c(τ − 1/2) on Fubini–Study: ∇u = (c/A)E is holomorphic.
        let p = fubini_study_profile_on(1, 129).unwrap();
        let mut u = RicciPotential::zero(1, 129);
        for i in 0..129 {
            let t = p.tau(i);
            u.u[i] = 0.3 * (t - 0.5);
            u.u_tau[i] = 0.3;
        }
        let s = FlowState::with_potential(p, u).unwrap();
        assert!(soliton_residual(&s) <= 1e-8);
        let z = compute_z(&s);
        assert!(z.scalar_term.abs() < 1e-12 && z.total.abs() <= 1e-6);
        assert!(soliton_identity_check(&s).abs() <= 1e-6);
        let basis = spectral::holomorphic_fields(1, &s.geometry, &s.u).unwrap();
        let pr = futaki_projection(&s, &basis).unwrap();
        assert!(pr.residual_norm < 1e-6, "{}", pr.residual_norm);
        assert!(pr.residual_orthogonality < 1e-8);
    }

    #[test]
    fn projection_futaki_matches_closed_form() {
        for n in 1..=2 {
            let s = FlowState::new(perturbed(n, 129)).unwrap();
            let basis = spectral::holomorphic_fields(n, &s.geometry, &s.u).unwrap();
            let pr = futaki_projection(&s, &basis).unwrap();
            let closed = futaki_projection_value(&s);
            assert!(closed > 0.0);
            assert!((pr.futaki.re - closed).abs() <= 1e-8 * closed, "n={n}: {} vs {closed}", pr.futaki);
            assert!(pr.futaki.im.abs() <= 1e-10);
        }
    }

    #[test]
    fn non_holomorphic_field_rejected() {
        let s = FlowState::new(perturbed(1, 129)).unwrap();
        let mode = VectorFieldMode {
            j: 0,
            copy: 0,
            n: 1,
            samples: s.geometry.tau.clone(),
            label: "tau E".into(),
        };
        assert!(matches!(futaki(&s.geometry, &s.u, &mode), Err(Error::NotHolomorphic(_))));
    }

    #[test]
    fn kenergy_monotone_and_zero_start() {
        let t: Vec<f64> = (0..250).map(|k| k as f64 * 0.02).collect();
        let y: Vec<f64> = t.iter().map(|t| (-4.0 * t).exp()).collect();
        let k = kenergy_from(&t, &y).unwrap();
        assert_eq!(k.k[0], 0.0);
        assert!(k.monotone);
        assert!((k.k[249] + (1.0 - (-4.0 * t[249]).exp()) / 4.0).abs() < 1e-3);
        assert!(kenergy_from(&t[..1], &y[..1]).is_err());
    }
}
