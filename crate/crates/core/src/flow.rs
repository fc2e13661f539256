//! Normalized Kähler-Ricci flow `∂_t g = g − Ric` on momentum profiles.
//!
//! At fixed moment coordinate the flow reads
//!
//! ```text
//! ∂_t θ = θ v' − θ' v,    v = τ − F/A,    F = n − (n−1)θ/τ − θ',
//! ```
//!
//! a quasilinear parabolic equation with diffusion coefficient θ/A and
//! Dirichlet data θ(0) = θ(1) = 0. Central second-order stencils are exact on
//! quadratics, so Fubini–Study is an exact fixed point of the discrete flow.
//! The volume `∫ωⁿ = (πA)ⁿ` does not depend on θ, so the class is preserved
//! identically and no rescaling is ever needed.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals;
use crate::geometry::{amplitude, ricci_potential_from, MomentumProfile, ProfileGeometry, RicciPotential};
use crate::linalg::solve_tridiagonal;
use crate::positivity;
use crate::spectral::{self, SpectralReport};

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Rk4,
    /// Linearly implicit diffusion, explicit remainder (first order in time).
    Imex,
}

/// Flow parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Monitor cadence in steps.
    pub sample_every: usize,
    /// Expensive monitors (λ, Chen margin) every this many samples.
    pub expensive_every: usize,
    pub scheme: Scheme,
    /// Fraction of the stability limit `h² / max(θ/A)` allowed for dt.
    pub cfl_safety: f64,
    pub sectors: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            t_max: 1.0,
            sample_every: 1000,
            expensive_every: 10,
            scheme: Scheme::Rk4,
            cfl_safety: 0.5,
            sectors: spectral::DEFAULT_SECTORS,
            seed: 0,
            restarts: positivity::DEFAULT_RESTARTS,
        }
    }
}

impl FlowConfig {
    /// Largest admissible dt for this profile.
    pub fn dt_limit(&self, p: &MomentumProfile) -> f64 {
        let h = p.h();
        let a = amplitude(p.n());
        let dmax = p.theta().iter().fold(0.0_f64, |m, v| m.max(v / a));
        self.cfl_safety * h * h / dmax.max(1e-300)
    }

    /// Checks the parameter guards, including the CFL limit.
    pub fn validate(&self, p: &MomentumProfile) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidArgument("t_max must be non-negative".into()));
        }
        if self.sample_every == 0 || self.expensive_every == 0 {
            return Err(Error::InvalidArgument("monitor cadence must be at least 1".into()));
        }
        if !(self.cfl_safety > 0.0) {
            return Err(Error::InvalidArgument("cfl_safety must be positive".into()));
        }
        let limit = self.dt_limit(p);
        if self.dt > limit {
            return Err(Error::Cfl { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Snapshot of the flow with the Ricci potential re-solved from the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub step: usize,
    pub profile: MomentumProfile,
    pub geometry: ProfileGeometry,
    pub u: RicciPotential,
    pub spectral: Option<SpectralReport>,
}

impl FlowState {
    pub fn new(profile: MomentumProfile) -> Result<Self> {
        Self::at(profile, 0.0, 0)
    }

    pub fn at(profile: MomentumProfile, t: f64, step: usize) -> Result<Self> {
        let geometry = ProfileGeometry::new(&profile);
        let u = ricci_potential_from(&geometry)?;
        Ok(Self { t, step, profile, geometry, u, spectral: None })
    }

    /// State with a prescribed (synthetic) potential in place of the solved one.
    pub fn with_potential(profile: MomentumProfile, u: RicciPotential) -> Result<Self> {
        if u.len() != profile.len() {
            return Err(Error::GridMismatch("potential and profile grids differ".into()));
        }
        let geometry = ProfileGeometry::new(&profile);
        Ok(Self { t: 0.0, step: 0, profile, geometry, u, spectral: None })
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }
}

/// Right-hand side of the reduced flow at interior nodes (endpoints stay 0).
pub fn flow_rhs(n: usize, theta: &[f64], out: &mut [f64]) {
    let m = theta.len();
    let h = 1.0 / (m - 1) as f64;
    let a = amplitude(n);
    let nf = n as f64;
    out[0] = 0.0;
    out[m - 1] = 0.0;
    for i in 1..m - 1 {
        let t = i as f64 * h;
        let th = theta[i];
        let d1 = (theta[i + 1] - theta[i - 1]) / (2.0 * h);
        let d2 = (theta[i + 1] - 2.0 * th + theta[i - 1]) / (h * h);
        let f = nf - (nf - 1.0) * th / t - d1;
        let fp = -(nf - 1.0) * (d1 / t - th / (t * t)) - d2;
        let v = t - f / a;
        let vp = 1.0 - fp / a;
        out[i] = th * vp - d1 * v;
    }
}

struct Workspace {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        Self { k: [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]], tmp: vec![0.0; m] }
    }
}

fn rk4_step(n: usize, theta: &mut [f64], dt: f64, ws: &mut Workspace) {
    let m = theta.len();
    let [k1, k2, k3, k4] = &mut ws.k;
    let tmp = &mut ws.tmp;
    flow_rhs(n, theta, k1);
    for i in 0..m {
        tmp[i] = theta[i] + 0.5 * dt * k1[i];
    }
    flow_rhs(n, tmp, k2);
    for i in 0..m {
        tmp[i] = theta[i] + 0.5 * dt * k2[i];
    }
    flow_rhs(n, tmp, k3);
    for i in 0..m {
        tmp[i] = theta[i] + dt * k3[i];
    }
    flow_rhs(n, tmp, k4);
    for i in 0..m {
        theta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn imex_step(n: usize, theta: &mut [f64], dt: f64, ws: &mut Workspace) -> Result<()> {
    let m = theta.len();
    let h = 1.0 / (m - 1) as f64;
    let a = amplitude(n);
    let rhs = &mut ws.k[0];
    flow_rhs(n, theta, rhs);
    // Interior unknowns 1..m-1; diffusion c θ'' with c = θ/A frozen at the old level.
    let k = m - 2;
    let mut lower = vec![0.0; k.saturating_sub(1)];
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k.saturating_sub(1)];
    let mut b = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        let c = theta[i] / a;
        let s = dt * c / (h * h);
        let d2 = (theta[i + 1] - 2.0 * theta[i] + theta[i - 1]) / (h * h);
        diag[r] = 1.0 + 2.0 * s;
        if r > 0 {
            lower[r - 1] = -s;
        }
        if r + 1 < k {
            upper[r] = -s;
        }
        b[r] = theta[i] + dt * (rhs[i] - c * d2);
    }
    let x = solve_tridiagonal(&lower, &diag, &upper, &b)?;
    theta[1..m - 1].copy_from_slice(&x);
    Ok(())
}

fn check_positive(theta: &[f64], step: usize) -> Result<()> {
    let m = theta.len();
    let h = 1.0 / (m - 1) as f64;
    for (i, v) in theta.iter().enumerate().take(m - 1).skip(1) {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::PositivityLoss { step, tau: i as f64 * h });
        }
    }
    Ok(())
}

/// Advances the profile samples by `steps` steps of size `dt`.
pub fn advance(n: usize, theta: &mut [f64], dt: f64, steps: usize, scheme: Scheme, first_step: usize) -> Result<()> {
    let mut ws = Workspace::new(theta.len());
    for s in 0..steps {
        match scheme {
            Scheme::Rk4 => rk4_step(n, theta, dt, &mut ws),
            Scheme::Imex => imex_step(n, theta, dt, &mut ws)?,
        }
        check_positive(theta, first_step + s + 1)?;
    }
    Ok(())
}

/// One flow step; the potential is re-solved on the new profile.
pub fn krf_step(s: &FlowState, dt: f64, scheme: Scheme) -> Result<FlowState> {
    let mut theta = s.profile.theta().to_vec();
    advance(s.n(), &mut theta, dt, 1, scheme, s.step)?;
    let p = s.profile.with_theta(theta)?;
    FlowState::at(p, s.t + dt, s.step + 1)
}

/// Monitors recorded at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub step: usize,
    pub sup_u: f64,
    pub sup_grad_u: f64,
    pub sup_r: f64,
    pub sup_r_minus_n: f64,
    pub sup_ric_minus_g: f64,
    pub int_r_minus_n_sq: f64,
    pub y: f64,
    pub z: f64,
    pub lambda: Option<f64>,
    pub lambda_tilde: Option<f64>,
    pub refinement_error: Option<f64>,
    pub futaki_proj: f64,
    pub chen_margin: Option<f64>,
    pub griffiths_margin: f64,
    pub soliton_residual: f64,
    pub osc_u: f64,
    /// Smallest Ricci eigenvalue relative to g.
    pub nu: f64,
    /// `min θ / (τ(1−τ))` over the interior: density of ωⁿ in s against the reference.
    pub volume_proxy: f64,
    /// Volume rescaling applied at this step (identically 0 in moment coordinates).
    pub volume_correction: f64,
}

/// Sampled monitors of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub n: usize,
    pub grid_points: usize,
    pub samples: Vec<Sample>,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Values of a monitor by name; `None` for samples where it was not computed.
    pub fn monitor(&self, key: &str) -> Result<Vec<Option<f64>>> {
        let get = |s: &Sample| -> Option<Option<f64>> {
            Some(match key {
                "t" => Some(s.t),
                "sup_u" => Some(s.sup_u),
                "sup_grad_u" => Some(s.sup_grad_u),
                "sup_R" => Some(s.sup_r),
                "sup_R_minus_n" => Some(s.sup_r_minus_n),
                "sup_ric_minus_g" => Some(s.sup_ric_minus_g),
                "int_R_minus_n_sq" => Some(s.int_r_minus_n_sq),
                "Y" => Some(s.y),
                "Z" => Some(s.z),
                "lambda" => s.lambda,
                "lambda_tilde" => s.lambda_tilde,
                "futaki_proj" => Some(s.futaki_proj),
                "chen_margin" => s.chen_margin,
                "griffiths_margin" => Some(s.griffiths_margin),
                "soliton_residual" => Some(s.soliton_residual),
                _ => return None,
            })
        };
        self.samples
            .iter()
            .map(|s| get(s).ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown monitor `{key}`"))))
            .collect()
    }

    /// True when the Griffiths margin was nonnegative at every sample.
    pub fn positivity_preserved(&self) -> bool {
        self.samples.iter().all(|s| s.griffiths_margin >= 0.0)
    }
}

/// Smallest bisectional curvature over all grid nodes.
pub fn griffiths_margin(geo: &ProfileGeometry, seed: u64, restarts: usize) -> f64 {
    (0..geo.len())
        .map(|i| positivity::griffiths_min_frame(&geo.frame_tensor(i), seed, restarts).value)
        .fold(f64::INFINITY, f64::min)
}

/// Chen cone margin minimized over grid nodes.
pub fn chen_margin(geo: &ProfileGeometry, seed: u64, restarts: usize) -> f64 {
    (0..geo.len())
        .map(|i| positivity::chen_cone_frame(&geo.frame_tensor(i), seed, restarts))
        .fold(f64::INFINITY, f64::min)
}

/// Evaluates every monitor on a snapshot.
pub fn sample(state: &mut FlowState, cfg: &FlowConfig, expensive: bool) -> Result<Sample> {
    let geo = &state.geometry;
    let n = state.n();
    let nf = n as f64;
    let m = geo.len();
    let a = amplitude(n);
    let u = &state.u;
    let sup_u = u.u.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let sup_grad_u = (0..m).fold(0.0_f64, |s, i| s.max((geo.theta[i] * u.u_tau[i] * u.u_tau[i] / a).sqrt()));
    let sup_r = geo.scalar.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let sup_r_minus_n = geo.scalar.iter().fold(0.0_f64, |s, v| s.max((v - nf).abs()));
    let sq: Vec<f64> = geo.scalar.iter().map(|r| (r - nf) * (r - nf)).collect();
    let int_r_minus_n_sq = geo.integrate(&sq);
    let y = functionals::compute_y(state);
    let z = functionals::compute_z(state).total;
    let futaki_proj = functionals::futaki_projection_value(state);
    let soliton_residual = functionals::soliton_residual(state);
    let griffiths = griffiths_margin(geo, cfg.seed, cfg.restarts);
    let nu = geo
        .rho_radial
        .iter()
        .zip(&geo.rho_angular)
        .fold(f64::INFINITY, |s, (a, b)| s.min(*a).min(*b));
    let volume_proxy = (1..m - 1)
        .map(|i| geo.theta[i] / (geo.tau[i] * (1.0 - geo.tau[i])))
        .fold(f64::INFINITY, f64::min);
    let (lambda, lambda_tilde, refinement_error, chen) = if expensive {
        let rep = spectral::spectral_report(&state.profile, cfg.sectors)?;
        let out = (Some(rep.lambda), Some(rep.lambda_tilde), Some(rep.refinement_error));
        state.spectral = Some(rep);
        (out.0, out.1, out.2, Some(chen_margin(geo, cfg.seed, cfg.restarts)))
    } else {
        (None, None, None, None)
    };
    Ok(Sample {
        t: state.t,
        step: state.step,
        sup_u,
        sup_grad_u,
        sup_r,
        sup_r_minus_n,
        sup_ric_minus_g: geo.sup_ric_minus_g(),
        int_r_minus_n_sq,
        y,
        z,
        lambda,
        lambda_tilde,
        refinement_error,
        futaki_proj,
        chen_margin: chen,
        griffiths_margin: griffiths,
        soliton_residual,
        osc_u: u.oscillation(),
        nu,
        volume_proxy,
        volume_correction: 0.0,
    })
}

/// Result of a run: the series, the final state and every sampled state.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub series: TimeSeries,
    pub final_state: FlowState,
    /// Lemma-bound reports at expensive samples.
    pub lower_bounds: Vec<(f64, spectral::LowerBoundReport, spectral::EquivalenceCheck)>,
}

/// Integrates the flow and records monitors at the configured cadence.
pub fn run_flow(cfg: &FlowConfig, init: &MomentumProfile) -> Result<FlowRun> {
    cfg.validate(init)?;
    let n = init.n();
    let steps = if cfg.t_max == 0.0 { 0 } else { ((cfg.t_max / cfg.dt) - 1e-9).ceil() as usize };
    let dt = if steps == 0 { 0.0 } else { cfg.t_max / steps as f64 };
    let mut theta = init.theta().to_vec();
    let mut samples = Vec::new();
    let mut bounds = Vec::new();
    let mut step = 0usize;
    let mut state = FlowState::new(init.clone())?;
    let mut sample_index = 0usize;
    loop {
        let expensive = sample_index.is_multiple_of(cfg.expensive_every) || step == steps;
        let sm = sample(&mut state, cfg, expensive)?;
        if let Some(rep) = &state.spectral {
            if expensive {
                let lb = spectral::verify_eigenvalue_lower_bounds(&state.geometry, rep)?;
                let eq = spectral::lambda_equivalence_check(rep, state.u.oscillation());
                bounds.push((state.t, lb, eq));
            }
        }
        samples.push(sm);
        sample_index += 1;
        if step == steps {
            break;
        }
        let chunk = cfg.sample_every.min(steps - step);
        advance(n, &mut theta, dt, chunk, cfg.scheme, step)?;
        step += chunk;
        let p = init.with_theta(theta.clone())?;
        state = FlowState::at(p, step as f64 * dt, step)?;
    }
    Ok(FlowRun {
        series: TimeSeries { n, grid_points: init.len(), samples },
        final_state: state,
        lower_bounds: bounds,
    })
}

/// Least-squares decay rate of a monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `−d ln(monitor)/dt`; positive means decay.
    pub rate: f64,
    pub samples_used: usize,
    pub decaying: bool,
}

/// Samples below this value are treated as round-off and left out of rate fits.
pub const RATE_FLOOR: f64 = 1e-9;

/// Fits `ln(monitor) ≈ c − rate·t` over the tail window: the later half of the
/// samples whose value exceeds [`RATE_FLOOR`].
pub fn exponential_rate_fit(series: &TimeSeries, key: &str) -> Result<RateFit> {
    let vals = series.monitor(key)?;
    let pts: Vec<(f64, f64)> = series
        .samples
        .iter()
        .zip(&vals)
        .filter_map(|(s, v)| v.map(|v| (s.t, v)))
        .collect();
    let above: Vec<(f64, f64)> = pts.iter().copied().filter(|(_, v)| *v > RATE_FLOOR || *v <= 0.0).collect();
    let above = if above.len() >= 20 { above[above.len() / 2..].to_vec() } else { above };
    if above.len() < 10 {
        return Err(Error::InsufficientSamples { need: 10, have: above.len() });
    }
    if let Some((t, v)) = above.iter().find(|(_, v)| *v <= 0.0) {
        return Err(Error::NonPositive { t: *t, value: *v });
    }
    let k = above.len() as f64;
    let mt = above.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = above.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in &above {
        sxy += (t - mt) * (v.ln() - ml);
        sxx += (t - mt) * (t - mt);
    }
    let rate = if sxx > 0.0 { -sxy / sxx } else { 0.0 };
    Ok(RateFit { rate, samples_used: above.len(), decaying: rate > 1e-6 })
}

/// Per-sample outcome of the Ẏ inequality test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotYResidual {
    pub t: f64,
    /// Finite-difference Ẏ minus `−2λY − 2λ·Fut(π∇u) − Z`.
    pub residual: f64,
    pub tol: f64,
    pub violated: bool,
}

/// Inputs of the Ẏ inequality at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotYInput {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub lambda: f64,
    pub futaki_proj: f64,
    /// Uncertainty of λ from grid refinement.
    pub lambda_error: f64,
}

/// Extracts the samples at which λ is available.
pub fn dot_y_inputs(series: &TimeSeries) -> Vec<DotYInput> {
    series
        .samples
        .iter()
        .filter_map(|s| {
            s.lambda.map(|l| DotYInput {
                t: s.t,
                y: s.y,
                z: s.z,
                lambda: l,
                futaki_proj: s.futaki_proj,
                lambda_error: s.refinement_error.unwrap_or(0.0),
            })
        })
        .collect()
}

/// Absolute quadrature tolerance added to every Ẏ test.
pub const DOT_Y_QUADRATURE_TOL: f64 = 1e-10;

/// Tests `Ẏ ≤ −2λY − 2λ Fut(π∇u) − Z` at interior samples with central
/// differences. `tol_k = Δ²|Y'''|/6 + 2Y·δλ + 1e−10`, where Y''' comes from
/// third differences of neighbouring samples and δλ is λ's refinement error.
pub fn dot_y_inequality_check(inputs: &[DotYInput]) -> Result<Vec<DotYResidual>> {
    let k = inputs.len();
    if k < 3 {
        return Err(Error::InsufficientSamples { need: 3, have: k });
    }
    let third = |i: usize| -> f64 {
        // Third derivative from four consecutive samples around i.
        let lo = if i + 2 < k { i.saturating_sub(1) } else { k.saturating_sub(4) };
        if lo + 3 >= k {
            return 0.0;
        }
        let p = &inputs[lo..lo + 4];
        let ts: Vec<f64> = p.iter().map(|x| x.t).collect();
        let w = crate::numerics::fd_weights(inputs[i].t, &ts, 3);
        p.iter().zip(&w[3]).map(|(x, c)| c * x.y).sum::<f64>()
    };
    let mut out = Vec::with_capacity(k - 2);
    for i in 1..k - 1 {
        let (a, b, c) = (&inputs[i - 1], &inputs[i], &inputs[i + 1]);
        let dy = (c.y - a.y) / (c.t - a.t);
        let rhs = -2.0 * b.lambda * b.y - 2.0 * b.lambda * b.futaki_proj - b.z;
        let delta = 0.5 * (c.t - a.t);
        let tol = delta * delta * third(i).abs() / 6.0 + 2.0 * b.y * b.lambda_error + DOT_Y_QUADRATURE_TOL;
        let residual = dy - rhs;
        out.push(DotYResidual { t: b.t, residual, tol, violated: residual > tol });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fubini_study_profile, fubini_study_profile_on};

    fn perturbed(m: usize) -> MomentumProfile {
        crate::geometry::perturbed_profile(1, m, 0.8, 0.1)
        .unwrap()
    }

    #[test]
    fn fubini_study_is_a_fixed_point() {
        for n in 1..=2 {
            let s = FlowState::new(fubini_study_profile(n).unwrap()).unwrap();
            let cfg = FlowConfig::default();
            let dt = 0.5 * cfg.dt_limit(&s.profile);
            for scheme in [Scheme::Rk4, Scheme::Imex] {
                let next = krf_step(&s, dt, scheme).unwrap();
                let diff = next
                    .profile
                    .theta()
                    .iter()
                    .zip(s.profile.theta())
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(diff <= 1e-10, "n={n} {scheme:?}: {diff}");
            }
        }
    }

    #[test]
    fn cfl_guard_rejects_large_steps() {
        let p = fubini_study_profile(1).unwrap();
        let cfg = FlowConfig { dt: 1e-3, ..FlowConfig::default() };
        assert!(matches!(cfg.validate(&p), Err(Error::Cfl { .. })));
    }

    #[test]
    fn one_step_reduces_ricci_defect() {
        let s = FlowState::new(perturbed(129)).unwrap();
        let dt = 0.4 * FlowConfig::default().dt_limit(&s.profile);
        let next = krf_step(&s, dt, Scheme::Rk4).unwrap();
        assert!(next.geometry.sup_ric_minus_g() < s.geometry.sup_ric_minus_g());
    }

    #[test]
    fn rk4_is_fourth_order_in_time() {
        let p = perturbed(33);
        let horizon = 0.1;
        let run = |dt: f64| {
            let mut th = p.theta().to_vec();
            let steps = (horizon / dt).round() as usize;
            advance(1, &mut th, dt, steps, Scheme::Rk4, 0).unwrap();
            th
        };
        let a = run(0.004);
        let b = run(0.002);
        let c = run(0.001);
        let e1 = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        let e2 = b.iter().zip(&c).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order} ({e1:e}, {e2:e})");
    }

    #[test]
    fn synthetic_rates() {
        let mk = |f: &dyn Fn(f64) -> f64| TimeSeries {
            n: 1,
            grid_points: 3,
            samples: (0..40)
                .map(|k| {
                    let t = k as f64 * 0.25;
                    let mut s = blank(t);
                    s.y = f(t);
                    s
                })
                .collect(),
        };
        let fit = exponential_rate_fit(&mk(&|t| (-2.0 * t).exp()), "Y").unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-6 && fit.decaying);
        let flat = exponential_rate_fit(&mk(&|_| 0.3), "Y").unwrap();
        assert!(flat.rate.abs() < 1e-9 && !flat.decaying);
        assert!(matches!(exponential_rate_fit(&mk(&|t| 1.0 - t), "Y"), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn dot_y_checks() {
        // Y = e^{-4t} with λ = 2 satisfies the inequality with equality.
        let good: Vec<DotYInput> = (0..30)
            .map(|k| {
                let t = k as f64 * 0.05;
                DotYInput { t, y: (-4.0 * t).exp(), z: 0.0, lambda: 2.0, futaki_proj: 0.0, lambda_error: 0.0 }
            })
            .collect();
        assert!(dot_y_inequality_check(&good).unwrap().iter().all(|r| !r.violated));
        // Y = e^{-t} decays too slowly for λ = 2.
        let bad: Vec<DotYInput> = good.iter().map(|d| DotYInput { y: (-d.t).exp(), ..*d }).collect();
        assert!(dot_y_inequality_check(&bad).unwrap().iter().all(|r| r.violated));
        let zero: Vec<DotYInput> = good.iter().map(|d| DotYInput { y: 0.0, ..*d }).collect();
        assert!(dot_y_inequality_check(&zero).unwrap().iter().all(|r| r.residual == 0.0));
        assert!(dot_y_inequality_check(&good[..2]).is_err());
    }

    #[test]
    fn fubini_study_monitors_are_constant() {
        let p = fubini_study_profile_on(1, 65).unwrap();
        let cfg = FlowConfig { dt: 1e-4, t_max: 0.05, sample_every: 100, expensive_every: 2, ..FlowConfig::default() };
        let run = run_flow(&cfg, &p).unwrap();
        for s in &run.series.samples {
            assert!(s.sup_u < 1e-8 && s.y < 1e-8 && s.z.abs() < 1e-8 && s.sup_r_minus_n < 1e-8);
            assert!((s.griffiths_margin - 1.0).abs() < 1e-8);
        }
    }

    pub(crate) fn blank(t: f64) -> Sample {
        Sample {
            t,
            step: 0,
            sup_u: 0.0,
            sup_grad_u: 0.0,
            sup_r: 0.0,
            sup_r_minus_n: 0.0,
            sup_ric_minus_g: 0.0,
            int_r_minus_n_sq: 0.0,
            y: 0.0,
            z: 0.0,
            lambda: None,
            lambda_tilde: None,
            refinement_error: None,
            futaki_proj: 0.0,
            chen_margin: None,
            griffiths_margin: 0.0,
            soliton_residual: 0.0,
            osc_u: 0.0,
            nu: 1.0,
            volume_proxy: 1.0,
            volume_correction: 0.0,
        }
    }
}
