//! Smallest positive eigenvalues of `L = −g^{ij̄}∇_i∇_j̄` and its weighted
//! variant `L̃` on (1,0)-vector fields, restricted to equivariant sectors.
//!
//! Sector `j` consists of fields `V = P_j(z) r^{−j/2} f(τ) E`, where `E` is the
//! Euler field and `P_j` a homogeneous polynomial of degree j (for n = 1 any
//! integer j, with `P_j = z^j`; for n = 2 only j ≥ 0, multiplicity j + 1).
//! The Rayleigh quotient reduces to
//!
//! ```text
//! (1/A) ∫ |θ f_τ − (j/2) f|² τ^{n−1} ρ dτ  /  ∫ θ |f|² τ^{n−1} ρ dτ
//! ```
//!
//! with `ρ = 1` for L and `ρ = e^{−u}` for L̃. Holomorphic fields in the sector
//! are `f = r^{j/2}` for `j ∈ {−1, 0, 1}`; those sectors are discretized in the
//! variable `g = r^{−j/2} f`, in which the kernel is exactly the constants.
//! Discretization uses linear elements with midpoint weights and a lumped mass,
//! so each sector becomes a symmetric tridiagonal eigenproblem.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{amplitude, ricci_potential, MomentumProfile, ProfileGeometry, RicciPotential, SmoothProfile};
use crate::linalg::SymTridiagonal;
use crate::numerics::{cumulative_integral, midpoint_values};

/// Default sector cutoff `|j| ≤ K`.
pub const DEFAULT_SECTORS: usize = 8;

/// Kernel rule: an eigenvalue is kernel if it is below this fraction of the next one.
pub const KERNEL_GAP: f64 = 1e-6;

/// Which inner product the eigenproblem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// `⟨,⟩_0`, operator L.
    Plain,
    /// `⟨,⟩_u`, operator L̃.
    Potential,
}

/// Midpoint data shared by all sectors of one metric.
#[derive(Debug, Clone)]
struct CellData {
    n: usize,
    h: f64,
    tau: Vec<f64>,
    theta: Vec<f64>,
    s: Vec<f64>,
    weight: Vec<f64>,
}

fn cell_data(geo: &ProfileGeometry, u: Option<&RicciPotential>) -> Result<CellData> {
    let m = geo.len();
    if let Some(u) = u {
        if u.len() != m || u.n != geo.n {
            return Err(Error::GridMismatch(alloc::format!(
                "potential has {} samples, metric has {m}",
                u.len()
            )));
        }
    }
    let h = geo.h;
    // q = 1/θ − 1/w, with its limits −(1 + θ''/2) at the ends.
    let q: Vec<f64> = (0..m)
        .map(|i| {
            if i == 0 || i == m - 1 {
                -(1.0 + geo.d2[i] / 2.0)
            } else {
                let t = geo.tau[i];
                let w = t * (1.0 - t);
                (w - geo.theta[i]) / (w * geo.theta[i])
            }
        })
        .collect();
    let big_q = midpoint_values(&cumulative_integral(&q, h));
    let theta = midpoint_values(&geo.theta);
    let umid = u.map(|u| midpoint_values(&u.u));
    let nexp = geo.n as i32 - 1;
    let mut tau = Vec::with_capacity(m - 1);
    let mut s = Vec::with_capacity(m - 1);
    let mut weight = Vec::with_capacity(m - 1);
    for i in 0..m - 1 {
        let t = (i as f64 + 0.5) * h;
        tau.push(t);
        s.push((t / (1.0 - t)).ln() + big_q[i]);
        let rho = umid.as_ref().map_or(1.0, |u| (-u[i]).exp());
        weight.push(t.powi(nexp) * rho);
    }
    if theta.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::SingularMetric);
    }
    Ok(CellData { n: geo.n, h, tau, theta, s, weight })
}

/// One equivariant sector of L or L̃.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorOperator {
    pub j: i32,
    /// Number of independent polynomials `P_j`.
    pub multiplicity: usize,
    /// True if the unknown is `g = r^{−j/2} f` (sectors containing holomorphic fields).
    pub holomorphic_form: bool,
    pub weighting: Weighting,
    /// Symmetric stiffness matrix of the ∂̄-energy.
    pub stiffness: SymTridiagonal,
    /// Lumped mass (diagonal of the discrete inner product).
    pub mass: Vec<f64>,
    h: f64,
}

impl SectorOperator {
    /// `M^{−1/2} K M^{−1/2}`.
    pub fn symmetric_operator(&self) -> SymTridiagonal {
        let sq: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let k = &self.stiffness;
        SymTridiagonal {
            diag: k.diag.iter().zip(&sq).map(|(d, s)| d / (s * s)).collect(),
            off: k.off.iter().enumerate().map(|(i, o)| o / (sq[i] * sq[i + 1])).collect(),
        }
    }

    /// Applies the discrete operator `M^{−1} K`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.mul_vec(x).iter().zip(&self.mass).map(|(v, m)| v / m).collect()
    }

    /// Discrete inner product `Σ M_i x_i y_i`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    /// Discrete ∂̄-energy `xᵀ K x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.stiffness.mul_vec(x)).map(|(a, b)| a * b).sum()
    }

    pub fn grid_points(&self) -> usize {
        self.mass.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Lowest `count` eigenvalues.
    pub fn lowest(&self, count: usize) -> Result<Vec<f64>> {
        let t = self.symmetric_operator();
        (0..count.min(t.len())).map(|k| t.eigenvalue(k)).collect()
    }
}

fn build_sector(cells: &CellData, j: i32, weighting: Weighting) -> SectorOperator {
    let n = cells.n;
    let h = cells.h;
    let m = cells.tau.len() + 1;
    let aa = amplitude(n);
    let holo = j.abs() <= 1;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    let mut mass = vec![0.0; m];
    for e in 0..m - 1 {
        let th = cells.theta[e];
        let w = cells.weight[e];
        let (k00, k01, k11, mw) = if holo {
            let rj = (j as f64 * cells.s[e]).exp();
            let kw = rj * th * th * w / aa / h;
            (kw, -kw, kw, rj * th * w)
        } else {
            let a = th / h;
            let b = j as f64 / 4.0;
            let (c0, c1) = (-a - b, a - b);
            let kw = h * w / aa;
            (kw * c0 * c0, kw * c0 * c1, kw * c1 * c1, th * w)
        };
        diag[e] += k00;
        diag[e + 1] += k11;
        off[e] += k01;
        mass[e] += 0.5 * h * mw;
        mass[e + 1] += 0.5 * h * mw;
    }
    // The zero-energy solution r^{j/2} is not square-integrable at τ = 1 (j ≥ 2)
    // or τ = 0 (j ≤ −2); the lumped mass would admit it, so that node is pinned to 0.
    if j >= 2 {
        diag.pop();
        off.pop();
        mass.pop();
    } else if j <= -2 {
        diag.remove(0);
        off.remove(0);
        mass.remove(0);
    }
    SectorOperator {
        j,
        multiplicity: if n == 1 { 1 } else { j as usize + 1 },
        holomorphic_form: holo,
        weighting,
        stiffness: SymTridiagonal { diag, off },
        mass,
        h,
    }
}

/// Sector indices for the cutoff K.
pub fn sector_range(n: usize, k: usize) -> Vec<i32> {
    let k = k as i32;
    if n == 1 {
        (-k..=k).collect()
    } else {
        (0..=k).collect()
    }
}

fn build(geo: &ProfileGeometry, u: Option<&RicciPotential>, sectors: usize) -> Result<Vec<SectorOperator>> {
    let cells = cell_data(geo, u)?;
    let weighting = if u.is_some() { Weighting::Potential } else { Weighting::Plain };
    Ok(sector_range(geo.n, sectors).into_iter().map(|j| build_sector(&cells, j, weighting)).collect())
}

/// Sector operators of `L` (weight ωⁿ).
pub fn build_l(geo: &ProfileGeometry, sectors: usize) -> Result<Vec<SectorOperator>> {
    build(geo, None, sectors)
}

/// Sector operators of `L̃` (weight e^{−u}ωⁿ).
pub fn build_l_tilde(geo: &ProfileGeometry, u: &RicciPotential, sectors: usize) -> Result<Vec<SectorOperator>> {
    build(geo, Some(u), sectors)
}

/// One holomorphic field in reduced form.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldMode {
    pub j: i32,
    /// Which of the `multiplicity` polynomials `P_j` (0-based).
    pub copy: usize,
    pub n: usize,
    /// Node values of the sector unknown (g for holomorphic-form sectors).
    pub samples: Vec<f64>,
    pub label: alloc::string::String,
}

/// Representable holomorphic fields and their Gram matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicBasis {
    pub modes: Vec<VectorFieldMode>,
    /// `⟨,⟩_0` Gram matrix, row-major.
    pub gram_0: Vec<f64>,
    /// `⟨,⟩_u` Gram matrix, row-major.
    pub gram_u: Vec<f64>,
    /// Largest `∂̄`-energy to norm ratio among the modes.
    pub max_dbar_ratio: f64,
}

impl HolomorphicBasis {
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Ratio of the largest to smallest Gram diagonal entry (the Gram matrices are diagonal
    /// because distinct sectors and distinct polynomials are orthogonal).
    pub fn condition_number(&self, weighting: Weighting) -> f64 {
        let g = match weighting {
            Weighting::Plain => &self.gram_0,
            Weighting::Potential => &self.gram_u,
        };
        let d = self.dim();
        let diag: Vec<f64> = (0..d).map(|i| g[i * d + i]).collect();
        let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Labels of the representable holomorphic fields.
fn mode_label(n: usize, j: i32, copy: usize) -> alloc::string::String {
    use alloc::string::ToString;
    match (n, j) {
        (1, -1) => "d/dz".to_string(),
        (1, 0) => "z d/dz".to_string(),
        (1, 1) => "z^2 d/dz".to_string(),
        (_, 0) => "E".to_string(),
        _ => alloc::format!("z{} E", copy + 1),
    }
}

/// Holomorphic fields representable in the sector encoding, with Gram matrices
/// under both inner products.
pub fn holomorphic_fields(n: usize, geo: &ProfileGeometry, u: &RicciPotential) -> Result<HolomorphicBasis> {
    crate::geometry::check_dimension(n)?;
    if geo.n != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let plain = build_l(geo, 1)?;
    let weighted = build_l_tilde(geo, u, 1)?;
    let m = geo.len();
    let mut modes = Vec::new();
    let mut norms0 = Vec::new();
    let mut normsu = Vec::new();
    let mut max_ratio = 0.0_f64;
    for (op0, opu) in plain.iter().zip(&weighted) {
        let ones = vec![1.0; m];
        let n0 = op0.inner(&ones, &ones);
        let nu = opu.inner(&ones, &ones);
        max_ratio = max_ratio.max(op0.energy(&ones).abs() / n0).max(opu.energy(&ones).abs() / nu);
        for copy in 0..op0.multiplicity {
            // Angular factor |P_j|² r^{−j} has the same average for every normalized P_j.
            modes.push(VectorFieldMode { j: op0.j, copy, n, samples: ones.clone(), label: mode_label(n, op0.j, copy) });
            norms0.push(n0);
            normsu.push(nu);
        }
    }
    if max_ratio > 1e-8 {
        return Err(Error::NotHolomorphic(max_ratio));
    }
    let d = modes.len();
    let mut gram_0 = vec![0.0; d * d];
    let mut gram_u = vec![0.0; d * d];
    for i in 0..d {
        gram_0[i * d + i] = norms0[i];
        gram_u[i * d + i] = normsu[i];
    }
    let basis = HolomorphicBasis { modes, gram_0, gram_u, max_dbar_ratio: max_ratio };
    let cond = basis.condition_number(Weighting::Plain).max(basis.condition_number(Weighting::Potential));
    if !(cond < 1e8) {
        return Err(Error::BasisDegenerate(cond));
    }
    Ok(basis)
}

/// Smallest positive eigenvalue of one sector after kernel deflation.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorEigen {
    pub j: i32,
    pub value: f64,
    pub kernel_dim: usize,
    /// Eigenvector in sector unknowns, normalized in the discrete inner product.
    pub vector: Vec<f64>,
    pub rayleigh: f64,
    /// `|⟨x, ξ⟩| / (‖x‖‖ξ‖)` against the sector's kernel vector (0 if none).
    pub orthogonality: f64,
}

/// Counts leading kernel eigenvalues by the gap rule.
pub fn kernel_count(values: &[f64]) -> usize {
    for k in 1..values.len() {
        let below = values[..k].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if below <= KERNEL_GAP * values[k] {
            return k;
        }
    }
    0
}

/// Smallest eigenvalue of a sector above its first `deflate` eigenvalues.
pub fn sector_eigen(op: &SectorOperator, deflate: usize) -> Result<SectorEigen> {
    let t = op.symmetric_operator();
    let lowest = op.lowest(deflate + 2)?;
    let kernel = kernel_count(&lowest);
    let value = t.eigenvalue(deflate)?;
    let y = t.eigenvector(value)?;
    let sq: Vec<f64> = op.mass.iter().map(|m| m.sqrt()).collect();
    let x: Vec<f64> = y.iter().zip(&sq).map(|(a, s)| a / s).collect();
    let rayleigh = op.energy(&x) / op.inner(&x, &x);
    let orthogonality = if kernel > 0 && op.holomorphic_form && deflate > 0 {
        let ones = vec![1.0; x.len()];
        op.inner(&x, &ones).abs() / (op.inner(&x, &x) * op.inner(&ones, &ones)).sqrt()
    } else {
        0.0
    };
    Ok(SectorEigen { j: op.j, value, kernel_dim: kernel, vector: x, rayleigh, orthogonality })
}

/// Minimum over sectors of the first eigenvalue above the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub lambda: f64,
    pub sector: i32,
    /// Representable kernel dimension (with multiplicities).
    pub kernel_dim: usize,
    pub per_sector: Vec<SectorEigen>,
}

/// Deflates the holomorphic kernel of each sector and takes the minimum.
pub fn smallest_positive_eigenvalue(ops: &[SectorOperator], basis: &HolomorphicBasis) -> Result<EigenSolution> {
    let mut per = Vec::with_capacity(ops.len());
    let mut kernel_dim = 0;
    for op in ops {
        let expected = basis.modes.iter().filter(|m| m.j == op.j).count() / op.multiplicity.max(1);
        let probe = sector_eigen(op, 0)?;
        let deflate = if op.holomorphic_form { probe.kernel_dim.max(expected) } else { probe.kernel_dim };
        let e = if deflate == 0 { probe } else { sector_eigen(op, deflate)? };
        kernel_dim += deflate * op.multiplicity;
        per.push(e);
    }
    let best = per
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(Error::NoConvergence)?;
    Ok(EigenSolution { lambda: best.value, sector: best.j, kernel_dim, per_sector: per.clone() })
}

/// λ, λ̃ and a grid-refinement error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub kernel_dim: usize,
    pub sectors: usize,
    pub grid_points: usize,
    /// `|λ_m − λ_{m/2}| / 3` for second-order convergence.
    pub refinement_error: f64,
    /// λ with half the sector cutoff (sector truncation trend).
    pub lambda_half_sectors: f64,
    pub lambda_sector: i32,
}

fn lambdas(p: &MomentumProfile, sectors: usize) -> Result<(EigenSolution, EigenSolution)> {
    let geo = ProfileGeometry::new(p);
    let u = crate::geometry::ricci_potential_from(&geo)?;
    let basis = holomorphic_fields(p.n(), &geo, &u)?;
    let l = smallest_positive_eigenvalue(&build_l(&geo, sectors)?, &basis)?;
    let lt = smallest_positive_eigenvalue(&build_l_tilde(&geo, &u, sectors)?, &basis)?;
    Ok((l, lt))
}

/// Full spectral report for a profile, including the refinement estimate from
/// the profile resampled on a grid of half the resolution.
pub fn spectral_report(p: &MomentumProfile, sectors: usize) -> Result<SpectralReport> {
    let (l, lt) = lambdas(p, sectors)?;
    let coarse_m = p.len().div_ceil(2);
    let coarse = SmoothProfile::fit(p)?.resample(coarse_m.max(16))?;
    let (lc, ltc) = lambdas(&coarse, sectors)?;
    let refinement_error = ((l.lambda - lc.lambda).abs().max((lt.lambda - ltc.lambda).abs())) / 3.0;
    let half = if sectors >= 2 {
        let geo = ProfileGeometry::new(p);
        let u = ricci_potential(p)?;
        let basis = holomorphic_fields(p.n(), &geo, &u)?;
        smallest_positive_eigenvalue(&build_l(&geo, sectors / 2)?, &basis)?.lambda
    } else {
        l.lambda
    };
    Ok(SpectralReport {
        lambda: l.lambda,
        lambda_tilde: lt.lambda,
        kernel_dim: l.kernel_dim,
        sectors,
        grid_points: p.len(),
        refinement_error,
        lambda_half_sectors: half,
        lambda_sector: l.sector,
    })
}

/// Constants of the λ/λ̃ comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    /// `e^{−osc u}`: lower constant from `c₁ = e^{min u}`, `c₂ = e^{max u}`,
    /// `c₃ = e^{min u}` combined through the orthogonal-projection bound.
    pub a1: f64,
    pub a2: f64,
    /// The same chain with the halving steps kept, `e^{−2 osc}/4` and its reciprocal.
    pub a1_chain: f64,
    pub a2_chain: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub holds: bool,
}

/// Checks `A₁λ̃ ≤ λ ≤ A₂λ̃`.
pub fn lambda_equivalence_check(r: &SpectralReport, osc_u: f64) -> EquivalenceCheck {
    let a1 = (-osc_u).exp();
    let a2 = osc_u.exp();
    let lower_margin = r.lambda - a1 * r.lambda_tilde;
    let upper_margin = a2 * r.lambda_tilde - r.lambda;
    let slack = 1e-12 * r.lambda.abs().max(1.0);
    EquivalenceCheck {
        a1,
        a2,
        a1_chain: (-2.0 * osc_u).exp() / 4.0,
        a2_chain: 4.0 * (2.0 * osc_u).exp(),
        lower_margin,
        upper_margin,
        holds: lower_margin >= -slack && upper_margin >= -slack,
    }
}

/// Curvature thresholds of the two eigenvalue lower bounds and their verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// Largest c with `R + Ric⊗g − c g⊗g` Nakano-nonnegative at every node.
    pub c_for_lambda: f64,
    /// Largest c with `R + (1 − c) g⊗g` Nakano-nonnegative at every node.
    pub c_for_lambda_tilde: f64,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub tol: f64,
    pub lambda_margin: f64,
    pub lambda_tilde_margin: f64,
    /// False when the threshold is ≤ 0 (hypothesis vacuous, nothing asserted).
    pub lambda_checked: bool,
    pub lambda_tilde_checked: bool,
    pub passed: bool,
}

/// Nakano thresholds over the grid nodes of a profile.
pub fn nakano_thresholds(geo: &ProfileGeometry) -> Result<(f64, f64)> {
    use crate::positivity::{demailly_shifted, NakanoForm};
    let mut c_l = f64::INFINITY;
    let mut c_lt = f64::INFINITY;
    for i in 0..geo.len() {
        let t = geo.frame_tensor(i);
        let shifted = demailly_shifted(&t, 0.0)?;
        c_l = c_l.min(NakanoForm::from_frame_tensor(&shifted).min_full());
        c_lt = c_lt.min(1.0 + NakanoForm::from_frame_tensor(&t).min_full());
    }
    Ok((c_l, c_lt))
}

/// Checks `λ ≥ c_for_λ − tol` and `λ̃ ≥ c_for_λ̃ − tol`, `tol = 1e−3 + refinement error`.
pub fn verify_eigenvalue_lower_bounds(geo: &ProfileGeometry, r: &SpectralReport) -> Result<LowerBoundReport> {
    let (c_l, c_lt) = nakano_thresholds(geo)?;
    let tol = 1e-3 + r.refinement_error;
    let lambda_margin = r.lambda - (c_l - tol);
    let lambda_tilde_margin = r.lambda_tilde - (c_lt - tol);
    let lambda_checked = c_l > 0.0;
    let lambda_tilde_checked = c_lt > 0.0;
    let passed = (!lambda_checked || lambda_margin >= 0.0) && (!lambda_tilde_checked || lambda_tilde_margin >= 0.0);
    Ok(LowerBoundReport {
        c_for_lambda: c_l,
        c_for_lambda_tilde: c_lt,
        lambda: r.lambda,
        lambda_tilde: r.lambda_tilde,
        tol,
        lambda_margin,
        lambda_tilde_margin,
        lambda_checked,
        lambda_tilde_checked,
        passed,
    })
}

/// Element contribution `h w c cᵀ`, `c = (−a − b, a − b)`, of the sector energy
/// for linear elements; exposed for model-problem tests.
pub fn sector_element(theta_mid: f64, j: f64, weight: f64, h: f64) -> [[f64; 2]; 2] {
    let a = theta_mid / h;
    let b = j / 4.0;
    let c = [-a - b, a - b];
    [[h * weight * c[0] * c[0], h * weight * c[0] * c[1]], [h * weight * c[1] * c[0], h * weight * c[1] * c[1]]]
}
