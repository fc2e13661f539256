//! Griffiths and Nakano positivity of curvature-type tensors.
//!
//! Every certificate is evaluated in a g-unitary frame, so "unit vector"
//! means g-unit.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ricci_and_scalar, CurvatureTensor};
use crate::linalg::{hermitian_eigen, hermitian_min_eigenvalue, CMatrix, C64};

/// Default number of random restarts for the Griffiths minimization.
pub const DEFAULT_RESTARTS: usize = 32;

/// Tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for eigenvalue certificates.
pub const CERTIFICATE_TOL: f64 = 1e-10;

/// The form `T_{j̄il̄k} ζ̄^{jl} ζ^{ik}` as an `n² × n²` Hermitian matrix
/// with entry `T_{j̄il̄k}` at row `(i, k)`, column `(j, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NakanoForm {
    pub n: usize,
    pub h: CMatrix,
}

impl NakanoForm {
    /// Builds the form in a unitary frame without checking symmetries.
    pub fn from_tensor(t: &CurvatureTensor) -> Result<Self> {
        let f = t.in_unitary_frame()?;
        Ok(Self::from_frame_tensor(&f))
    }

    /// Builds the form assuming `t` is already expressed in a unitary frame.
    pub fn from_frame_tensor(t: &CurvatureTensor) -> Self {
        let n = t.n();
        let mut h = CMatrix::zeros(n * n);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        h[(i * n + k, j * n + l)] = t.get(j, i, l, k);
                    }
                }
            }
        }
        Self { n, h }
    }

    /// `Σ T_{j̄il̄k} ζ̄^{jl} ζ^{ik}` for `ζ` indexed as `ζ[a * n + b] = ζ^{ab}`.
    pub fn evaluate(&self, zeta: &[C64]) -> f64 {
        let m = self.n * self.n;
        let mut s = C64::new(0.0, 0.0);
        for r in 0..m {
            for c in 0..m {
                s += zeta[c].conj() * self.h[(r, c)] * zeta[r];
            }
        }
        s.re
    }

    /// Smallest eigenvalue over all of `T ⊗ T`.
    pub fn min_full(&self) -> f64 {
        hermitian_min_eigenvalue(&self.h)
    }

    fn restricted(&self, basis: &[Vec<f64>]) -> CMatrix {
        let m = self.n * self.n;
        CMatrix::from_fn(basis.len(), |a, b| {
            let mut s = C64::new(0.0, 0.0);
            for r in 0..m {
                for c in 0..m {
                    s += self.h[(r, c)] * basis[a][r] * basis[b][c];
                }
            }
            s
        })
    }

    /// Smallest eigenvalue on symmetric `ζ` (`ζ^{ik} = ζ^{ki}`).
    pub fn min_symmetric(&self) -> f64 {
        hermitian_min_eigenvalue(&self.restricted(&symmetric_basis(self.n)))
    }

    /// Largest entry of the form restricted to skew `ζ`.
    pub fn skew_defect(&self) -> f64 {
        let basis = skew_basis(self.n);
        if basis.is_empty() {
            return 0.0;
        }
        self.restricted(&basis).max_abs()
    }
}

/// Orthonormal real basis of symmetric ζ: `e_ii` and `(e_ik + e_ki)/√2`.
pub fn symmetric_basis(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for k in i..n {
            let mut v = vec![0.0; n * n];
            if i == k {
                v[i * n + i] = 1.0;
            } else {
                v[i * n + k] = core::f64::consts::FRAC_1_SQRT_2;
                v[k * n + i] = core::f64::consts::FRAC_1_SQRT_2;
            }
            out.push(v);
        }
    }
    out
}

/// Orthonormal real basis of skew ζ: `(e_ik − e_ki)/√2`.
pub fn skew_basis(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            let mut v = vec![0.0; n * n];
            v[i * n + k] = core::f64::consts::FRAC_1_SQRT_2;
            v[k * n + i] = -core::f64::consts::FRAC_1_SQRT_2;
            out.push(v);
        }
    }
    out
}

/// Nakano form of a Kähler-symmetric tensor; rejects symmetry violations.
pub fn nakano_form(c: &CurvatureTensor) -> Result<NakanoForm> {
    let defect = c.symmetry_defect();
    if defect > ALGEBRAIC_TOL * c.max_abs().max(1.0) {
        return Err(Error::SymmetryViolation(defect));
    }
    NakanoForm::from_tensor(c)
}

/// Outcome of the alternating Griffiths minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct GriffithsMinimum {
    pub value: f64,
    pub v: Vec<C64>,
    pub w: Vec<C64>,
    pub restarts: usize,
}

fn partial_matrix(t: &CurvatureTensor, x: &[C64], first: bool) -> CMatrix {
    // first = true: M[j][i] = Σ T_{j̄il̄k} x̄^l x^k; otherwise M[l][k] = Σ T_{j̄il̄k} x̄^j x^i.
    let n = t.n();
    let mut m = CMatrix::zeros(n);
    for j in 0..n {
        for i in 0..n {
            for l in 0..n {
                for k in 0..n {
                    let v = t.get(j, i, l, k);
                    if first {
                        m[(j, i)] += v * x[l].conj() * x[k];
                    } else {
                        m[(l, k)] += v * x[j].conj() * x[i];
                    }
                }
            }
        }
    }
    m
}

fn frame_bisectional(t: &CurvatureTensor, v: &[C64], w: &[C64]) -> f64 {
    let m = partial_matrix(t, w, true);
    let mut s = C64::new(0.0, 0.0);
    for j in 0..t.n() {
        for i in 0..t.n() {
            s += v[j].conj() * m[(j, i)] * v[i];
        }
    }
    s.re
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Minimizes `T(V̄, V, W̄, W)` over unit `V, W` of a tensor given in a unitary
/// frame, by alternating smallest-eigenvector updates from seeded restarts.
pub fn griffiths_min_frame(t: &CurvatureTensor, seed: u64, restarts: usize) -> GriffithsMinimum {
    let n = t.n();
    if n == 1 {
        let one = vec![C64::new(1.0, 0.0)];
        return GriffithsMinimum { value: t.get(0, 0, 0, 0).re, v: one.clone(), w: one, restarts: 0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = GriffithsMinimum { value: f64::INFINITY, v: vec![], w: vec![], restarts };
    let scale = t.max_abs().max(1e-300);
    for _ in 0..restarts.max(1) {
        let mut v = random_unit(n, &mut rng);
        let mut w = random_unit(n, &mut rng);
        let mut value = frame_bisectional(t, &v, &w);
        for _ in 0..500 {
            let ev = hermitian_eigen(&partial_matrix(t, &w, true));
            v = ev.vectors[0].clone();
            let ew = hermitian_eigen(&partial_matrix(t, &v, false));
            w = ew.vectors[0].clone();
            let next = ew.values[0];
            let done = (value - next).abs() <= 1e-15 * scale;
            value = next;
            if done {
                break;
            }
        }
        if value < best.value {
            best.value = value;
            best.v = v;
            best.w = w;
        }
    }
    best
}

/// Best-found minimum of the bisectional curvature over g-unit vectors.
pub fn griffiths_min(c: &CurvatureTensor, seed: u64, restarts: usize) -> Result<GriffithsMinimum> {
    let f = c.in_unitary_frame()?;
    Ok(griffiths_min_frame(&f, seed, restarts))
}

/// `q^{−n} Σ_{σ∈U_q^n} x'_σ ȳ'_σ σ_α σ̄_β` by literal summation (0-based α, β).
pub fn demailly_average(x: &[C64], y: &[C64], q: usize, alpha: usize, beta: usize) -> Result<C64> {
    let n = x.len();
    if q < 3 {
        return Err(Error::InvalidArgument("the roots-of-unity identity needs q >= 3".into()));
    }
    if y.len() != n || alpha >= n || beta >= n {
        return Err(Error::InvalidArgument("index or length mismatch".into()));
    }
    let roots: Vec<C64> = (0..q)
        .map(|k| C64::from_polar(1.0, 2.0 * core::f64::consts::PI * k as f64 / q as f64))
        .collect();
    let total = q.pow(n as u32);
    let mut sum = C64::new(0.0, 0.0);
    let mut sigma = vec![C64::new(1.0, 0.0); n];
    for code in 0..total {
        let mut c = code;
        for s in sigma.iter_mut() {
            *s = roots[c % q];
            c /= q;
        }
        let xp: C64 = x.iter().zip(&sigma).map(|(a, s)| a * s.conj()).sum();
        let yp: C64 = y.iter().zip(&sigma).map(|(a, s)| a * s.conj()).sum();
        sum += xp * yp.conj() * sigma[alpha] * sigma[beta].conj();
    }
    Ok(sum / total as f64)
}

/// Closed form of the roots-of-unity average.
pub fn demailly_closed_form(x: &[C64], y: &[C64], alpha: usize, beta: usize) -> C64 {
    if alpha != beta {
        x[alpha] * y[beta].conj()
    } else {
        x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Summary of a positivity certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub griffiths_min: f64,
    pub nakano_min_sym: f64,
    /// Smallest eigenvalue of the Nakano form on all of `T ⊗ T`.
    pub nakano_min_full: f64,
    pub griffiths_certified: bool,
    pub nakano_certified: bool,
    pub samples_used: usize,
    pub seed: u64,
    pub restarts: usize,
}

/// Certificates of a single tensor: Griffiths minimum and both Nakano minima.
pub fn certify(c: &CurvatureTensor, seed: u64, restarts: usize) -> Result<PositivityReport> {
    let f = c.in_unitary_frame()?;
    let g = griffiths_min_frame(&f, seed, restarts);
    let form = NakanoForm::from_frame_tensor(&f);
    let sym = form.min_symmetric();
    let full = form.min_full();
    let scale = f.max_abs().max(1.0);
    Ok(PositivityReport {
        griffiths_min: g.value,
        nakano_min_sym: sym,
        nakano_min_full: full,
        griffiths_certified: g.value >= -CERTIFICATE_TOL * scale,
        nakano_certified: full >= -CERTIFICATE_TOL * scale,
        samples_used: restarts.max(1),
        seed,
        restarts,
    })
}

/// Frame tensor `R + Ric⊗g − n·c·g⊗g`.
pub fn demailly_shifted(frame: &CurvatureTensor, c_shift: f64) -> Result<CurvatureTensor> {
    let n = frame.n();
    let ric = ricci_and_scalar(frame)?.ricci;
    Ok(frame
        .add_scaled(&frame.ricci_times_metric(&ric), 1.0)
        .add_scaled(&frame.metric_square(), -(n as f64) * c_shift))
}

/// Report for the shifted tensor `R + Ric⊗g − n·c·g⊗g`. The Griffiths entry
/// is the hypothesis margin `griffiths_min(R − c·g⊗g)`; the Nakano entries
/// refer to the shifted tensor.
///
/// The implication Griffiths ⇒ Nakano only holds for `c > 0`: for negative c the
/// diagonal terms are bounded below by a negative multiple of `|ζ|²`.
pub fn griffiths_implies_nakano_shifted(
    c: &CurvatureTensor,
    c_shift: f64,
    seed: u64,
    restarts: usize,
) -> Result<PositivityReport> {
    let f = c.in_unitary_frame()?;
    let hyp = f.add_scaled(&f.metric_square(), -c_shift);
    let g = griffiths_min_frame(&hyp, seed, restarts);
    let shifted = demailly_shifted(&f, c_shift)?;
    let form = NakanoForm::from_frame_tensor(&shifted);
    let sym = form.min_symmetric();
    let full = form.min_full();
    Ok(PositivityReport {
        griffiths_min: g.value,
        nakano_min_sym: sym,
        nakano_min_full: full,
        griffiths_certified: g.value >= 0.0,
        nakano_certified: full >= -CERTIFICATE_TOL * f.max_abs().max(1.0),
        samples_used: restarts.max(1),
        seed,
        restarts,
    })
}

/// Compares the Griffiths and symmetric-Nakano certificates (n ≤ 2).
pub fn dim2_equivalence_check(c: &CurvatureTensor, seed: u64) -> Result<bool> {
    if c.n() > 2 {
        return Err(Error::UnsupportedDimension(c.n()));
    }
    let f = c.in_unitary_frame()?;
    let tol = CERTIFICATE_TOL * f.max_abs().max(1.0);
    let g = griffiths_min_frame(&f, seed, DEFAULT_RESTARTS).value;
    let nk = NakanoForm::from_frame_tensor(&f).min_symmetric();
    Ok((g >= -tol) == (nk >= -tol))
}

/// Ricci lower bound ν and the Chen cone margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityThreshold {
    pub c: f64,
    pub nu: f64,
    pub c_t: f64,
}

impl PositivityThreshold {
    /// Limit `(2ν − 1)/(n + 1)` of the cone margin along the flow.
    pub fn chen_target(n: usize, nu: f64) -> f64 {
        (2.0 * nu - 1.0) / (n as f64 + 1.0)
    }
}

/// Largest c with `R − c(g⊗g + swap)` Griffiths-nonnegative (Dinkelbach iteration
/// on the ratio `R(V,W) / S(V,W)`).
pub fn chen_cone_monitor(c: &CurvatureTensor, seed: u64, restarts: usize) -> Result<f64> {
    let f = c.in_unitary_frame()?;
    Ok(chen_cone_frame(&f, seed, restarts))
}

pub fn chen_cone_frame(f: &CurvatureTensor, seed: u64, restarts: usize) -> f64 {
    let s = f.metric_square_sym();
    let mut c = 0.0;
    for _ in 0..100 {
        let shifted = f.add_scaled(&s, -c);
        let m = griffiths_min_frame(&shifted, seed, restarts);
        if m.v.is_empty() {
            break;
        }
        let ratio = frame_bisectional(f, &m.v, &m.w) / frame_bisectional(&s, &m.v, &m.w);
        if (ratio - c).abs() <= 1e-15 * (1.0 + c.abs()) {
            c = ratio;
            break;
        }
        c = ratio;
    }
    c
}

/// Random tensor with the Kähler and conjugation symmetries, in a unitary
/// frame (identity metric), entries of size about `scale`.
pub fn random_kahler_tensor(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> CurvatureTensor {
    let raw = CurvatureTensor::from_fn(n, CMatrix::identity(n), |_, _, _, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    });
    let sym = CurvatureTensor::from_fn(n, CMatrix::identity(n), |j, i, l, k| {
        (raw.get(j, i, l, k) + raw.get(l, i, j, k) + raw.get(j, k, l, i) + raw.get(l, k, j, i)) * 0.25
    });
    CurvatureTensor::from_fn(n, CMatrix::identity(n), |j, i, l, k| {
        (sym.get(j, i, l, k) + sym.get(i, j, k, l).conj()) * 0.5
    })
}

/// Which cone a random test tensor is pushed into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeShift {
    /// No shift; typically indefinite.
    None,
    /// Shifted along `g⊗g + swap` so the symmetric Nakano minimum equals `margin`.
    Nakano,
    /// Shifted along `g⊗g` so the Griffiths minimum is about `margin`.
    Griffiths,
}

/// Random Kähler-symmetric tensor shifted into a cone with the given margin.
pub fn random_tensor_in_cone(n: usize, rng: &mut ChaCha8Rng, shift: ConeShift, margin: f64) -> CurvatureTensor {
    let t = random_kahler_tensor(n, rng, 1.0);
    match shift {
        ConeShift::None => t,
        ConeShift::Nakano => {
            let m = NakanoForm::from_frame_tensor(&t).min_symmetric();
            // g⊗g + swap adds 2 to every symmetric-Nakano eigenvalue.
            t.add_scaled(&t.metric_square_sym(), (margin - m) / 2.0)
        }
        ConeShift::Griffiths => {
            let seed = rng.gen::<u64>();
            let g = griffiths_min_frame(&t, seed, DEFAULT_RESTARTS).value;
            t.add_scaled(&t.metric_square_sym(), (margin - g).max(0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SmoothProfile;

    #[test]
    fn zero_tensor_gives_zero_form_and_margins() {
        let t = CurvatureTensor::zeros(2, CMatrix::identity(2));
        let f = nakano_form(&t).unwrap();
        assert_eq!(f.h.max_abs(), 0.0);
        let r = griffiths_implies_nakano_shifted(&t, 0.0, 1, 4).unwrap();
        assert_eq!(r.griffiths_min, 0.0);
        assert_eq!(r.nakano_min_sym, 0.0);
        assert!(chen_cone_monitor(&t, 1, 4).unwrap() <= 0.0);
    }

    #[test]
    fn symmetry_violations_are_rejected() {
        let mut t = CurvatureTensor::zeros(2, CMatrix::identity(2));
        t.set(0, 1, 0, 0, C64::new(1.0, 0.0));
        assert!(matches!(nakano_form(&t), Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn fubini_study_p2_has_one_dimensional_skew_kernel() {
        let c = SmoothProfile::fubini_study(2).curvature_at(0.3).unwrap();
        let form = nakano_form(&c).unwrap();
        let e = hermitian_eigen(&form.h);
        let zeros = e.values.iter().filter(|v| v.abs() < 1e-12).count();
        assert_eq!(zeros, 1);
        assert!(form.skew_defect() < 1e-12);
        assert!(form.min_symmetric() > 0.0);
        assert!(dim2_equivalence_check(&c, 3).unwrap());
    }

    #[test]
    fn fubini_study_p2_bisectional_range() {
        let c = SmoothProfile::fubini_study(2).curvature_at(0.6).unwrap();
        let g = griffiths_min(&c, 5, 8).unwrap();
        assert!((g.value - 1.0 / 3.0).abs() < 1e-12);
        let chen = chen_cone_monitor(&c, 5, 8).unwrap();
        assert!((chen - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chen_target_values() {
        assert_eq!(PositivityThreshold::chen_target(1, 1.0), 0.5);
        assert!((PositivityThreshold::chen_target(2, 1.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn demailly_rejects_small_q() {
        let x = [C64::new(1.0, 0.0)];
        assert!(demailly_average(&x, &x, 2, 0, 0).is_err());
    }

    #[test]
    fn random_tensors_are_kahler_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let t = random_kahler_tensor(n, &mut rng, 1.0);
            assert!(t.symmetry_defect() < 1e-15);
        }
    }

    #[test]
    fn large_negative_shift_makes_griffiths_negative() {
        let c = SmoothProfile::fubini_study(2).curvature_at(0.5).unwrap();
        let shifted = c.add_scaled(&c.metric_square(), -10.0);
        assert!(griffiths_min(&shifted, 2, 8).unwrap().value < 0.0);
    }
}
