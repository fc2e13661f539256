//! Independent oracles: explicit Fubini–Study formulas, chart finite differences,
//! dense eigensolvers from nalgebra and brute-force sums.

use approx::assert_relative_eq;
use kfl_core::geometry::{
    amplitude, curvature_closed_form, curvature_fd_oracle, fubini_study_profile, metric_from_smooth, perturbed_profile,
    ricci_and_scalar, ChartSpec, CurvatureTensor, MomentumProfile, SmoothProfile,
};
use kfl_core::linalg::{hermitian_eigen, CMatrix, SymTridiagonal};
use kfl_core::positivity::{demailly_average, demailly_closed_form};
use kfl_core::C64;
use nalgebra::{DMatrix, Complex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fs_explicit(n: usize, z: &[C64]) -> CMatrix {
    let a = amplitude(n);
    let r: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    CMatrix::from_fn(n, |j, i| {
        let d = if i == j { 1.0 + r } else { 0.0 };
        (C64::new(d, 0.0) - z[i].conj() * z[j]) * (a / ((1.0 + r) * (1.0 + r)))
    })
}

fn sample_point(n: usize) -> Vec<C64> {
    if n == 1 {
        vec![C64::new(0.6, 0.35)]
    } else {
        vec![C64::new(0.5, -0.2), C64::new(0.1, 0.45)]
    }
}

fn ricci_defect(c: &CurvatureTensor) -> f64 {
    let ric = ricci_and_scalar(c).unwrap().ricci;
    let n = c.n();
    let mut m = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            m = m.max((ric[(a, b)] - c.metric[(a, b)]).norm());
        }
    }
    m
}

fn fd_at(sp: &SmoothProfile, z: &[C64], h: f64) -> CurvatureTensor {
    let chart = ChartSpec::stencil(z, h);
    let field = metric_from_smooth(sp, &chart).unwrap();
    curvature_fd_oracle(&field, 0, h).unwrap()
}

#[test]
fn smooth_fubini_study_matches_explicit_metric() {
    for n in 1..=2 {
        let sp = SmoothProfile::fubini_study(n);
        let z = sample_point(n);
        let g = sp.metric_at(&z).unwrap();
        let e = fs_explicit(n, &z);
        for a in 0..n {
            for b in 0..n {
                assert!((g[(a, b)] - e[(a, b)]).norm() < 1e-12, "n={n}");
            }
        }
    }
}

#[test]
fn fubini_study_is_einstein_in_both_computations() {
    for n in 1..=2 {
        let p = fubini_study_profile(n).unwrap();
        for &t in &[0.05, 0.3, 0.5, 0.8, 0.97] {
            let c = curvature_closed_form(&p, t).unwrap();
            assert!(ricci_defect(&c) <= 1e-8, "closed form n={n} τ={t}");
        }
        let z = sample_point(n);
        let c = fd_at(&SmoothProfile::fubini_study(n), &z, 5e-3);
        assert!(ricci_defect(&c) <= 1e-4, "oracle n={n}: {}", ricci_defect(&c));
    }
}

#[test]
fn oracle_error_is_second_order() {
    for n in 1..=2 {
        // Explicit metric, so the only error is the stencil's.
        let z = sample_point(n);
        let err = |h: f64| {
            let chart = ChartSpec::stencil(&z, h);
            let field = kfl_core::geometry::MetricField::from_fn(&chart, |p| Ok(fs_explicit(n, p))).unwrap();
            ricci_defect(&curvature_fd_oracle(&field, 0, h).unwrap())
        };
        let ratio = err(2e-2) / err(1e-2);
        assert!((ratio - 4.0).abs() <= 0.8, "n={n}: ratio {ratio}");
    }
}

#[test]
fn closed_form_matches_oracle_on_perturbed_metric() {
    for n in 1..=2 {
        let p = perturbed_profile(n, 257, 0.8, 0.1).unwrap();
        let sp = SmoothProfile::fit(&p).unwrap();
        let z = sample_point(n);
        let r: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let tau = sp.tau_of_s(r.ln()).unwrap();
        // The closed form lives at (√r, 0, …); a unitary rotation maps z there.
        let closed = sp.curvature_at(tau).unwrap();
        let e1 = z.iter().map(|v| v / r.sqrt()).collect::<Vec<_>>();
        let basis = if n == 1 {
            CMatrix::from_fn(1, |_, _| e1[0])
        } else {
            let e2 = [-e1[1].conj(), e1[0].conj()];
            CMatrix::from_fn(2, |a, b| if b == 0 { e1[a] } else { e2[a] })
        };
        let fd = |h: f64| {
            let c = fd_at(&sp, &z, h);
            // Components in the rotated basis: R(U e_a, …).
            let mut worst = 0.0_f64;
            for j in 0..n {
                for i in 0..n {
                    for l in 0..n {
                        for k in 0..n {
                            let mut v = C64::new(0.0, 0.0);
                            for jj in 0..n {
                                for ii in 0..n {
                                    for ll in 0..n {
                                        for kk in 0..n {
                                            v += basis[(jj, j)].conj()
                                                * basis[(ii, i)]
                                                * basis[(ll, l)].conj()
                                                * basis[(kk, k)]
                                                * c.get(jj, ii, ll, kk);
                                        }
                                    }
                                }
                            }
                            worst = worst.max((v - closed.get(j, i, l, k)).norm());
                        }
                    }
                }
            }
            worst
        };
        let (e1, e2) = (fd(1e-2), fd(5e-3));
        assert!(e2 <= 1e-4, "n={n}: {e2}");
        assert!((e1 / e2 - 4.0).abs() <= 0.8, "n={n}: ratio {}", e1 / e2);
    }
}

#[test]
fn jacobi_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [1usize, 2, 4, 9] {
        let raw: Vec<C64> = (0..d * d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let h = CMatrix::from_fn(d, |r, c| (raw[r * d + c] + raw[c * d + r].conj()) * 0.5);
        let ours = hermitian_eigen(&h);
        let m = DMatrix::from_fn(d, d, |r, c| Complex::new(h[(r, c)].re, h[(r, c)].im));
        let mut theirs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ours.values.iter().zip(&theirs) {
            assert_relative_eq!(*a, *b, epsilon = 1e-11);
        }
    }
}

#[test]
fn bisection_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 40;
    let t = SymTridiagonal {
        diag: (0..m).map(|_| rng.gen_range(0.0..4.0)).collect(),
        off: (0..m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let dense = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            t.diag[r]
        } else if r + 1 == c {
            t.off[r]
        } else if c + 1 == r {
            t.off[c]
        } else {
            0.0
        }
    });
    let mut ev: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (k, e) in ev.iter().enumerate() {
        assert_relative_eq!(t.eigenvalue(k).unwrap(), *e, epsilon = 1e-11);
    }
}

#[test]
fn demailly_matches_literal_nine_terms() {
    // n = 2, q = 3, α = β = 1: Σ_λ x^λ conj(y^λ) over the 9 pairs of cube roots.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = [C64::new(rng.gen(), rng.gen()), C64::new(rng.gen(), rng.gen())];
    let y = [C64::new(rng.gen(), rng.gen()), C64::new(rng.gen(), rng.gen())];
    let w = |k: usize| C64::from_polar(1.0, 2.0 * core::f64::consts::PI * k as f64 / 3.0);
    let mut lit = C64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            let sx = w(a) * x[0] + w(b) * x[1];
            let sy = w(a) * y[0] + w(b) * y[1];
            lit += sx * sy.conj();
        }
    }
    lit /= 9.0;
    let avg = demailly_average(&x, &y, 3, 1, 1).unwrap();
    assert!((avg - lit).norm() <= 1e-12 * lit.norm().max(1.0));
    let closed = demailly_closed_form(&x, &y, 1, 1);
    assert!((closed - lit).norm() <= 1e-12 * lit.norm().max(1.0));
}

#[test]
fn perturbed_profile_is_admissible() {
    let p: MomentumProfile = perturbed_profile(1, 257, 0.8, 0.1).unwrap();
    assert_eq!(p.len(), 257);
    assert!(p.theta().iter().skip(1).take(255).all(|v| *v > 0.0));
}
