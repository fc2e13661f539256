use kfl_core::flow::{advance, run_flow, FlowConfig, FlowState, Scheme};
use kfl_core::functionals::{compute_y, compute_z, futaki_report, kenergy_along_run};
use kfl_core::geometry::{perturbed_profile, ricci_potential, total_volume, ProfileGeometry};
use kfl_core::Error;
use proptest::prelude::*;

fn short_config(p: &kfl_core::geometry::MomentumProfile, t_max: f64, frac: f64) -> FlowConfig {
    let base = FlowConfig { t_max, expensive_every: 1_000_000, ..FlowConfig::default() };
    let dt = frac * base.dt_limit(p);
    let steps = (t_max / dt).ceil() as usize;
    FlowConfig { dt, sample_every: (steps / 10).max(1), ..base }
}

#[test]
fn halving_dt_changes_monitors_little() {
    let p = perturbed_profile(1, 65, 0.8, 0.1).unwrap();
    let cfg = short_config(&p, 0.5, 0.8);
    let a = run_flow(&cfg, &p).unwrap();
    let cfg2 = FlowConfig { dt: cfg.dt / 2.0, sample_every: cfg.sample_every * 2, ..cfg.clone() };
    let b = run_flow(&cfg2, &p).unwrap();
    assert_eq!(a.series.samples.len(), b.series.samples.len());
    for (x, y) in a.series.samples.iter().zip(&b.series.samples) {
        assert!((x.t - y.t).abs() < 1e-12);
        for (u, v) in [(x.sup_u, y.sup_u), (x.sup_r, y.sup_r), (x.y, y.y), (x.sup_ric_minus_g, y.sup_ric_minus_g)] {
            assert!((u - v).abs() <= 1e-4 * u.abs().max(1e-8), "{u} vs {v} at t={}", x.t);
        }
    }
}

#[test]
fn p2_fixture_keeps_positive_bisectional_curvature() {
    let p = perturbed_profile(2, 97, 0.8, 0.1).unwrap();
    let cfg = short_config(&p, 2.0, 0.8);
    let run = run_flow(&cfg, &p).unwrap();
    assert!(run.series.samples[0].griffiths_margin > 0.0);
    assert!(run.series.positivity_preserved());
    let first = &run.series.samples[0];
    let last = run.series.samples.last().unwrap();
    assert!(last.sup_r_minus_n < 0.1 * first.sup_r_minus_n);
}

#[test]
fn imex_agrees_with_rk4() {
    let p = perturbed_profile(1, 65, 0.8, 0.1).unwrap();
    let rk = short_config(&p, 1.0, 0.8);
    let imex = FlowConfig { scheme: Scheme::Imex, cfl_safety: 5.0, dt: rk.dt * 4.0, sample_every: rk.sample_every / 4, ..rk.clone() };
    let a = run_flow(&rk, &p).unwrap().final_state;
    let b = run_flow(&imex, &p).unwrap().final_state;
    let diff = a
        .profile
        .theta()
        .iter()
        .zip(b.profile.theta())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff < 1e-4, "{diff}");
}

#[test]
fn unstable_steps_halt_with_positivity_loss() {
    let p = perturbed_profile(1, 65, 0.8, 0.1).unwrap();
    let mut theta = p.theta().to_vec();
    let dt = 40.0 * FlowConfig::default().dt_limit(&p);
    let err = advance(1, &mut theta, dt, 200, Scheme::Rk4, 0).unwrap_err();
    assert!(matches!(err, Error::PositivityLoss { .. }), "{err:?}");
}

#[test]
fn functionals_converge_under_refinement() {
    let coarse = FlowState::new(perturbed_profile(1, 257, 0.8, 0.1).unwrap()).unwrap();
    let fine = FlowState::new(perturbed_profile(1, 513, 0.8, 0.1).unwrap()).unwrap();
    assert!((compute_y(&coarse) - compute_y(&fine)).abs() <= 1e-6);
    let (zc, zf) = (compute_z(&coarse), compute_z(&fine));
    assert!((zc.scalar_term - zf.scalar_term).abs() <= 1e-6);
    assert!((zc.ricci_term - zf.ricci_term).abs() <= 1e-6);
}

#[test]
fn kenergy_is_monotone_along_a_run() {
    let p = perturbed_profile(1, 65, 0.8, 0.1).unwrap();
    let run = run_flow(&short_config(&p, 1.0, 0.8), &p).unwrap();
    let k = kenergy_along_run(&run.series).unwrap();
    assert!(k.monotone);
    assert_eq!(k.k[0], 0.0);
    assert!(k.k.last().unwrap() < &0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn total_scalar_curvature_is_topological(eps in 0.0f64..0.8, kappa in -0.2f64..0.2, n in 1usize..=2) {
        let p = perturbed_profile(n, 129, eps, kappa).unwrap();
        let geo = ProfileGeometry::new(&p);
        let total = geo.integrate(&geo.scalar);
        prop_assert!((total - n as f64 * total_volume(n)).abs() <= 1e-6 * total_volume(n));
    }

    #[test]
    fn potential_is_normalized(eps in 0.0f64..0.8, kappa in -0.2f64..0.2, n in 1usize..=2) {
        let p = perturbed_profile(n, 129, eps, kappa).unwrap();
        let u = ricci_potential(&p).unwrap();
        prop_assert!((u.normalization_ratio() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn y_is_nonnegative_and_futaki_vanishes(eps in 0.0f64..0.8, kappa in -0.2f64..0.2) {
        let s = FlowState::new(perturbed_profile(1, 129, eps, kappa).unwrap()).unwrap();
        prop_assert!(compute_y(&s) >= 0.0);
        prop_assert!(futaki_report(&s, "prop").unwrap().max_abs() <= 1e-6);
    }
}
