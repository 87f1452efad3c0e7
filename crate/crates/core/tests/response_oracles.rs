use cpf_core::design::{lcav_opt, tex_loss};
use cpf_core::params::{rates_from_geometry, CavityGeometry};
use cpf_core::response::{
    error_budget, eval_response, eval_response_geometric, group_delay, series_coefficients,
    tex_derivatives,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_geometry(rng: &mut ChaCha8Rng) -> CavityGeometry {
    loop {
        let t = rng.gen_range(1e-5..0.99);
        let l = 10f64.powf(rng.gen_range(-6.0..0.0));
        let a = 10f64.powf(rng.gen_range(-1.0..1.0));
        let alpha = 10f64.powf(rng.gen_range(-6.0..-0.3));
        if let Ok(g) = CavityGeometry::new(t, l, a, alpha) {
            return g;
        }
    }
}

/// Regime geometries near the optimal design, `l_cav` within a factor 2.
fn regime_geometries() -> impl Strategy<Value = CavityGeometry> {
    (-0.5f64..0.5, 2.0f64..5.0, 0.5f64..2.0, 0.7f64..1.4).prop_map(|(log_a, log_c, s, u)| {
        let a = 10f64.powf(log_a);
        let alpha = 1.0 / (a * 10f64.powf(log_c));
        CavityGeometry::new(u * tex_loss(a, alpha), s * lcav_opt(a, alpha), a, alpha).unwrap()
    })
}

/// Richardson-extrapolated central first derivative.
fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * c(h / 2.0) - c(h)) / 3.0
}

/// Richardson-extrapolated central second derivative.
fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * c(h / 2.0) - c(h)) / 3.0
}

#[test]
fn passivity_on_random_geometries() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let geo = random_geometry(&mut rng);
        let r = rates_from_geometry(&geo).unwrap();
        let delta = rng.gen_range(-1e3..1e3) * r.kappa.max(1.0);
        let s = eval_response(&r, delta);
        assert!(s.l0.norm() <= 1.0 + 1e-12, "{geo:?} {delta}");
        assert!(s.l1.norm() <= 1.0 + 1e-12, "{geo:?} {delta}");
        let z = eval_response(&r, 0.0);
        assert!(z.l0.im.abs() < 1e-14 && z.l1.im.abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn conjugate_symmetry(geo in regime_geometries(), x in -100.0f64..100.0) {
        let r = rates_from_geometry(&geo).unwrap();
        let (p, m) = (eval_response(&r, x), eval_response(&r, -x));
        prop_assert!((m.l0 - p.l0.conj()).norm() < 1e-12);
        prop_assert!((m.l1 - p.l1.conj()).norm() < 1e-12);
    }

    #[test]
    fn geometric_and_rate_forms_agree(geo in regime_geometries(), x in -100.0f64..100.0) {
        let a = eval_response(&rates_from_geometry(&geo).unwrap(), x);
        let b = eval_response_geometric(&geo, x).unwrap();
        prop_assert!((a.l0 - b.l0).norm() < 1e-12);
        prop_assert!((a.l1 - b.l1).norm() < 1e-12);
    }

    #[test]
    fn budget_matches_direct_evaluation(geo in regime_geometries()) {
        let r = rates_from_geometry(&geo).unwrap();
        let b = error_budget(&geo).unwrap();
        let s = eval_response(&r, 0.0);
        prop_assert!((b.loss_0 - (1.0 - s.l0.norm_sqr())).abs() < 1e-12);
        prop_assert!((b.loss_1 - (1.0 - s.l1.norm_sqr())).abs() < 1e-12);

        // phase slope by finite differences of the unwrapped phase
        let h = 1e-3 * r.kappa.min(1.0);
        let phase0 = |d: f64| (eval_response(&r, d).l0 / s.l0).arg();
        let phase1 = |d: f64| (eval_response(&r, d).l1 / s.l1).arg();
        prop_assert!(rel(-d1(phase0, 0.0, h), b.tau_0) < 1e-6);
        prop_assert!(rel(-d1(phase1, 0.0, h), b.tau_1) < 1e-6);
        let (g0, g1) = group_delay(&r, 0.0);
        prop_assert!(rel(g0, b.tau_0) < 1e-12 && rel(g1, b.tau_1) < 1e-12);
    }

    #[test]
    fn series_coefficients_match_derivatives(geo in regime_geometries()) {
        let r = rates_from_geometry(&geo).unwrap();
        let c = series_coefficients(&geo).unwrap();
        // steps scaled to the nearest pole of each branch
        let h0 = 2e-2 * r.kappa;
        let h1 = 2e-2 * r.slowest_decay_rate();
        let im0 = |d: f64| eval_response(&r, d).l0.im;
        let im1 = |d: f64| eval_response(&r, d).l1.im;
        let re0 = |d: f64| eval_response(&r, d).l0.re;
        let re1 = |d: f64| eval_response(&r, d).l1.re;
        prop_assert!(rel(d1(im0, 0.0, h0), c.l0_1) < 1e-6);
        prop_assert!(rel(d1(im1, 0.0, h1), c.l1_1) < 1e-6);
        prop_assert!(rel(0.5 * d2(re0, 0.0, h0), c.l0_2) < 1e-6);
        prop_assert!(rel(0.5 * d2(re1, 0.0, h1), c.l1_2) < 1e-6);
        let s = eval_response(&r, 0.0);
        prop_assert!((s.l0.re - c.l0_0).abs() < 1e-14 && (s.l1.re - c.l1_0).abs() < 1e-14);
    }

    #[test]
    fn first_order_model_error_is_quadratic(geo in regime_geometries(), u in -1.0f64..1.0) {
        let r = rates_from_geometry(&geo).unwrap();
        let c = series_coefficients(&geo).unwrap();
        let delta = 0.01 * r.kappa * u;
        let s = eval_response(&r, delta);
        let (f0, f1) = c.first_order(delta);
        let d2 = delta * delta;
        prop_assert!((s.l0 - f0).norm() <= 1.5 * c.l0_2.abs() * d2 + 1e-15);
        prop_assert!((s.l1 - f1).norm() <= 1.5 * c.l1_2.abs() * d2 + 1e-15);
    }

    #[test]
    fn transmittance_derivatives_match_finite_differences(geo in regime_geometries()) {
        let d = tex_derivatives(&geo).unwrap();
        let at = |t: f64| error_budget(&geo.with_t_ex(t).unwrap()).unwrap();
        let t = geo.t_ex;
        let h = 1e-3 * t;
        prop_assert!(rel(d1(|t| at(t).loss_0, t, h), d.dl0) < 1e-5);
        prop_assert!(rel(d1(|t| at(t).loss_1, t, h), d.dl1) < 1e-5);
        prop_assert!(rel(d1(|t| at(t).tau_0, t, h), d.dtau0) < 1e-5);
        prop_assert!(rel(d1(|t| at(t).tau_1, t, h), d.dtau1) < 1e-5);
    }
}

#[test]
fn derivative_signs_near_optimal_length() {
    for &(a, alpha) in &[(1.0, 0.001), (0.5, 1e-4), (2.0, 2e-3)] {
        let geo = CavityGeometry::new(tex_loss(a, alpha), lcav_opt(a, alpha), a, alpha).unwrap();
        let d = tex_derivatives(&geo).unwrap();
        assert!(d.dl0 < 0.0 && d.dl1 > 0.0 && d.dtau0 < 0.0 && d.dtau1 > 0.0, "{d:?}");
    }
}

#[test]
fn degenerate_coupling_is_reported() {
    let geo = CavityGeometry::new(0.001, 1e-3, 1.0, 0.001).unwrap();
    assert!(matches!(
        error_budget(&geo),
        Err(cpf_core::Error::DegenerateCoupling { .. })
    ));
    // the response itself stays finite at critical coupling
    let s = eval_response(&rates_from_geometry(&geo).unwrap(), 0.0);
    assert!(s.l0.norm() < 1e-12 && s.l1.norm().is_finite());
}
