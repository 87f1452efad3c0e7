use cpf_core::design::{lcav_opt, optimize_lcav, optimize_tex, tex_bracket, tex_loss, SearchOptions};
use cpf_core::params::{rates_from_geometry, CavityGeometry};
use cpf_core::pulse::{fidelity_objective, GateAmplitudes, TauRefPolicy};
use cpf_core::Execution;

const A: f64 = 1.0;
const ALPHA: f64 = 0.001;

fn objective() -> impl Fn(&CavityGeometry, f64) -> cpf_core::Result<f64> + Sync {
    fidelity_objective(GateAmplitudes::default(), TauRefPolicy::Midpoint)
}

/// Brute-force maximum over a dense log grid of the transmittance bracket.
fn scan_tex(l_cav: f64, w_t: f64, points: usize) -> f64 {
    let f = objective();
    let (lo, hi) = tex_bracket(l_cav, A, ALPHA);
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..points {
        let t = lo * (hi / lo).powf(k as f64 / (points - 1) as f64);
        let v = f(&CavityGeometry::new(t, l_cav, A, ALPHA).unwrap(), w_t).unwrap();
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn long_pulse_transmittance_is_the_loss_optimum() {
    let opts = SearchOptions::default();
    let t_loss = tex_loss(A, ALPHA);
    for (scale, within) in [(1.0, 0.02), (4.0, 0.05)] {
        let l = scale * lcav_opt(A, ALPHA);
        let found = optimize_tex(l, A, ALPHA, 30.0, &objective(), &opts).unwrap();
        assert!(rel(found.t_ex, t_loss) < within, "scale {scale}: {}", found.t_ex);
        let scanned = scan_tex(l, 30.0, 401);
        assert!(rel(found.t_ex, scanned) < 0.01, "scale {scale}: {} vs {scanned}", found.t_ex);
    }
}

#[test]
fn short_pulses_prefer_smaller_transmittance() {
    let opts = SearchOptions::default();
    let found = optimize_tex(lcav_opt(A, ALPHA), A, ALPHA, 0.05, &objective(), &opts).unwrap();
    assert!(found.t_ex < tex_loss(A, ALPHA), "{}", found.t_ex);
}

#[test]
fn halving_tolerances_leaves_the_optimum_in_place() {
    let opts = SearchOptions::default();
    let tight = SearchOptions {
        tex_rel_tol: opts.tex_rel_tol / 2.0,
        lcav_rel_tol: opts.lcav_rel_tol / 2.0,
        ..opts
    };
    let a = optimize_lcav(A, ALPHA, 1.0, &objective(), &opts).unwrap();
    let b = optimize_lcav(A, ALPHA, 1.0, &objective(), &tight).unwrap();
    assert!(rel(a.l_cav, b.l_cav) < 2.0 * opts.lcav_rel_tol);
    assert!(rel(a.t_ex, b.t_ex) < 0.01);
    assert!((a.fidelity - b.fidelity).abs() < 1e-8);
}

#[test]
fn optimal_length_tracks_the_analytic_value() {
    let opts = SearchOptions::default();
    let l_opt = lcav_opt(A, ALPHA);
    let long = optimize_lcav(A, ALPHA, 10.0, &objective(), &opts).unwrap();
    assert!(rel(long.l_cav, l_opt) < 0.25, "{}", long.l_cav / l_opt);
    let short = optimize_lcav(A, ALPHA, 0.05, &objective(), &opts).unwrap();
    assert!(short.l_cav < l_opt, "{}", short.l_cav / l_opt);
    for o in [long, short] {
        let geo = CavityGeometry::new(o.t_ex, o.l_cav, A, ALPHA).unwrap();
        let gk = rates_from_geometry(&geo).unwrap().g_over_kappa();
        assert!((0.8..=1.25).contains(&gk), "{gk}");
    }
}

#[test]
fn sequential_and_parallel_searches_agree() {
    let seq = SearchOptions {
        execution: Execution::Sequential,
        ..SearchOptions::default()
    };
    let par = SearchOptions::default();
    let a = optimize_lcav(A, ALPHA, 0.3, &objective(), &seq).unwrap();
    let b = optimize_lcav(A, ALPHA, 0.3, &objective(), &par).unwrap();
    assert_eq!(a, b);
}
