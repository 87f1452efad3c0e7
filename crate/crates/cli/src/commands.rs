//! Subcommand bodies. Each returns the text it would emit so it can be tested
//! without touching the file system.

use cpf_core::design::{curve_crossing, transmittance_curves, BulkOptimum};
use cpf_core::pulse::gate_fidelity;
use cpf_core::response::series_coefficients;
use cpf_core::sweep::{fmt_value, run_sweep, Axis, AxisName, Spacing, SweepTable};
use cpf_core::timedomain::cross_validate;
use cpf_core::{eval_response, rates_from_geometry, Result};

use crate::config::Config;
use crate::output::report;

/// Reflection spectrum with first-order overlays.
pub fn response_csv(cfg: &Config) -> Result<String> {
    let geo = cfg.geometry()?;
    let rates = rates_from_geometry(&geo)?;
    let series = series_coefficients(&geo)?;
    let axis = Axis {
        name: AxisName::WT,
        min: cfg.response.delta_min,
        max: cfg.response.delta_max,
        count: cfg.response.count,
        spacing: Spacing::Linear,
    };
    axis.validate()
        .map_err(|e| cpf_core::Error::InvalidArgument(format!("response range: {e}")))?;
    let mut out = String::from(
        "delta,abs_l0,arg_l0,abs_l1,arg_l1,abs_l0_first,arg_l0_first,abs_l1_first,arg_l1_first\n",
    );
    for delta in axis.values() {
        let s = eval_response(&rates, delta);
        let (f0, f1) = series.first_order(delta);
        let fields = [
            delta,
            s.l0.norm(),
            s.l0.arg(),
            s.l1.norm(),
            s.l1.arg(),
            f0.norm(),
            f0.arg(),
            f1.norm(),
            f1.arg(),
        ];
        out.push_str(&fields.map(fmt_value).join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Design report and the transmittance-versus-length CSV.
pub fn design(cfg: &Config) -> Result<(String, String)> {
    let dp = cfg.design_point()?;
    let d = &cfg.design;
    let rows = transmittance_curves(dp.a_eff, dp.alpha_loss, d.l_min, d.l_max, d.count)?;
    let mut csv = String::from("l_cav,t_ex_loss,t_ex_delay,t_ex_loss_approx,t_ex_delay_approx\n");
    for r in &rows {
        let fields = [
            r.l_cav,
            r.t_ex_loss,
            r.t_ex_delay,
            r.t_ex_loss_approx,
            r.t_ex_delay_approx,
        ];
        csv.push_str(&fields.map(fmt_value).join(","));
        csv.push('\n');
    }
    let threshold = 1.0 / (2.0 / (dp.a_eff * dp.alpha_loss)).sqrt();
    let flags: Vec<String> = dp.flags.iter().map(|f| f.to_string()).collect();
    let mut pairs = vec![
        ("a_eff", fmt_value(dp.a_eff)),
        ("alpha_loss", fmt_value(dp.alpha_loss)),
        ("c_in", fmt_value(1.0 / (dp.a_eff * dp.alpha_loss))),
        ("t_ex_loss", fmt_value(dp.t_ex_loss)),
        ("t_ex_delay", fmt_value(dp.t_ex_delay)),
        ("l_cav_opt", fmt_value(dp.l_cav_opt)),
    ];
    match dp.l_cav_bulk {
        Some(BulkOptimum::Length(l)) => pairs.push(("l_cav_bulk", fmt_value(l))),
        Some(BulkOptimum::ZeroLength) => pairs.push(("l_cav_bulk", fmt_value(0.0))),
        None => {}
    }
    pairs.extend([
        ("w_t_min", fmt_value(dp.w_t_min)),
        ("w_t_marker", fmt_value(5.0 * threshold)),
        (
            "curve_crossing",
            curve_crossing(&rows).map_or("none".to_string(), fmt_value),
        ),
        (
            "flags",
            if flags.is_empty() {
                "none".to_string()
            } else {
                flags.join(";")
            },
        ),
    ]);
    Ok((report(&pairs), csv))
}

/// Gate fidelity report, optionally cross-checked by the integrator.
pub fn fidelity(cfg: &Config, oracle: bool) -> Result<String> {
    let geo = cfg.geometry()?;
    let amps = cfg.amplitudes()?;
    let w_t = cfg.pulse.w_t;
    let r = gate_fidelity(&geo, &amps, w_t, cfg.tau_ref())?;
    let rates = rates_from_geometry(&geo)?;
    let mut pairs = vec![
        ("t_ex", fmt_value(geo.t_ex)),
        ("l_cav", fmt_value(geo.l_cav)),
        ("a_eff", fmt_value(geo.a_eff)),
        ("alpha_loss", fmt_value(geo.alpha_loss)),
        ("w_t", fmt_value(w_t)),
        ("g_over_kappa", fmt_value(rates.g_over_kappa())),
        ("tau_ref", fmt_value(r.tau_ref)),
        ("loss_0", fmt_value(r.budget.loss_0)),
        ("loss_1", fmt_value(r.budget.loss_1)),
        ("tau_0", fmt_value(r.budget.tau_0)),
        ("tau_1", fmt_value(r.budget.tau_1)),
        ("first_order_valid", r.first_order_valid.to_string()),
        ("fidelity", fmt_value(r.fidelity)),
    ];
    if oracle {
        let o = cross_validate(&geo, &amps, w_t, cfg.tau_ref(), cfg.oracle.tol)?;
        pairs.extend([
            ("oracle_tol", fmt_value(cfg.oracle.tol)),
            ("fidelity_time_domain", fmt_value(o.time_domain.fidelity)),
            ("fidelity_difference", fmt_value((o.time_domain.fidelity - r.fidelity).abs())),
            ("oracle_distance_0", fmt_value(o.distance_0)),
            ("oracle_distance_1", fmt_value(o.distance_1)),
            ("oracle_distance", fmt_value(o.max_distance())),
        ]);
    }
    Ok(report(&pairs))
}

/// Sweep table and its CSV text.
pub fn sweep(cfg: &Config) -> Result<(SweepTable, String)> {
    let spec = cfg.sweep_spec()?;
    let table = run_sweep(&spec)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    Ok((table, String::from_utf8(buf).expect("CSV is ASCII")))
}

/// SVG for a sweep: heatmap over two axes, line plot over one.
pub fn sweep_svg(cfg: &Config, csv_text: &str) -> Result<String> {
    let spec = cfg.sweep_spec()?;
    let value = spec.quantities[0].as_str();
    match spec.axes.as_slice() {
        [outer, inner] => crate::svg::heatmap(csv_text, inner.name.as_str(), outer.name.as_str(), value),
        [only] => crate::svg::line_plot(csv_text, only.name.as_str(), value),
        _ => Err(cpf_core::Error::InvalidArgument(
            "svg output needs one or two sweep axes".into(),
        )),
    }
}
