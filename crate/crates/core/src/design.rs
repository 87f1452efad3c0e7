//! Analytic optimal cavity parameters and numerical refinement against the
//! finite-pulse gate fidelity.
//!
//! All optima use the exact (pre-approximation) closed forms; the
//! `*_approx` variants exist for diagnostics only.

use crate::error::{Error, Result};
use crate::optimize::{maximize_log, Maximum};
use crate::par::Execution;
use crate::params::{
    regime_warnings, BulkLoss, CavityGeometry, RateParams, RegimeWarning, GAMMA, SPEED_OF_LIGHT,
};

/// Loss-balancing transmittance `α·sqrt(2/(a·α) + 1)`.
pub fn tex_loss(a_eff: f64, alpha_loss: f64) -> f64 {
    alpha_loss * (2.0 / (a_eff * alpha_loss) + 1.0).sqrt()
}

pub fn tex_loss_approx(a_eff: f64, alpha_loss: f64) -> f64 {
    (2.0 * alpha_loss / a_eff).sqrt()
}

/// Transmittance that equalizes the two branch delays at length `l_cav`.
pub fn tex_delay(l_cav: f64, a_eff: f64, alpha_loss: f64) -> f64 {
    (8.0 * l_cav * GAMMA / SPEED_OF_LIGHT * (alpha_loss + 1.0 / a_eff) + alpha_loss * alpha_loss)
        .sqrt()
}

pub fn tex_delay_approx(l_cav: f64, a_eff: f64) -> f64 {
    (8.0 * l_cav * GAMMA / (SPEED_OF_LIGHT * a_eff)).sqrt()
}

/// Length at which the loss- and delay-optimal transmittances coincide.
pub fn lcav_opt(a_eff: f64, alpha_loss: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * GAMMA * (a_eff + 1.0 / alpha_loss))
}

/// `c·α/(4γ)`, equivalent to `κ_in = γ`.
pub fn lcav_opt_approx(alpha_loss: f64) -> f64 {
    SPEED_OF_LIGHT * alpha_loss / (4.0 * GAMMA)
}

/// Optimal length when the round-trip loss grows with length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BulkOptimum {
    Length(f64),
    /// Bulk loss dominates (`β ≥ 4γ/c`): the shortest cavity is best.
    ZeroLength,
}

pub fn lcav_bulk(alpha_prime: f64, beta: f64) -> BulkOptimum {
    let denom = 4.0 * GAMMA - SPEED_OF_LIGHT * beta;
    if denom <= 0.0 {
        BulkOptimum::ZeroLength
    } else {
        BulkOptimum::Length(SPEED_OF_LIGHT * alpha_prime / denom)
    }
}

/// Minimum pulse duration for the first-order (loss + delay) picture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationThreshold {
    /// `max(1/κ, κ/g²)`.
    pub w_min: f64,
    pub inv_kappa: f64,
    pub kappa_over_g2: f64,
    /// `1/(γ·sqrt(2·C_in))`, valid at the optimal design point.
    pub simplified: f64,
}

impl DurationThreshold {
    /// Duration at which higher-order distortion becomes visible in practice.
    pub fn marker(&self) -> f64 {
        5.0 * self.simplified
    }
}

pub fn duration_threshold(r: &RateParams) -> DurationThreshold {
    let inv_kappa = 1.0 / r.kappa;
    let kappa_over_g2 = r.kappa / (r.g * r.g);
    DurationThreshold {
        w_min: inv_kappa.max(kappa_over_g2),
        inv_kappa,
        kappa_over_g2,
        simplified: 1.0 / (r.gamma * (2.0 * r.c_in).sqrt()),
    }
}

/// Round-trip loss model of a design problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossModel {
    Fixed(f64),
    Bulk(BulkLoss),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignFlag {
    Regime(RegimeWarning),
    /// `β ≥ 4γ/c`, a zero-length cavity is optimal.
    BulkDominated,
}

impl std::fmt::Display for DesignFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DesignFlag::Regime(w) => w.fmt(f),
            DesignFlag::BulkDominated => f.write_str("zero_length_optimal"),
        }
    }
}

/// Analytic design summary.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub a_eff: f64,
    /// Round-trip loss the optima were evaluated with.
    pub alpha_loss: f64,
    pub t_ex_loss: f64,
    /// Delay-matching transmittance at `l_cav_opt`.
    pub t_ex_delay: f64,
    pub l_cav_opt: f64,
    pub l_cav_bulk: Option<BulkOptimum>,
    pub w_t_min: f64,
    pub flags: Vec<DesignFlag>,
}

impl DesignPoint {
    /// True when regime warnings make analytic comparisons unreliable.
    pub fn has_regime_warning(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, DesignFlag::Regime(_)))
    }

    pub fn geometry(&self) -> Result<CavityGeometry> {
        CavityGeometry::new(self.t_ex_loss, self.l_cav_opt, self.a_eff, self.alpha_loss)
    }
}

pub fn design_point(a_eff: f64, loss: LossModel) -> Result<DesignPoint> {
    if !(a_eff.is_finite() && a_eff > 0.0) {
        return Err(Error::InvalidArgument(format!("a_eff = {a_eff} must be positive")));
    }
    let mut flags = Vec::new();
    let (alpha_loss, l_cav_bulk) = match loss {
        LossModel::Fixed(alpha) => (alpha, None),
        LossModel::Bulk(b) => {
            if !(b.alpha_prime >= 0.0 && b.beta >= 0.0) {
                return Err(Error::InvalidArgument(format!("invalid bulk model {b:?}")));
            }
            let opt = lcav_bulk(b.alpha_prime, b.beta);
            let alpha = match opt {
                BulkOptimum::Length(l) => b.round_trip_loss(l),
                BulkOptimum::ZeroLength => {
                    flags.push(DesignFlag::BulkDominated);
                    b.alpha_prime
                }
            };
            (alpha, Some(opt))
        }
    };
    if !(alpha_loss > 0.0 && alpha_loss < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_loss = {alpha_loss} outside (0, 1)"
        )));
    }
    let t_ex_loss = tex_loss(a_eff, alpha_loss);
    let l_cav_opt = lcav_opt(a_eff, alpha_loss);
    let t_ex_delay = tex_delay(l_cav_opt, a_eff, alpha_loss);
    let c_in = 1.0 / (a_eff * alpha_loss);
    let probe = CavityGeometry {
        t_ex: t_ex_loss,
        l_cav: l_cav_opt,
        a_eff,
        alpha_loss,
        bulk: None,
    };
    flags.extend(regime_warnings(&probe).into_iter().map(DesignFlag::Regime));
    Ok(DesignPoint {
        a_eff,
        alpha_loss,
        t_ex_loss,
        t_ex_delay,
        l_cav_opt,
        l_cav_bulk,
        w_t_min: 1.0 / (GAMMA * (2.0 * c_in).sqrt()),
        flags,
    })
}

/// One row of the transmittance-versus-length curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmittanceRow {
    pub l_cav: f64,
    pub t_ex_loss: f64,
    pub t_ex_delay: f64,
    pub t_ex_loss_approx: f64,
    pub t_ex_delay_approx: f64,
}

/// Both optimal transmittances on a log-spaced length grid.
pub fn transmittance_curves(
    a_eff: f64,
    alpha_loss: f64,
    l_min: f64,
    l_max: f64,
    count: usize,
) -> Result<Vec<TransmittanceRow>> {
    if !(l_min > 0.0 && l_max > l_min && l_max.is_finite() && count >= 2) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < l_min < l_max and count >= 2, got [{l_min}, {l_max}] x {count}"
        )));
    }
    CavityGeometry::new(tex_loss(a_eff, alpha_loss), l_min, a_eff, alpha_loss)?;
    let (lo, hi) = (l_min.ln(), l_max.ln());
    Ok((0..count)
        .map(|i| {
            let l = match i {
                0 => l_min,
                i if i == count - 1 => l_max,
                i => (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp(),
            };
            TransmittanceRow {
                l_cav: l,
                t_ex_loss: tex_loss(a_eff, alpha_loss),
                t_ex_delay: tex_delay(l, a_eff, alpha_loss),
                t_ex_loss_approx: tex_loss_approx(a_eff, alpha_loss),
                t_ex_delay_approx: tex_delay_approx(l, a_eff),
            }
        })
        .collect())
}

/// Length where the two exact curves cross, recovered from sampled rows.
///
/// `t_ex_delay² - t_ex_loss²` is affine in `l_cav`, so linear interpolation of
/// that difference between the bracketing rows is exact.
pub fn curve_crossing(rows: &[TransmittanceRow]) -> Option<f64> {
    let diff = |r: &TransmittanceRow| r.t_ex_delay.powi(2) - r.t_ex_loss.powi(2);
    rows.windows(2).find_map(|w| {
        let (d0, d1) = (diff(&w[0]), diff(&w[1]));
        if d0 == 0.0 {
            Some(w[0].l_cav)
        } else if d0 * d1 < 0.0 || d1 == 0.0 {
            Some(w[0].l_cav + (w[1].l_cav - w[0].l_cav) * d0 / (d0 - d1))
        } else {
            None
        }
    })
}

/// Numerical optimization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Relative tolerance on `t_ex`.
    pub tex_rel_tol: f64,
    /// Relative tolerance on `l_cav`.
    pub lcav_rel_tol: f64,
    /// Fidelities closer than this count as ties (smaller argument wins).
    pub tie_tol: f64,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tex_rel_tol: 1e-4,
            lcav_rel_tol: 1e-3,
            tie_tol: 1e-9,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexOptimum {
    pub t_ex: f64,
    pub fidelity: f64,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcavOptimum {
    pub l_cav: f64,
    pub t_ex: f64,
    pub fidelity: f64,
}

/// Transmittance search bracket at a given length.
pub fn tex_bracket(l_cav: f64, a_eff: f64, alpha_loss: f64) -> (f64, f64) {
    let t_delay = tex_delay(l_cav, a_eff, alpha_loss);
    let lo = (1.001 * alpha_loss).max(0.1 * t_delay);
    let hi = (0.9 * 2.0 / a_eff).min(10.0 * t_delay).min(0.999);
    (lo, hi)
}

/// Maximizes `fidelity(geometry, w_t)` over the mirror transmittance.
pub fn optimize_tex<F>(
    l_cav: f64,
    a_eff: f64,
    alpha_loss: f64,
    w_t: f64,
    fidelity: &F,
    opts: &SearchOptions,
) -> Result<TexOptimum>
where
    F: Fn(&CavityGeometry, f64) -> Result<f64> + Sync,
{
    if !(w_t.is_finite() && w_t > 0.0) {
        return Err(Error::InvalidArgument(format!("w_t = {w_t} must be positive")));
    }
    let (lo, hi) = tex_bracket(l_cav, a_eff, alpha_loss);
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds must fail too
    if !(lo < hi) {
        return Err(Error::BracketFailure(format!(
            "empty transmittance bracket [{lo:e}, {hi:e}] at l_cav = {l_cav:e}"
        )));
    }
    let objective = |t: f64| {
        let geo = CavityGeometry::new(t, l_cav, a_eff, alpha_loss)?;
        fidelity(&geo, w_t)
    };
    let Maximum {
        x,
        value,
        used_fallback,
        ..
    } = maximize_log(objective, lo, hi, opts.tex_rel_tol, 0.0, opts.execution)?;
    Ok(TexOptimum {
        t_ex: x,
        fidelity: value,
        used_fallback,
    })
}

/// Nested search: outer over `l_cav` in `[1e-2, 1e2]·l_cav_opt`, inner over `t_ex`.
pub fn optimize_lcav<F>(
    a_eff: f64,
    alpha_loss: f64,
    w_t: f64,
    fidelity: &F,
    opts: &SearchOptions,
) -> Result<LcavOptimum>
where
    F: Fn(&CavityGeometry, f64) -> Result<f64> + Sync,
{
    let centre = lcav_opt(a_eff, alpha_loss);
    // inner searches stay sequential; the outer fallback scan is what fans out
    let inner = SearchOptions {
        execution: Execution::Sequential,
        ..*opts
    };
    let objective = |l: f64| {
        optimize_tex(l, a_eff, alpha_loss, w_t, fidelity, &inner).map(|o| o.fidelity)
    };
    let outer = maximize_log(
        objective,
        1e-2 * centre,
        1e2 * centre,
        opts.lcav_rel_tol,
        opts.tie_tol,
        opts.execution,
    )?;
    let best = optimize_tex(outer.x, a_eff, alpha_loss, w_t, fidelity, &inner)?;
    Ok(LcavOptimum {
        l_cav: outer.x,
        t_ex: best.t_ex,
        fidelity: best.fidelity,
    })
}
