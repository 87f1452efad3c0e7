//! Reflection response of the one-sided cavity and the derived error budget.
//!
//! `L0(Δ)` is the amplitude reflection coefficient with the atom in the
//! uncoupled state `|0⟩`, `L1(Δ)` with the atom in `|1⟩` resonant with the
//! cavity. The delay convention is `L(Δ) ≈ L(0)·exp(-iΔτ)`, so a positive
//! `τ` is a late output pulse.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{rates_from_geometry, CavityGeometry, RateParams, GAMMA, SPEED_OF_LIGHT};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reflection coefficients at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSample {
    pub delta: f64,
    pub l0: Complex64,
    pub l1: Complex64,
}

/// Photon loss probabilities and pulse delays for both atomic states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub loss_0: f64,
    pub loss_1: f64,
    pub tau_0: f64,
    pub tau_1: f64,
}

impl ErrorBudget {
    /// External-mirror delay that balances both branches.
    pub fn tau_ref_midpoint(&self) -> f64 {
        0.5 * (self.tau_0 + self.tau_1)
    }
}

/// Low-order Taylor coefficients of `L0` and `L1` around `Δ = 0`.
///
/// Zeroth and second orders are real; the first-order coefficients are purely
/// imaginary and stored as their imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesCoefficients {
    pub l0_0: f64,
    pub l0_1: f64,
    pub l0_2: f64,
    pub l1_0: f64,
    pub l1_1: f64,
    pub l1_2: f64,
}

impl SeriesCoefficients {
    /// First-order model `c0 + i·c1·Δ` for both branches.
    pub fn first_order(&self, delta: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(self.l0_0, self.l0_1 * delta),
            Complex64::new(self.l1_0, self.l1_1 * delta),
        )
    }

    /// Second-order model `c0 + i·c1·Δ + c2·Δ²` for both branches.
    pub fn second_order(&self, delta: f64) -> (Complex64, Complex64) {
        let d2 = delta * delta;
        (
            Complex64::new(self.l0_0 + self.l0_2 * d2, self.l0_1 * delta),
            Complex64::new(self.l1_0 + self.l1_2 * d2, self.l1_1 * delta),
        )
    }
}

/// Derivatives of the error budget with respect to `t_ex`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexDerivatives {
    pub dl0: f64,
    pub dl1: f64,
    pub dtau0: f64,
    pub dtau1: f64,
}

/// Reflection coefficients from the dynamical rates.
pub fn eval_response(r: &RateParams, delta: f64) -> ResponseSample {
    let id = I * delta;
    let l0 = (r.kappa_in - r.kappa_ex + id) / (r.kappa + id);
    let atom = r.g * r.g / (r.gamma + id);
    let l1 = (r.kappa_in - r.kappa_ex + id + atom) / (r.kappa + id + atom);
    ResponseSample { delta, l0, l1 }
}

/// Reflection coefficients written directly in terms of the cavity geometry.
pub fn eval_response_geometric(geo: &CavityGeometry, delta: f64) -> Result<ResponseSample> {
    geo.validate()?;
    let phase = I * (4.0 * geo.l_cav * delta / SPEED_OF_LIGHT);
    let atom = 2.0 / (geo.a_eff * (1.0 + I * (delta / GAMMA)));
    let (t, a) = (geo.t_ex, geo.alpha_loss);
    let l0 = (a - t + phase) / (a + t + phase);
    let l1 = (a - t + phase + atom) / (a + t + phase + atom);
    Ok(ResponseSample { delta, l0, l1 })
}

/// Group delay `-d arg L/dΔ` of both branches at an arbitrary detuning.
///
/// Evaluated from the analytic logarithmic derivative, so there is no phase
/// unwrapping involved.
pub fn group_delay(r: &RateParams, delta: f64) -> (f64, f64) {
    let id = I * delta;
    let base_n = r.kappa_in - r.kappa_ex + id;
    let base_d = r.kappa + id;
    let tau0 = -(I / base_n - I / base_d).im;

    let atom = r.g * r.g / (r.gamma + id);
    let datom = -I * r.g * r.g / ((r.gamma + id) * (r.gamma + id));
    let n1 = base_n + atom;
    let d1 = base_d + atom;
    let tau1 = -((I + datom) / n1 - (I + datom) / d1).im;
    (tau0, tau1)
}

pub fn series_coefficients(geo: &CavityGeometry) -> Result<SeriesCoefficients> {
    let r = rates_from_geometry(geo)?;
    let (t, a, l, ae) = (geo.t_ex, geo.alpha_loss, geo.l_cav, geo.a_eff);
    let c = SPEED_OF_LIGHT;
    let g2 = r.g * r.g;
    let gm = r.gamma;

    let sum0 = a + t;
    let l0_0 = (a - t) / sum0;
    let l0_1 = 8.0 * l * t / (c * sum0 * sum0);
    let l0_2 = 2.0 * r.kappa_ex / r.kappa.powi(3);

    let sum1 = a + t + 2.0 / ae;
    let l1_0 = (a - t + 2.0 / ae) / sum1;
    let l1_1 = 4.0 * t * (2.0 * ae * l * gm - c) / (c * gm * ae * sum1 * sum1);
    let denom = g2 + gm * r.kappa;
    let l1_2 = -2.0 * r.kappa_ex * (2.0 * g2 * gm + g2 * r.kappa - gm.powi(3)) / denom.powi(3);

    Ok(SeriesCoefficients {
        l0_0,
        l0_1,
        l0_2,
        l1_0,
        l1_1,
        l1_2,
    })
}

fn check_pole(geo: &CavityGeometry) -> Result<()> {
    if (geo.t_ex - geo.alpha_loss).abs() < 1e-12 {
        return Err(Error::DegenerateCoupling {
            t_ex: geo.t_ex,
            alpha_loss: geo.alpha_loss,
        });
    }
    Ok(())
}

/// Loss probabilities and delays from their closed forms.
pub fn error_budget(geo: &CavityGeometry) -> Result<ErrorBudget> {
    geo.validate()?;
    check_pole(geo)?;
    let (t, a, l, ae) = (geo.t_ex, geo.alpha_loss, geo.l_cav, geo.a_eff);
    let (c, gm) = (SPEED_OF_LIGHT, GAMMA);

    let r0 = (a - t) / (a + t);
    let r1 = (a - t + 2.0 / ae) / (a + t + 2.0 / ae);
    let tau_0 = 8.0 * l * t / (c * (t * t - a * a));
    let tau_1 = -t * (2.0 * ae * l * gm - c) / (c * gm * (a + 1.0 / ae - ae * (t * t - a * a) / 4.0));
    Ok(ErrorBudget {
        loss_0: 1.0 - r0 * r0,
        loss_1: 1.0 - r1 * r1,
        tau_0,
        tau_1,
    })
}

/// Closed-form `t_ex` derivatives of the four error measures.
pub fn tex_derivatives(geo: &CavityGeometry) -> Result<TexDerivatives> {
    geo.validate()?;
    check_pole(geo)?;
    let (t, a, l, ae) = (geo.t_ex, geo.alpha_loss, geo.l_cav, geo.a_eff);
    let (c, gm) = (SPEED_OF_LIGHT, GAMMA);
    let b = 2.0 / ae;

    let dl0 = -4.0 * a * (t - a) / (t + a).powi(3);
    let dl1 = 4.0 * (b + a) * (b - t + a) / (b + t + a).powi(3);
    let dtau0 = -8.0 * l * (t * t + a * a) / (c * (t * t - a * a).powi(2));
    let dtau1 = 4.0 * (c / ae - 2.0 * l * gm) * (t * t + a * a + 4.0 * a / ae + 4.0 / (ae * ae))
        / (c * gm * (t - a - b).powi(2) * (t + a + b).powi(2));
    Ok(TexDerivatives {
        dl0,
        dl1,
        dtau0,
        dtau1,
    })
}
