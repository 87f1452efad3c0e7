//! Physical parameter model.
//!
//! Everything is nondimensional: time is measured in units of `1/γ` and
//! length in units of `c/γ`, so the atomic polarization decay rate and the
//! speed of light are both 1. The normalized mode area `a_eff` is the cavity
//! mode cross-section divided by the atomic scattering cross-section.

use crate::error::{Error, Result};

/// Atomic polarization decay rate in canonical units.
pub const GAMMA: f64 = 1.0;
/// Speed of light in canonical units.
pub const SPEED_OF_LIGHT: f64 = 1.0;

/// Effective round-trip loss above which the linearized bulk-loss model is rejected.
pub const MAX_LINEARIZED_LOSS: f64 = 0.5;

/// Regime ratios below this margin raise a [`RegimeWarning`].
pub const REGIME_MARGIN: f64 = 5.0;

/// Length-dependent round-trip loss `alpha' + beta * l_cav`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkLoss {
    /// Mirror scattering contribution.
    pub alpha_prime: f64,
    /// Bulk loss per unit length (units of `γ/c`).
    pub beta: f64,
}

impl BulkLoss {
    pub fn new(alpha_prime: f64, beta: f64) -> Self {
        Self { alpha_prime, beta }
    }

    /// Linearized round-trip loss at the given length.
    pub fn round_trip_loss(&self, l_cav: f64) -> f64 {
        self.alpha_prime + self.beta * l_cav
    }
}

/// The experimentally tunable cavity knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    /// Coupling-mirror transmittance.
    pub t_ex: f64,
    /// Optical length in units of `c/γ`.
    pub l_cav: f64,
    /// Normalized effective mode area.
    pub a_eff: f64,
    /// Round-trip loss. When `bulk` is set this is the linearized value at `l_cav`.
    pub alpha_loss: f64,
    pub bulk: Option<BulkLoss>,
}

impl CavityGeometry {
    pub fn new(t_ex: f64, l_cav: f64, a_eff: f64, alpha_loss: f64) -> Result<Self> {
        let geo = Self {
            t_ex,
            l_cav,
            a_eff,
            alpha_loss,
            bulk: None,
        };
        geo.validate()?;
        Ok(geo)
    }

    /// Geometry whose round-trip loss follows the linearized bulk model.
    pub fn with_bulk(t_ex: f64, l_cav: f64, a_eff: f64, bulk: BulkLoss) -> Result<Self> {
        let geo = Self {
            t_ex,
            l_cav,
            a_eff,
            alpha_loss: bulk.round_trip_loss(l_cav),
            bulk: Some(bulk),
        };
        geo.validate()?;
        Ok(geo)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t_ex", self.t_ex),
            ("l_cav", self.l_cav),
            ("a_eff", self.a_eff),
            ("alpha_loss", self.alpha_loss),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidGeometry(format!("{name} = {v} is not finite")));
        }
        if !(self.t_ex > 0.0 && self.t_ex < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "t_ex = {} outside (0, 1)",
                self.t_ex
            )));
        }
        if !(self.alpha_loss > 0.0 && self.alpha_loss < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "alpha_loss = {} outside (0, 1)",
                self.alpha_loss
            )));
        }
        if self.a_eff <= 0.0 {
            return Err(Error::InvalidGeometry(format!("a_eff = {} <= 0", self.a_eff)));
        }
        if self.l_cav <= 0.0 {
            return Err(Error::InvalidGeometry(format!("l_cav = {} <= 0", self.l_cav)));
        }
        if let Some(bulk) = self.bulk {
            if !(bulk.alpha_prime >= 0.0 && bulk.beta >= 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "bulk coefficients must be non-negative (alpha' = {}, beta = {})",
                    bulk.alpha_prime, bulk.beta
                )));
            }
            let linearized = bulk.round_trip_loss(self.l_cav);
            if linearized >= MAX_LINEARIZED_LOSS {
                return Err(Error::InvalidGeometry(format!(
                    "linearized bulk loss {linearized} >= {MAX_LINEARIZED_LOSS}"
                )));
            }
            if (linearized - self.alpha_loss).abs() > 1e-12 * linearized.max(1e-300) {
                return Err(Error::InvalidGeometry(format!(
                    "alpha_loss = {} disagrees with bulk model value {linearized}",
                    self.alpha_loss
                )));
            }
        }
        Ok(())
    }

    /// Internal cooperativity `1 / (a_eff * alpha_loss)`.
    pub fn c_in(&self) -> f64 {
        1.0 / (self.a_eff * self.alpha_loss)
    }

    /// Same geometry with a different mirror transmittance.
    pub fn with_t_ex(&self, t_ex: f64) -> Result<Self> {
        let geo = Self { t_ex, ..*self };
        geo.validate()?;
        Ok(geo)
    }

    /// Same geometry at a different length; a bulk-loss model is re-evaluated.
    pub fn with_l_cav(&self, l_cav: f64) -> Result<Self> {
        let alpha_loss = match self.bulk {
            Some(b) => b.round_trip_loss(l_cav),
            None => self.alpha_loss,
        };
        let geo = Self {
            l_cav,
            alpha_loss,
            ..*self
        };
        geo.validate()?;
        Ok(geo)
    }
}

/// Dynamical rates in units of `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    /// Atom-cavity coupling constant.
    pub g: f64,
    /// Internal (unwanted) cavity field decay.
    pub kappa_in: f64,
    /// External cavity field decay into the signal mode.
    pub kappa_ex: f64,
    /// Atomic polarization decay; 1 in canonical units.
    pub gamma: f64,
    /// `kappa_in + kappa_ex`.
    pub kappa: f64,
    /// Internal cooperativity `g² / (2 γ κ_in)`.
    pub c_in: f64,
}

impl RateParams {
    pub fn new(g: f64, kappa_in: f64, kappa_ex: f64) -> Result<Self> {
        let r = Self {
            g,
            kappa_in,
            kappa_ex,
            gamma: GAMMA,
            kappa: kappa_in + kappa_ex,
            c_in: g * g / (2.0 * GAMMA * kappa_in),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.g, self.kappa_in, self.kappa_ex, self.gamma];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rates must be finite and positive: {self:?}"
            )));
        }
        if self.kappa != self.kappa_in + self.kappa_ex {
            return Err(Error::InvalidArgument(
                "kappa must equal kappa_in + kappa_ex".into(),
            ));
        }
        Ok(())
    }

    pub fn g_over_kappa(&self) -> f64 {
        self.g / self.kappa
    }

    /// Slowest amplitude decay rate of the coupled cavity/atom modes.
    ///
    /// Sets how long the reflected field keeps ringing after the drive ends.
    pub fn slowest_decay_rate(&self) -> f64 {
        let mean = 0.5 * (self.kappa + self.gamma);
        let half_diff = 0.5 * (self.kappa - self.gamma);
        let disc = half_diff * half_diff - self.g * self.g;
        let coupled = if disc > 0.0 { mean - disc.sqrt() } else { mean };
        coupled.min(self.kappa)
    }
}

/// Rates from geometry in canonical units (`c = γ = 1`).
pub fn rates_from_geometry(geo: &CavityGeometry) -> Result<RateParams> {
    geo.validate()?;
    let l = geo.l_cav;
    let g = (SPEED_OF_LIGHT * GAMMA / (2.0 * geo.a_eff * l)).sqrt();
    let kappa_in = SPEED_OF_LIGHT * geo.alpha_loss / (4.0 * l);
    let kappa_ex = SPEED_OF_LIGHT * geo.t_ex / (4.0 * l);
    Ok(RateParams {
        g,
        kappa_in,
        kappa_ex,
        gamma: GAMMA,
        kappa: kappa_in + kappa_ex,
        c_in: g * g / (2.0 * GAMMA * kappa_in),
    })
}

/// Inverse of [`rates_from_geometry`] for a given mode area.
pub fn geometry_from_rates(r: &RateParams, a_eff: f64) -> Result<CavityGeometry> {
    r.validate()?;
    if !(a_eff.is_finite() && a_eff > 0.0) {
        return Err(Error::InvalidArgument(format!("a_eff = {a_eff} must be positive")));
    }
    if (r.gamma - GAMMA).abs() > 1e-12 {
        return Err(Error::Inconsistent(format!(
            "gamma = {} but canonical units fix gamma = 1",
            r.gamma
        )));
    }
    let l_cav = SPEED_OF_LIGHT * GAMMA / (2.0 * a_eff * r.g * r.g);
    let alpha_loss = 4.0 * l_cav * r.kappa_in / SPEED_OF_LIGHT;
    let t_ex = 4.0 * l_cav * r.kappa_ex / SPEED_OF_LIGHT;
    CavityGeometry::new(t_ex, l_cav, a_eff, alpha_loss).map_err(|e| match e {
        Error::InvalidGeometry(msg) => Error::Inconsistent(msg),
        other => other,
    })
}

/// Reported `κ_in/γ` for typical experimental platforms.
pub fn reference_ratio_table() -> Vec<(&'static str, f64)> {
    vec![
        ("free-space", 0.067),
        ("fiber", 8.3),
        ("nanophotonic", 460.0),
        ("nanofiber", 0.04),
    ]
}

/// Margins of the good-cavity phase-flip regime `2/a_eff ≫ t_ex ≫ alpha_loss`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeWarning {
    /// `(2/a_eff) / t_ex` fell below [`REGIME_MARGIN`].
    WeakAtomCoupling { ratio: f64 },
    /// `t_ex / alpha_loss` fell below [`REGIME_MARGIN`].
    NearCriticalCoupling { ratio: f64 },
}

impl std::fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeWarning::WeakAtomCoupling { ratio } => {
                write!(f, "weak_atom_coupling(ratio={ratio:.3})")
            }
            RegimeWarning::NearCriticalCoupling { ratio } => {
                write!(f, "near_critical_coupling(ratio={ratio:.3})")
            }
        }
    }
}

pub fn regime_warnings(geo: &CavityGeometry) -> Vec<RegimeWarning> {
    let mut out = Vec::new();
    let atom_ratio = 2.0 / geo.a_eff / geo.t_ex;
    if atom_ratio < REGIME_MARGIN {
        out.push(RegimeWarning::WeakAtomCoupling { ratio: atom_ratio });
    }
    let loss_ratio = geo.t_ex / geo.alpha_loss;
    if loss_ratio < REGIME_MARGIN {
        out.push(RegimeWarning::NearCriticalCoupling { ratio: loss_ratio });
    }
    out
}
