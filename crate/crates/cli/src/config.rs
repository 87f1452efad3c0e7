//! TOML configuration. Every section is optional; unknown keys are errors.

use std::path::Path;

use cpf_core::design::{design_point, DesignPoint, LossModel, SearchOptions};
use cpf_core::params::BulkLoss;
use cpf_core::pulse::{GateAmplitudes, TauRefPolicy};
use cpf_core::sweep::{Axis, Quantity, SweepSpec, TexChoice};
use cpf_core::{CavityGeometry, Error, Result};
use num_complex::Complex64;
use serde::Deserialize;

pub const DEFAULT_C_IN: f64 = 1000.0;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub cavity: CavitySection,
    pub bulk: Option<BulkSection>,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub amplitudes: AmplitudeSection,
    #[serde(default)]
    pub response: ResponseSection,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub search: SearchSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    #[serde(default = "one")]
    pub a_eff: f64,
    /// Round-trip loss; mutually exclusive with `c_in`.
    pub alpha_loss: Option<f64>,
    /// Internal cooperativity `1/(a_eff·alpha_loss)`.
    pub c_in: Option<f64>,
    /// Defaults to the loss-balancing optimum.
    pub t_ex: Option<f64>,
    /// Defaults to the analytic optimal length.
    pub l_cav: Option<f64>,
}

impl Default for CavitySection {
    fn default() -> Self {
        Self {
            a_eff: 1.0,
            alpha_loss: None,
            c_in: None,
            t_ex: None,
            l_cav: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulkSection {
    pub alpha_prime: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TauRefSetting {
    Value(f64),
    Named(NamedTauRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTauRef {
    Midpoint,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default = "default_w_t")]
    pub w_t: f64,
    #[serde(default = "midpoint")]
    pub tau_ref: TauRefSetting,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            w_t: default_w_t(),
            tau_ref: midpoint(),
        }
    }
}

/// A real amplitude or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    fn value(self) -> Complex64 {
        match self {
            Amplitude::Real(x) => Complex64::new(x, 0.0),
            Amplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSection {
    #[serde(default = "half")]
    pub a0: Amplitude,
    #[serde(default = "half")]
    pub a1: Amplitude,
    #[serde(default = "half")]
    pub ah: Amplitude,
    #[serde(default = "half")]
    pub av: Amplitude,
}

impl Default for AmplitudeSection {
    fn default() -> Self {
        Self {
            a0: half(),
            a1: half(),
            ah: half(),
            av: half(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSection {
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "default_delta_max")]
    pub delta_max: f64,
    #[serde(default = "default_response_count")]
    pub count: usize,
}

impl Default for ResponseSection {
    fn default() -> Self {
        Self {
            delta_min: default_delta_min(),
            delta_max: default_delta_max(),
            count: default_response_count(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default = "default_l_min")]
    pub l_min: f64,
    #[serde(default = "default_l_max")]
    pub l_max: f64,
    #[serde(default = "default_design_count")]
    pub count: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            l_min: default_l_min(),
            l_max: default_l_max(),
            count: default_design_count(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TexSetting {
    Value(f64),
    Named(NamedTex),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTex {
    Optimize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Defaults to the 25×25 duration/length grid; an empty list sweeps one point.
    pub axis: Option<Vec<AxisSection>>,
    #[serde(default = "default_quantities")]
    pub quantities: Vec<String>,
    #[serde(default = "optimize")]
    pub t_ex: TexSetting,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: None,
            quantities: default_quantities(),
            t_ex: optimize(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { tol: default_tol() }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "default_tex_tol")]
    pub tex_rel_tol: f64,
    #[serde(default = "default_lcav_tol")]
    pub lcav_rel_tol: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            tex_rel_tol: default_tex_tol(),
            lcav_rel_tol: default_lcav_tol(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_w_t() -> f64 {
    30.0
}
fn midpoint() -> TauRefSetting {
    TauRefSetting::Named(NamedTauRef::Midpoint)
}
fn half() -> Amplitude {
    Amplitude::Real(std::f64::consts::FRAC_1_SQRT_2)
}
fn default_delta_min() -> f64 {
    -150.0
}
fn default_delta_max() -> f64 {
    150.0
}
fn default_response_count() -> usize {
    601
}
fn default_l_min() -> f64 {
    1e-5
}
fn default_l_max() -> f64 {
    1e-2
}
fn default_design_count() -> usize {
    61
}
fn default_spacing() -> String {
    "log".into()
}
fn default_quantities() -> Vec<String> {
    vec!["fidelity".into(), "g_over_kappa".into()]
}
fn optimize() -> TexSetting {
    TexSetting::Named(NamedTex::Optimize)
}
fn default_tol() -> f64 {
    1e-9
}
fn default_tex_tol() -> f64 {
    1e-4
}
fn default_lcav_tol() -> f64 {
    1e-3
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        let c = &self.cavity;
        match (self.bulk, c.alpha_loss, c.c_in) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(Error::InvalidArgument(
                "config: [bulk] replaces cavity.alpha_loss and cavity.c_in".into(),
            )),
            (_, Some(_), Some(_)) => Err(Error::InvalidArgument(
                "config: give either cavity.alpha_loss or cavity.c_in, not both".into(),
            )),
            (Some(b), None, None) => Ok(LossModel::Bulk(BulkLoss::new(b.alpha_prime, b.beta))),
            (None, Some(a), None) => Ok(LossModel::Fixed(a)),
            (None, None, c_in) => {
                let c_in = c_in.unwrap_or(DEFAULT_C_IN);
                if !(c_in.is_finite() && c_in > 0.0) {
                    return Err(Error::InvalidArgument(format!("config: c_in = {c_in} must be positive")));
                }
                Ok(LossModel::Fixed(1.0 / (c.a_eff * c_in)))
            }
        }
    }

    pub fn design_point(&self) -> Result<DesignPoint> {
        design_point(self.cavity.a_eff, self.loss_model()?)
    }

    /// Working geometry: explicit values where given, analytic optima otherwise.
    pub fn geometry(&self) -> Result<CavityGeometry> {
        let dp = self.design_point()?;
        let t_ex = self.cavity.t_ex.unwrap_or(dp.t_ex_loss);
        match self.loss_model()? {
            LossModel::Fixed(alpha) => CavityGeometry::new(
                t_ex,
                self.cavity.l_cav.unwrap_or(dp.l_cav_opt),
                self.cavity.a_eff,
                alpha,
            ),
            LossModel::Bulk(b) => {
                let l = match (self.cavity.l_cav, dp.l_cav_bulk) {
                    (Some(l), _) => l,
                    (None, Some(cpf_core::design::BulkOptimum::Length(l))) => l,
                    _ => {
                        return Err(Error::InvalidArgument(
                            "config: zero-length optimum; set cavity.l_cav explicitly".into(),
                        ))
                    }
                };
                CavityGeometry::with_bulk(t_ex, l, self.cavity.a_eff, b)
            }
        }
    }

    pub fn amplitudes(&self) -> Result<GateAmplitudes> {
        let a = &self.amplitudes;
        GateAmplitudes::new(a.a0.value(), a.a1.value(), a.ah.value(), a.av.value())
    }

    pub fn tau_ref(&self) -> TauRefPolicy {
        match self.pulse.tau_ref {
            TauRefSetting::Value(t) => TauRefPolicy::Explicit(t),
            TauRefSetting::Named(NamedTauRef::Midpoint) => TauRefPolicy::Midpoint,
        }
    }

    pub fn search(&self) -> SearchOptions {
        SearchOptions {
            tex_rel_tol: self.search.tex_rel_tol,
            lcav_rel_tol: self.search.lcav_rel_tol,
            ..SearchOptions::default()
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let geo = self.geometry()?;
        let mut spec = SweepSpec::new(geo.a_eff, geo.alpha_loss);
        spec.axes = match &self.sweep.axis {
            None => default_axes(),
            Some(axes) => axes
                .iter()
                .map(|a| {
                    Ok(Axis {
                        name: a.name.parse()?,
                        min: a.min,
                        max: a.max,
                        count: a.count,
                        spacing: a.spacing.parse()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        spec.quantities = self
            .sweep
            .quantities
            .iter()
            .map(|q| q.parse::<Quantity>())
            .collect::<Result<Vec<_>>>()?;
        spec.w_t = Some(self.pulse.w_t);
        spec.l_cav = Some(geo.l_cav);
        spec.t_ex = match self.sweep.t_ex {
            TexSetting::Value(t) => TexChoice::Fixed(t),
            TexSetting::Named(NamedTex::Optimize) => TexChoice::Optimize,
        };
        spec.amplitudes = self.amplitudes()?;
        spec.tau_ref = self.tau_ref();
        spec.search = self.search();
        spec.validate()?;
        Ok(spec)
    }
}

/// Duration and length axes of the fidelity map, 25 points each.
pub fn default_axes() -> Vec<Axis> {
    use cpf_core::sweep::{AxisName, Spacing};
    vec![
        Axis {
            name: AxisName::WT,
            min: 0.03,
            max: 30.0,
            count: 25,
            spacing: Spacing::Log,
        },
        Axis {
            name: AxisName::LCav,
            min: 1e-5,
            max: 1e-2,
            count: 25,
            spacing: Spacing::Log,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference_design() {
        let c = Config::parse("").unwrap();
        let geo = c.geometry().unwrap();
        assert!((geo.c_in() - 1000.0).abs() < 1e-9);
        assert!((geo.t_ex - 0.001 * 2001f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.tau_ref(), TauRefPolicy::Midpoint);
        assert_eq!(c.pulse.w_t, 30.0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(Config::parse("[cavity]\nc_inn = 10\n").is_err());
        assert!(Config::parse("[nonsense]\n").is_err());
        assert!(Config::parse("[pulse]\ntau_ref = \"middle\"\n").is_err());
    }

    #[test]
    fn amplitudes_and_delays_parse() {
        let c = Config::parse(
            "[amplitudes]\nah = 0.0\nav = [0.0, 1.0]\n[pulse]\ntau_ref = 0.05\nw_t = 2.0\n",
        )
        .unwrap();
        let a = c.amplitudes().unwrap();
        assert_eq!(a.av, Complex64::new(0.0, 1.0));
        assert_eq!(c.tau_ref(), TauRefPolicy::Explicit(0.05));
    }

    #[test]
    fn conflicting_loss_settings_are_rejected() {
        let c = Config::parse("[cavity]\nalpha_loss = 0.001\nc_in = 1000\n").unwrap();
        assert!(c.loss_model().is_err());
    }

    #[test]
    fn sweep_section_builds_spec() {
        let c = Config::parse(
            "[sweep]\nquantities = [\"loss_0\"]\nt_ex = 0.05\n\
             [[sweep.axis]]\nname = \"l_cav\"\nmin = 1e-4\nmax = 1e-3\ncount = 3\n",
        )
        .unwrap();
        let s = c.sweep_spec().unwrap();
        assert_eq!(s.axes.len(), 1);
        assert_eq!(s.t_ex, TexChoice::Fixed(0.05));
        assert_eq!(s.quantities, vec![Quantity::Loss0]);
        assert_eq!(Config::parse("").unwrap().sweep_spec().unwrap().axes.len(), 2);
    }
}
