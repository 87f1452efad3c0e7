//! Parameter sweeps over pulse duration, cavity length and transmittance.
//!
//! Points are evaluated independently and collected by grid index, so the
//! output is identical for any thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::design::{lcav_opt, optimize_lcav, optimize_tex, SearchOptions};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::params::{rates_from_geometry, CavityGeometry};
use crate::pulse::{gate_fidelity, GateAmplitudes, TauRefPolicy};
use crate::response::error_budget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AxisName {
    WT,
    LCav,
    TEx,
}

impl AxisName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisName::WT => "w_t",
            AxisName::LCav => "l_cav",
            AxisName::TEx => "t_ex",
        }
    }
}

impl FromStr for AxisName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w_t" => Ok(AxisName::WT),
            "l_cav" => Ok(AxisName::LCav),
            "t_ex" => Ok(AxisName::TEx),
            _ => Err(Error::InvalidSweep(format!(
                "unknown axis {s:?} (expected w_t, l_cav or t_ex)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "lin" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            _ => Err(Error::InvalidSweep(format!("unknown spacing {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn validate(&self) -> Result<()> {
        let name = self.name.as_str();
        if self.count < 2 {
            return Err(Error::InvalidSweep(format!("axis {name}: count must be >= 2")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidSweep(format!(
                "axis {name}: need finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(Error::InvalidSweep(format!("axis {name}: log spacing needs min > 0")));
        }
        Ok(())
    }

    /// Grid values; the end points are exactly `min` and `max`.
    pub fn values(&self) -> Vec<f64> {
        let last = self.count - 1;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == last {
                    return self.max;
                }
                let s = i as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.min + s * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + s * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Fidelity,
    GOverKappa,
    Loss0,
    Loss1,
    Tau0,
    Tau1,
    TExStar,
    LCavStar,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::Fidelity,
        Quantity::GOverKappa,
        Quantity::Loss0,
        Quantity::Loss1,
        Quantity::Tau0,
        Quantity::Tau1,
        Quantity::TExStar,
        Quantity::LCavStar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Fidelity => "fidelity",
            Quantity::GOverKappa => "g_over_kappa",
            Quantity::Loss0 => "loss_0",
            Quantity::Loss1 => "loss_1",
            Quantity::Tau0 => "tau_0",
            Quantity::Tau1 => "tau_1",
            Quantity::TExStar => "t_ex_star",
            Quantity::LCavStar => "l_cav_star",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| Error::InvalidSweep(format!("unknown quantity {s:?}")))
    }
}

/// How `t_ex` is chosen where it is not a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TexChoice {
    Fixed(f64),
    /// Per-point numerical optimum of the gate fidelity.
    Optimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub a_eff: f64,
    pub alpha_loss: f64,
    /// Used when `w_t` is not an axis.
    pub w_t: Option<f64>,
    /// Used when `l_cav` is not an axis; defaults to the analytic optimum.
    pub l_cav: Option<f64>,
    pub t_ex: TexChoice,
    pub quantities: Vec<Quantity>,
    pub amplitudes: GateAmplitudes,
    pub tau_ref: TauRefPolicy,
    pub search: SearchOptions,
}

impl SweepSpec {
    pub fn new(a_eff: f64, alpha_loss: f64) -> Self {
        Self {
            axes: Vec::new(),
            a_eff,
            alpha_loss,
            w_t: None,
            l_cav: None,
            t_ex: TexChoice::Optimize,
            quantities: vec![Quantity::Fidelity],
            amplitudes: GateAmplitudes::default(),
            tau_ref: TauRefPolicy::Midpoint,
            search: SearchOptions::default(),
        }
    }

    fn has_axis(&self, name: AxisName) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    fn needs_w_t(&self) -> bool {
        let optimizing = self.t_ex == TexChoice::Optimize && !self.has_axis(AxisName::TEx);
        optimizing
            || self.quantities.iter().any(|q| {
                matches!(q, Quantity::Fidelity | Quantity::TExStar | Quantity::LCavStar)
            })
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > 2 {
            return Err(Error::InvalidSweep("at most two axes are supported".into()));
        }
        for (i, a) in self.axes.iter().enumerate() {
            a.validate()?;
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidSweep(format!("axis {} repeated", a.name.as_str())));
            }
        }
        if self.quantities.is_empty() {
            return Err(Error::InvalidSweep("no quantities requested".into()));
        }
        if self.needs_w_t() && !self.has_axis(AxisName::WT) && self.w_t.is_none() {
            return Err(Error::InvalidSweep("w_t must be an axis or a fixed value".into()));
        }
        for (label, v) in [("w_t", self.w_t), ("l_cav", self.l_cav)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidSweep(format!("{label} = {v} must be positive")));
                }
            }
        }
        // surfaces InvalidGeometry for bad a_eff / alpha_loss early
        CavityGeometry::new(
            match self.t_ex {
                TexChoice::Fixed(t) => t,
                TexChoice::Optimize => 0.5 * (self.alpha_loss + 1.0),
            },
            self.l_cav.unwrap_or(1.0),
            self.a_eff,
            self.alpha_loss,
        )?;
        Ok(())
    }

    /// Every grid point in row-major order (first axis outermost).
    pub fn points(&self) -> Vec<BTreeMap<AxisName, f64>> {
        let mut points = vec![BTreeMap::new()];
        for axis in &self.axes {
            let values = axis.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(axis.name, v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub w_t: f64,
    pub l_cav: f64,
    pub t_ex: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub quantities: Vec<Quantity>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["w_t", "l_cav", "t_ex"].iter().map(|s| s.to_string()).collect();
        h.extend(self.quantities.iter().map(|q| q.as_str().to_string()));
        h
    }

    pub fn column(&self, q: Quantity) -> Option<Vec<f64>> {
        let i = self.quantities.iter().position(|&x| x == q)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    /// Comma-separated, `\n`-terminated, 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header().join(","))?;
        for row in &self.rows {
            let mut fields = vec![fmt_value(row.w_t), fmt_value(row.l_cav), fmt_value(row.t_ex)];
            fields.extend(row.values.iter().map(|&v| fmt_value(v)));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Float formatting shared by every CSV writer: 15 significant digits.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.14e}")
    }
}

fn evaluate_point(
    spec: &SweepSpec,
    point: &BTreeMap<AxisName, f64>,
    lcav_star: &BTreeMap<u64, f64>,
) -> Result<SweepRow> {
    let w_t = point.get(&AxisName::WT).copied().or(spec.w_t).unwrap_or(f64::NAN);
    let l_cav = point
        .get(&AxisName::LCav)
        .copied()
        .or(spec.l_cav)
        .unwrap_or_else(|| lcav_opt(spec.a_eff, spec.alpha_loss));
    let objective = |geo: &CavityGeometry, w: f64| {
        gate_fidelity(geo, &spec.amplitudes, w, spec.tau_ref).map(|r| r.fidelity)
    };
    let inner = SearchOptions {
        execution: Execution::Sequential,
        ..spec.search
    };
    let wants = |q: Quantity| spec.quantities.contains(&q);

    let mut optimum = None;
    let t_ex = match (point.get(&AxisName::TEx), spec.t_ex) {
        (Some(&t), _) => t,
        (None, TexChoice::Fixed(t)) => t,
        (None, TexChoice::Optimize) => {
            let o = optimize_tex(l_cav, spec.a_eff, spec.alpha_loss, w_t, &objective, &inner)?;
            optimum = Some(o);
            o.t_ex
        }
    };
    let t_star = if wants(Quantity::TExStar) {
        match optimum {
            Some(o) => o.t_ex,
            None => optimize_tex(l_cav, spec.a_eff, spec.alpha_loss, w_t, &objective, &inner)?.t_ex,
        }
    } else {
        f64::NAN
    };

    let geo = CavityGeometry::new(t_ex, l_cav, spec.a_eff, spec.alpha_loss)?;
    let rates = rates_from_geometry(&geo)?;
    let budget = if spec
        .quantities
        .iter()
        .any(|q| matches!(q, Quantity::Loss0 | Quantity::Loss1 | Quantity::Tau0 | Quantity::Tau1))
    {
        Some(error_budget(&geo)?)
    } else {
        None
    };
    let fidelity = if wants(Quantity::Fidelity) {
        match optimum {
            Some(o) => o.fidelity,
            None => objective(&geo, w_t)?,
        }
    } else {
        f64::NAN
    };

    let values = spec
        .quantities
        .iter()
        .map(|q| match q {
            Quantity::Fidelity => fidelity,
            Quantity::GOverKappa => rates.g_over_kappa(),
            Quantity::Loss0 => budget.map_or(f64::NAN, |b| b.loss_0),
            Quantity::Loss1 => budget.map_or(f64::NAN, |b| b.loss_1),
            Quantity::Tau0 => budget.map_or(f64::NAN, |b| b.tau_0),
            Quantity::Tau1 => budget.map_or(f64::NAN, |b| b.tau_1),
            Quantity::TExStar => t_star,
            Quantity::LCavStar => lcav_star.get(&w_t.to_bits()).copied().unwrap_or(f64::NAN),
        })
        .collect();
    Ok(SweepRow {
        w_t,
        l_cav,
        t_ex,
        values,
    })
}

/// Evaluates the sweep; the row order is the row-major grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let exec = spec.search.execution;
    let points = spec.points();

    let mut lcav_star = BTreeMap::new();
    if spec.quantities.contains(&Quantity::LCavStar) {
        let mut durations: Vec<f64> = points
            .iter()
            .map(|p| p.get(&AxisName::WT).copied().or(spec.w_t).unwrap_or(f64::NAN))
            .collect();
        durations.sort_by(f64::total_cmp);
        durations.dedup();
        let objective = |geo: &CavityGeometry, w: f64| {
            gate_fidelity(geo, &spec.amplitudes, w, spec.tau_ref).map(|r| r.fidelity)
        };
        let inner = SearchOptions {
            execution: Execution::Sequential,
            ..spec.search
        };
        let optima = par::map(exec, &durations, |&w| {
            optimize_lcav(spec.a_eff, spec.alpha_loss, w, &objective, &inner).map(|o| o.l_cav)
        });
        for (w, o) in durations.iter().zip(optima) {
            lcav_star.insert(w.to_bits(), o?);
        }
    }

    let rows = par::map(exec, &points, |p| evaluate_point(spec, p, &lcav_star));
    Ok(SweepTable {
        quantities: spec.quantities.clone(),
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
    })
}
