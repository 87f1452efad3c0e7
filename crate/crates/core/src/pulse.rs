//! Sampled single-photon wave packets, frequency-domain propagation through
//! the cavity response, and the controlled-phase-flip gate fidelity.
//!
//! Fourier convention: `F(Δ) = ∫ f(t) e^{-iΔt} dt`, so a response
//! `exp(-iΔτ)` delays a waveform by `τ`. Discrete bins map to angular
//! detunings `Δ_j = 2πj/(N·dt)` with the upper half folded to negative values.

use std::cell::RefCell;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::design::duration_threshold;
use crate::error::{Error, Result};
use crate::params::{rates_from_geometry, CavityGeometry, RateParams};
use crate::response::{error_budget, eval_response, ErrorBudget};

/// Samples per pulse duration for frequency-domain propagation.
pub const SAMPLES_PER_WIDTH: f64 = 32.0;
/// Smallest grid handed out by the automatic grid policies.
pub const MIN_SAMPLES: usize = 1 << 12;
/// Largest grid the automatic policies will allocate.
pub const MAX_SAMPLES: usize = 1 << 24;
/// Pulse peak sits this many durations after the grid start.
pub const LEAD_WIDTHS: f64 = 6.0;
/// Ring-down headroom in units of the slowest amplitude decay time.
pub const RINGDOWN_DECAY_TIMES: f64 = 25.0;
/// Ring-down headroom is never shorter than this many cavity lifetimes `1/κ`.
pub const MIN_RECORD_KAPPA: f64 = 50.0;
/// Edge energy fraction above which a propagated waveform is rejected.
pub const ALIASING_THRESHOLD: f64 = 1e-8;
const EDGE_SAMPLES: usize = 3;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Uniform time grid `t_k = t0 + k·dt`, `k < n`, with `n` a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl PulseGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidWaveform(format!("bad grid t0 = {t0}, dt = {dt}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidWaveform(format!(
                "sample count {n} is not a power of two >= 8"
            )));
        }
        Ok(Self { t0, dt, n })
    }

    /// Grid for frequency-domain work: `dt = w_t/32`.
    ///
    /// The output of a linear filter is band-limited by the input spectrum,
    /// so the cavity ring-down does not need to be resolved in time here.
    pub fn spectral(w_t: f64, rates: &RateParams, max_delay: f64) -> Result<Self> {
        Self::covering(w_t, w_t / SAMPLES_PER_WIDTH, rates, max_delay)
    }

    /// Grid that also resolves the cavity dynamics: `dt = min(w_t/32, 0.02/κ)`.
    pub fn time_resolved(w_t: f64, rates: &RateParams, max_delay: f64) -> Result<Self> {
        let dt = (w_t / SAMPLES_PER_WIDTH).min(0.02 / rates.kappa);
        Self::covering(w_t, dt, rates, max_delay)
    }

    fn covering(w_t: f64, dt: f64, rates: &RateParams, max_delay: f64) -> Result<Self> {
        if !(w_t.is_finite() && w_t > 0.0) {
            return Err(Error::InvalidArgument(format!("w_t = {w_t} must be positive")));
        }
        let delay = if max_delay.is_finite() { max_delay.max(0.0) } else { 0.0 };
        let tail = (RINGDOWN_DECAY_TIMES / rates.slowest_decay_rate()).max(MIN_RECORD_KAPPA / rates.kappa);
        let span = 2.0 * LEAD_WIDTHS * w_t + delay + tail;
        let needed = (span / dt).ceil() as usize + 1;
        let n = needed.max(MIN_SAMPLES).next_power_of_two();
        if n > MAX_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "grid of {n} samples exceeds the {MAX_SAMPLES} limit (w_t = {w_t}, dt = {dt:e})"
            )));
        }
        Self::new(-LEAD_WIDTHS * w_t, dt, n)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    /// Angular detuning of each DFT bin.
    pub fn detunings(&self) -> Vec<f64> {
        let n = self.n;
        let scale = 2.0 * std::f64::consts::PI / (n as f64 * self.dt);
        (0..n)
            .map(|j| {
                let signed = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                signed * scale
            })
            .collect()
    }
}

/// Complex pulse envelope on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Complex64>,
}

impl Waveform {
    pub fn new(t0: f64, dt: f64, samples: Vec<Complex64>) -> Result<Self> {
        PulseGrid::new(t0, dt, samples.len())?;
        Ok(Self { t0, dt, samples })
    }

    pub fn zeros(grid: &PulseGrid) -> Self {
        Self {
            t0: grid.t0,
            dt: grid.dt,
            samples: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    pub fn grid(&self) -> PulseGrid {
        PulseGrid {
            t0: self.t0,
            dt: self.dt,
            n: self.samples.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// `Σ|f|²·dt`.
    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.dt
    }

    /// `∫ conj(self)·other dt` on a shared grid.
    pub fn inner(&self, other: &Waveform) -> Complex64 {
        debug_assert_eq!(self.len(), other.len());
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.dt
    }

    pub fn l2_distance(&self, other: &Waveform) -> f64 {
        let sum: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (sum * self.dt).sqrt()
    }

    /// L2 distance relative to the norm of `reference`.
    pub fn relative_l2_distance(&self, reference: &Waveform) -> f64 {
        self.l2_distance(reference) / reference.norm_sq().sqrt()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &Waveform, b: Complex64) -> Waveform {
        Waveform {
            t0: self.t0,
            dt: self.dt,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Time of maximum `|f|`, refined by a parabola through `ln|f|²`
    /// (exact for Gaussian peaks).
    pub fn peak_time(&self) -> f64 {
        let (k, _) = self
            .samples
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, s)| {
                if s.norm_sqr() > best.1 {
                    (k, s.norm_sqr())
                } else {
                    best
                }
            });
        if k == 0 || k + 1 >= self.len() {
            return self.time(k);
        }
        let ln = |i: usize| self.samples[i].norm_sqr().ln();
        let (ym, y0, yp) = (ln(k - 1), ln(k), ln(k + 1));
        let curvature = ym - 2.0 * y0 + yp;
        let offset = if curvature < 0.0 {
            0.5 * (ym - yp) / curvature
        } else {
            0.0
        };
        self.time(k) + offset * self.dt
    }

    /// Energy-weighted mean time.
    pub fn centroid(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, s) in self.samples.iter().enumerate() {
            let p = s.norm_sqr();
            num += p * self.time(k);
            den += p;
        }
        num / den
    }

    /// Unnormalized DFT of the samples (the frequency-domain twin).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        plans(buf.len()).0.process(&mut buf);
        buf
    }

    /// Inverse of [`Waveform::spectrum`].
    pub fn from_spectrum(grid: &PulseGrid, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.n {
            return Err(Error::InvalidWaveform(format!(
                "spectrum has {} bins, grid has {}",
                spectrum.len(),
                grid.n
            )));
        }
        plans(grid.n).1.process(&mut spectrum);
        let scale = 1.0 / grid.n as f64;
        spectrum.iter_mut().for_each(|s| *s *= scale);
        Waveform::new(grid.t0, grid.dt, spectrum)
    }

    /// Fraction of the energy in the outermost samples on either side.
    pub fn edge_fraction(&self) -> f64 {
        let total: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let m = EDGE_SAMPLES.min(self.len() / 2);
        let head: f64 = self.samples[..m].iter().map(|s| s.norm_sqr()).sum();
        let tail: f64 = self.samples[self.len() - m..].iter().map(|s| s.norm_sqr()).sum();
        head.max(tail) / total
    }

    /// CSV with header `t,re,im`, 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,re,im")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{:.14e},{:.14e},{:.14e}", self.time(k), s.re, s.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "re", "im"] {
            return Err(Error::InvalidWaveform(format!(
                "expected header t,re,im, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record?;
            let field = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| {
                    Error::InvalidWaveform(format!("bad number {:?}: {e}", &record[i]))
                })
            };
            times.push(field(0)?);
            samples.push(Complex64::new(field(1)?, field(2)?));
        }
        if times.len() < 2 {
            return Err(Error::InvalidWaveform("need at least two samples".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (k, t) in times.iter().enumerate() {
            let expected = times[0] + k as f64 * dt;
            if (t - expected).abs() > 1e-9 * dt.abs().max(t.abs()) {
                return Err(Error::InvalidWaveform(format!(
                    "non-uniform grid at row {k}: t = {t}, expected {expected}"
                )));
            }
        }
        Waveform::new(times[0], dt, samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Unit-norm Gaussian `(√π·w_t)^{-1/2}·exp(-(t-center)²/(2w_t²))` sampled on `grid`.
pub fn gaussian_pulse(w_t: f64, center: f64, grid: &PulseGrid) -> Result<Waveform> {
    if !(w_t.is_finite() && w_t > 0.0) {
        return Err(Error::InvalidArgument(format!("w_t = {w_t} must be positive")));
    }
    let amp = (std::f64::consts::PI.sqrt() * w_t).powf(-0.5);
    let samples: Vec<Complex64> = (0..grid.n)
        .map(|k| {
            let x = (grid.time(k) - center) / w_t;
            Complex64::new(amp * (-0.5 * x * x).exp(), 0.0)
        })
        .collect();
    let mut wf = Waveform::new(grid.t0, grid.dt, samples)?;
    let norm = wf.norm_sq();
    let deficit = 1.0 - norm;
    if deficit.abs() > 1e-10 {
        return Err(Error::GridTooSmall { deficit });
    }
    let scale = norm.sqrt().recip();
    wf.samples.iter_mut().for_each(|s| *s *= scale);
    Ok(wf)
}

fn filter_spectrum<F>(grid: &PulseGrid, spectrum: &[Complex64], response: F) -> Result<Waveform>
where
    F: Fn(f64) -> Complex64,
{
    let filtered: Vec<Complex64> = grid
        .detunings()
        .into_iter()
        .zip(spectrum)
        .map(|(delta, s)| s * response(delta))
        .collect();
    let out = Waveform::from_spectrum(grid, filtered)?;
    let fraction = out.edge_fraction();
    if fraction > ALIASING_THRESHOLD {
        return Err(Error::AliasingDetected { fraction });
    }
    Ok(out)
}

/// `F⁻¹{F[f](Δ)·response(Δ)}` on the input grid.
pub fn propagate<F>(input: &Waveform, response: F) -> Result<Waveform>
where
    F: Fn(f64) -> Complex64,
{
    filter_spectrum(&input.grid(), &input.spectrum(), response)
}

fn delay_response(tau: f64) -> impl Fn(f64) -> Complex64 {
    move |delta| Complex64::from_polar(1.0, -delta * tau)
}

fn check_mirror_delay(tau_ref: f64) -> Result<()> {
    if !(tau_ref.is_finite() && tau_ref >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference delay {tau_ref} must be finite and non-negative"
        )));
    }
    Ok(())
}

/// Lossless external-mirror path: a sub-sample accurate delay by `tau_ref`.
pub fn reflect_mirror(input: &Waveform, tau_ref: f64) -> Result<Waveform> {
    check_mirror_delay(tau_ref)?;
    if tau_ref == 0.0 {
        return Ok(input.clone());
    }
    propagate(input, delay_response(tau_ref))
}

/// Qubit amplitudes of the product input state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateAmplitudes {
    pub a0: Complex64,
    pub a1: Complex64,
    pub ah: Complex64,
    pub av: Complex64,
}

impl GateAmplitudes {
    pub fn new(a0: Complex64, a1: Complex64, ah: Complex64, av: Complex64) -> Result<Self> {
        let atom = a0.norm_sqr() + a1.norm_sqr();
        let photon = ah.norm_sqr() + av.norm_sqr();
        if (atom - 1.0).abs() > 1e-12 || (photon - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAmplitudes(format!(
                "|a0|²+|a1|² = {atom}, |aH|²+|aV|² = {photon}; both must be 1"
            )));
        }
        Ok(Self { a0, a1, ah, av })
    }

    /// Multiplies every amplitude by the same phase.
    pub fn with_global_phase(&self, phi: f64) -> Self {
        let p = Complex64::from_polar(1.0, phi);
        Self {
            a0: self.a0 * p,
            a1: self.a1 * p,
            ah: self.ah * p,
            av: self.av * p,
        }
    }
}

impl Default for GateAmplitudes {
    fn default() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            a0: h,
            a1: h,
            ah: h,
            av: h,
        }
    }
}

/// Choice of the external-mirror delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRefPolicy {
    /// `(τ0 + τ1)/2`.
    Midpoint,
    Explicit(f64),
}

impl TauRefPolicy {
    pub fn resolve(&self, budget: &ErrorBudget) -> f64 {
        match *self {
            TauRefPolicy::Midpoint => budget.tau_ref_midpoint(),
            TauRefPolicy::Explicit(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateResult {
    pub fidelity: f64,
    /// `⟨f_ref|f_0^out⟩`.
    pub overlap_0: Complex64,
    /// `⟨f_ref|f_1^out⟩`.
    pub overlap_1: Complex64,
    /// `⟨f_ref|f_ref⟩`, the mirror-path overlap.
    pub overlap_v: Complex64,
    pub tau_ref: f64,
    pub budget: ErrorBudget,
    /// Whether `w_t` exceeds five times `max(1/κ, κ/g²)`.
    pub first_order_valid: bool,
}

impl GateResult {
    pub fn recompute(&self, amps: &GateAmplitudes) -> f64 {
        fidelity_from_overlaps(amps, self.overlap_0, self.overlap_1, self.overlap_v)
    }
}

/// `|⟨Ψ_id|Ψ_out⟩|²` from the branch overlaps with the reference waveform.
///
/// The ideal state flips the sign of the `|0H⟩` branch and carries the
/// reference-delayed input on every branch; the mirror reflects with `+1`.
/// No renormalization is applied, so photon loss lowers the fidelity.
pub fn fidelity_from_overlaps(
    amps: &GateAmplitudes,
    overlap_0: Complex64,
    overlap_1: Complex64,
    overlap_v: Complex64,
) -> f64 {
    let w = |a: Complex64, b: Complex64| (a * b).norm_sqr();
    let amplitude = -w(amps.a0, amps.ah) * overlap_0
        + w(amps.a0, amps.av) * overlap_v
        + w(amps.a1, amps.ah) * overlap_1
        + w(amps.a1, amps.av) * overlap_v;
    amplitude.norm_sqr()
}

/// Reference and branch outputs of one gate run.
#[derive(Debug, Clone)]
pub struct GateWaveforms {
    pub input: Waveform,
    pub reference: Waveform,
    pub out_0: Waveform,
    pub out_1: Waveform,
}

/// Propagates the Gaussian input through both cavity branches and the mirror.
pub fn gate_waveforms(
    rates: &RateParams,
    w_t: f64,
    tau_ref: f64,
    grid: &PulseGrid,
) -> Result<GateWaveforms> {
    check_mirror_delay(tau_ref)?;
    let input = gaussian_pulse(w_t, 0.0, grid)?;
    let spectrum = input.spectrum();
    let reference = filter_spectrum(grid, &spectrum, delay_response(tau_ref))?;
    let out_0 = filter_spectrum(grid, &spectrum, |d| eval_response(rates, d).l0)?;
    let out_1 = filter_spectrum(grid, &spectrum, |d| eval_response(rates, d).l1)?;
    Ok(GateWaveforms {
        input,
        reference,
        out_0,
        out_1,
    })
}

fn result_from_waveforms(
    amps: &GateAmplitudes,
    reference: &Waveform,
    out_0: &Waveform,
    out_1: &Waveform,
    tau_ref: f64,
    budget: ErrorBudget,
    first_order_valid: bool,
) -> GateResult {
    let overlap_0 = reference.inner(out_0);
    let overlap_1 = reference.inner(out_1);
    let overlap_v = Complex64::new(reference.norm_sq(), 0.0);
    GateResult {
        fidelity: fidelity_from_overlaps(amps, overlap_0, overlap_1, overlap_v),
        overlap_0,
        overlap_1,
        overlap_v,
        tau_ref,
        budget,
        first_order_valid,
    }
}

/// Gate fidelity assembled from externally produced branch waveforms
/// (e.g. the time-domain integrator).
pub fn gate_result_from_waveforms(
    geo: &CavityGeometry,
    amps: &GateAmplitudes,
    w_t: f64,
    tau_ref: f64,
    reference: &Waveform,
    out_0: &Waveform,
    out_1: &Waveform,
) -> Result<GateResult> {
    let rates = rates_from_geometry(geo)?;
    let budget = error_budget(geo)?;
    let valid = w_t >= 5.0 * duration_threshold(&rates).w_min;
    Ok(result_from_waveforms(
        amps, reference, out_0, out_1, tau_ref, budget, valid,
    ))
}

/// Gate fidelity on an explicit grid.
pub fn gate_fidelity_on_grid(
    geo: &CavityGeometry,
    amps: &GateAmplitudes,
    w_t: f64,
    policy: TauRefPolicy,
    grid: &PulseGrid,
) -> Result<GateResult> {
    let rates = rates_from_geometry(geo)?;
    let budget = error_budget(geo)?;
    let tau_ref = policy.resolve(&budget);
    let wf = gate_waveforms(&rates, w_t, tau_ref, grid)?;
    let valid = w_t >= 5.0 * duration_threshold(&rates).w_min;
    Ok(result_from_waveforms(
        amps,
        &wf.reference,
        &wf.out_0,
        &wf.out_1,
        tau_ref,
        budget,
        valid,
    ))
}

/// Delay headroom a gate run needs on its grid.
pub fn required_delay(budget: &ErrorBudget, tau_ref: f64) -> f64 {
    [budget.tau_0, budget.tau_1, tau_ref]
        .into_iter()
        .filter(|t| t.is_finite())
        .fold(0.0, f64::max)
}

/// Gate fidelity of a Gaussian photon of duration `w_t` on the automatic
/// frequency-domain grid.
pub fn gate_fidelity(
    geo: &CavityGeometry,
    amps: &GateAmplitudes,
    w_t: f64,
    policy: TauRefPolicy,
) -> Result<GateResult> {
    let rates = rates_from_geometry(geo)?;
    let budget = error_budget(geo)?;
    let tau_ref = policy.resolve(&budget);
    let grid = PulseGrid::spectral(w_t, &rates, required_delay(&budget, tau_ref))?;
    gate_fidelity_on_grid(geo, amps, w_t, policy, &grid)
}

/// Fidelity objective for the design optimizers.
pub fn fidelity_objective(
    amps: GateAmplitudes,
    policy: TauRefPolicy,
) -> impl Fn(&CavityGeometry, f64) -> Result<f64> + Sync + Send {
    move |geo, w_t| gate_fidelity(geo, &amps, w_t, policy).map(|r| r.fidelity)
}
