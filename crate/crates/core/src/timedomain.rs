//! Time-domain integration of the cavity equations of motion in the frame
//! rotating at the cavity frequency.
//!
//! Branch `|0⟩`: `β̇ = -κβ + √(2κ_ex)·f_in`.
//! Branch `|1⟩`: `β̇ = gβ_e - κβ + √(2κ_ex)·f_in`, `β̇_e = -gβ - γβ_e`.
//! Reflected field: `f_out = f_in - √(2κ_ex)·β`.
//!
//! Integration uses the Dormand-Prince 5(4) pair with its continuous
//! extension; the sampled input is interpolated with local cubics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::params::{rates_from_geometry, CavityGeometry, RateParams};
use crate::pulse::{
    gate_result_from_waveforms, gate_waveforms, gaussian_pulse, required_delay, GateAmplitudes,
    GateResult, PulseGrid, TauRefPolicy, Waveform,
};
use crate::response::{error_budget, group_delay, ResponseSample};

pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-4;
/// Largest sample spacing accepted, in units of `1/κ`.
pub const MAX_DT_KAPPA: f64 = 0.1;
/// Step-size cap in units of the input sample spacing.
const MAX_STEP_SAMPLES: f64 = 8.0;
const MAX_STEPS: usize = 50_000_000;
/// Spectral power floor, relative to the probe peak, for response extraction.
pub const SPECTRAL_POWER_FLOOR: f64 = 1e-6;

/// Atomic state selecting the branch dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomState {
    /// Uncoupled level: empty-cavity dynamics.
    Zero,
    /// Level resonant with the cavity.
    One,
}

/// Cavity field and atomic excitation amplitudes at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityState {
    pub beta: Complex64,
    pub beta_e: Complex64,
    pub t: f64,
}

impl CavityState {
    pub fn empty(t: f64) -> Self {
        Self {
            beta: Complex64::new(0.0, 0.0),
            beta_e: Complex64::new(0.0, 0.0),
            t,
        }
    }

    pub fn energy(&self) -> f64 {
        self.beta.norm_sqr() + self.beta_e.norm_sqr()
    }
}

/// Output of a branch integration with its energy ledger.
#[derive(Debug, Clone)]
pub struct BranchRun {
    pub output: Waveform,
    pub final_state: CavityState,
    /// `∫|f_in|² dt` of the interpolated drive.
    pub input_energy: f64,
    /// `∫|f_out|² dt`.
    pub output_energy: f64,
    /// `2κ_in·∫|β|² dt`.
    pub internal_loss: f64,
    /// `2γ·∫|β_e|² dt`.
    pub atom_loss: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl BranchRun {
    /// Energy still held by the cavity and the atom at the end of the record.
    pub fn stored(&self) -> f64 {
        self.final_state.energy()
    }

    /// `input - (output + losses + stored)`.
    pub fn energy_residual(&self, initial_energy: f64) -> f64 {
        self.input_energy + initial_energy
            - (self.output_energy + self.internal_loss + self.atom_loss + self.stored())
    }
}

const DIM: usize = 8;
type State = [f64; DIM];

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise-cubic interpolation of the sampled drive; zero outside the record.
struct Drive<'a> {
    wf: &'a Waveform,
}

impl Drive<'_> {
    fn at(&self, t: f64) -> Complex64 {
        let n = self.wf.len();
        let x = (t - self.wf.t0) / self.wf.dt;
        if x < 0.0 || x > (n - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let k = (x.floor() as usize).min(n - 2);
        let base = k.saturating_sub(1).min(n - 4);
        let u = x - base as f64;
        let s = &self.wf.samples[base..base + 4];
        // Lagrange weights on nodes 0..3
        let w0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let w1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let w2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let w3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        s[0] * w0 + s[1] * w1 + s[2] * w2 + s[3] * w3
    }
}

struct System<'a> {
    g: f64,
    kappa: f64,
    kappa_in: f64,
    gamma: f64,
    couple: f64,
    drive: Drive<'a>,
}

impl System<'_> {
    fn rhs(&self, t: f64, y: &State) -> State {
        let beta = Complex64::new(y[0], y[1]);
        let beta_e = Complex64::new(y[2], y[3]);
        let f = self.drive.at(t);
        let d_beta = self.g * beta_e - self.kappa * beta + self.couple * f;
        let d_beta_e = -self.g * beta - self.gamma * beta_e;
        let out = f - self.couple * beta;
        [
            d_beta.re,
            d_beta.im,
            d_beta_e.re,
            d_beta_e.im,
            2.0 * self.kappa_in * beta.norm_sqr(),
            2.0 * self.gamma * beta_e.norm_sqr(),
            out.norm_sqr(),
            f.norm_sqr(),
        ]
    }
}

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..DIM {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn check_tol(tol: f64) -> Result<()> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"
        )));
    }
    Ok(())
}

fn check_grid(r: &RateParams, f_in: &Waveform) -> Result<()> {
    let limit = MAX_DT_KAPPA / r.kappa;
    if f_in.dt > limit {
        return Err(Error::GridTooCoarse {
            dt: f_in.dt,
            limit,
        });
    }
    Ok(())
}

/// Integrates one branch from `initial` over the record of `f_in`.
///
/// The initial state is taken at the first sample time; `initial.t` is ignored.
pub fn simulate_branch(
    r: &RateParams,
    atom: AtomState,
    f_in: &Waveform,
    initial: CavityState,
    tol: f64,
) -> Result<BranchRun> {
    r.validate()?;
    check_tol(tol)?;
    check_grid(r, f_in)?;
    let sys = System {
        g: match atom {
            AtomState::Zero => 0.0,
            AtomState::One => r.g,
        },
        kappa: r.kappa,
        kappa_in: r.kappa_in,
        gamma: r.gamma,
        couple: (2.0 * r.kappa_ex).sqrt(),
        drive: Drive { wf: f_in },
    };
    let beta_e0 = match atom {
        AtomState::Zero => Complex64::new(0.0, 0.0),
        AtomState::One => initial.beta_e,
    };

    let n = f_in.len();
    let t0 = f_in.t0;
    let t_end = f_in.time(n - 1);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = f_in.samples[0] - sys.couple * initial.beta;
    let mut next = 1;

    let mut t = t0;
    let mut y: State = [
        initial.beta.re,
        initial.beta.im,
        beta_e0.re,
        beta_e0.im,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    let h_max = MAX_STEP_SAMPLES * f_in.dt;
    let mut h = (0.1 / r.kappa).min(h_max);
    let mut k1 = sys.rhs(t, &y);
    let (mut steps, mut rejected) = (0usize, 0usize);

    while t < t_end {
        if steps + rejected > MAX_STEPS {
            return Err(Error::ToleranceNotMet { t, step: h });
        }
        let h_step = h.min(t_end - t);
        if h_step < 1e-14 * t.abs().max(1.0) {
            return Err(Error::ToleranceNotMet { t, step: h_step });
        }
        let k2 = sys.rhs(t + C2 * h_step, &axpy(&y, h_step, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * h_step, &axpy(&y, h_step, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(
            t + C4 * h_step,
            &axpy(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = sys.rhs(
            t + C5 * h_step,
            &axpy(&y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = sys.rhs(
            t + h_step,
            &axpy(
                &y,
                h_step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = axpy(
            &y,
            h_step,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = sys.rhs(t + h_step, &y1);

        let mut err: f64 = 0.0;
        for i in 0..DIM {
            let e = h_step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol * (1.0 + y[i].abs().max(y1[i].abs()));
            err = err.max(e.abs() / scale);
        }

        if err <= 1.0 {
            // dense output onto the sample times inside (t, t + h]
            let t_new = t + h_step;
            let mut r5 = [0.0; DIM];
            for i in 0..DIM {
                r5[i] = h_step
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            while next < n && (f_in.time(next) <= t_new || next == n - 1 && t_new >= t_end) {
                let theta = ((f_in.time(next) - t) / h_step).clamp(0.0, 1.0);
                let th1 = 1.0 - theta;
                let mut beta = [0.0; 2];
                for (i, b) in beta.iter_mut().enumerate() {
                    let ydiff = y1[i] - y[i];
                    let bspl = h_step * k1[i] - ydiff;
                    let r4 = ydiff - h_step * k7[i] - bspl;
                    *b = y[i] + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5[i])));
                }
                out[next] = f_in.samples[next] - sys.couple * Complex64::new(beta[0], beta[1]);
                next += 1;
            }
            t = t_new;
            y = y1;
            k1 = k7;
            steps += 1;
            let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            h = (h_step * fac).min(h_max);
        } else {
            rejected += 1;
            h = h_step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }

    Ok(BranchRun {
        output: Waveform::new(f_in.t0, f_in.dt, out)?,
        final_state: CavityState {
            beta: Complex64::new(y[0], y[1]),
            beta_e: Complex64::new(y[2], y[3]),
            t,
        },
        input_energy: y[7],
        output_energy: y[6],
        internal_loss: y[4],
        atom_loss: y[5],
        steps,
        rejected,
    })
}

/// Reflected waveform for a cavity starting empty.
pub fn integrate_branch(
    r: &RateParams,
    atom: AtomState,
    f_in: &Waveform,
    tol: f64,
) -> Result<Waveform> {
    simulate_branch(r, atom, f_in, CavityState::empty(f_in.t0), tol).map(|run| run.output)
}

/// `∫ f(t)·e^{-iΔt} dt` evaluated directly on the samples.
pub fn dtft(wf: &Waveform, delta: f64) -> Complex64 {
    wf.samples
        .iter()
        .enumerate()
        .map(|(k, s)| s * Complex64::from_polar(1.0, -delta * wf.time(k)))
        .sum::<Complex64>()
        * wf.dt
}

/// Reflection coefficient of one branch measured by spectral division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseEstimate {
    pub delta: f64,
    pub value: Complex64,
}

/// Time-resolved grid for a Gaussian probe of duration `w_t` through `r`.
pub fn probe_grid(r: &RateParams, w_t: f64) -> Result<PulseGrid> {
    let (tau0, tau1) = group_delay(r, 0.0);
    let delay = [tau0, tau1].into_iter().filter(|t| t.is_finite()).fold(0.0, f64::max);
    PulseGrid::time_resolved(w_t, r, delay)
}

fn check_power(input_spectra: &[(f64, Complex64)], peak_power: f64) -> Result<()> {
    for &(delta, s) in input_spectra {
        if s.norm_sqr() < SPECTRAL_POWER_FLOOR * peak_power {
            return Err(Error::InsufficientSpectralPower { delta });
        }
    }
    Ok(())
}

fn peak_power(wf: &Waveform) -> f64 {
    let scale = wf.dt * wf.dt;
    wf.spectrum()
        .iter()
        .map(|s| s.norm_sqr() * scale)
        .fold(0.0, f64::max)
}

/// Drives one branch with a Gaussian probe and divides output by input
/// spectra at each requested detuning.
///
/// Every detuning must carry at least [`SPECTRAL_POWER_FLOOR`] of the probe's
/// peak spectral power. The record always spans at least `50/κ` after the
/// pulse so the ring-down is captured.
pub fn extract_branch_response(
    r: &RateParams,
    atom: AtomState,
    w_t: f64,
    deltas: &[f64],
    tol: f64,
) -> Result<Vec<ResponseEstimate>> {
    let grid = probe_grid(r, w_t)?;
    let probe = gaussian_pulse(w_t, 0.0, &grid)?;
    let inputs: Vec<(f64, Complex64)> =
        par::map(Execution::Parallel, deltas, |&d| (d, dtft(&probe, d)));
    check_power(&inputs, peak_power(&probe))?;
    let output = integrate_branch(r, atom, &probe, tol)?;
    Ok(par::map(Execution::Parallel, &inputs, |&(delta, s_in)| ResponseEstimate {
        delta,
        value: dtft(&output, delta) / s_in,
    }))
}

/// Both branches measured with the same probe.
pub fn extract_response(
    r: &RateParams,
    w_t: f64,
    deltas: &[f64],
    tol: f64,
) -> Result<Vec<ResponseSample>> {
    let l0 = extract_branch_response(r, AtomState::Zero, w_t, deltas, tol)?;
    let l1 = extract_branch_response(r, AtomState::One, w_t, deltas, tol)?;
    Ok(l0
        .iter()
        .zip(&l1)
        .map(|(a, b)| ResponseSample {
            delta: a.delta,
            l0: a.value,
            l1: b.value,
        })
        .collect())
}

/// Gate fidelity from both solvers on one time-resolved grid.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub frequency_domain: GateResult,
    pub time_domain: GateResult,
    /// Relative L2 distance between the two `|0⟩`-branch outputs.
    pub distance_0: f64,
    /// Relative L2 distance between the two `|1⟩`-branch outputs.
    pub distance_1: f64,
}

impl OracleReport {
    pub fn max_distance(&self) -> f64 {
        self.distance_0.max(self.distance_1)
    }
}

/// Runs the gate through the spectral pipeline and the integrator.
pub fn cross_validate(
    geo: &CavityGeometry,
    amps: &GateAmplitudes,
    w_t: f64,
    policy: TauRefPolicy,
    tol: f64,
) -> Result<OracleReport> {
    let r = rates_from_geometry(geo)?;
    let budget = error_budget(geo)?;
    let tau_ref = policy.resolve(&budget);
    let grid = PulseGrid::time_resolved(w_t, &r, required_delay(&budget, tau_ref))?;
    let spectral = gate_waveforms(&r, w_t, tau_ref, &grid)?;
    let branches = par::map(
        Execution::Parallel,
        &[AtomState::Zero, AtomState::One],
        |&atom| integrate_branch(&r, atom, &spectral.input, tol),
    );
    let mut it = branches.into_iter();
    let out_0 = it.next().expect("two branches")?;
    let out_1 = it.next().expect("two branches")?;
    let reference = &spectral.reference;
    Ok(OracleReport {
        frequency_domain: gate_result_from_waveforms(
            geo,
            amps,
            w_t,
            tau_ref,
            reference,
            &spectral.out_0,
            &spectral.out_1,
        )?,
        time_domain: gate_result_from_waveforms(geo, amps, w_t, tau_ref, reference, &out_0, &out_1)?,
        distance_0: out_0.relative_l2_distance(&spectral.out_0),
        distance_1: out_1.relative_l2_distance(&spectral.out_1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{lcav_opt, tex_loss};
    use crate::response::eval_response;

    fn design_rates() -> RateParams {
        let geo = CavityGeometry::new(tex_loss(1.0, 0.001), lcav_opt(1.0, 0.001), 1.0, 0.001)
            .unwrap();
        rates_from_geometry(&geo).unwrap()
    }

    #[test]
    fn ring_down_emits_external_share() {
        let r = design_rates();
        let dt = 0.01 / r.kappa;
        let n = 1 << 12;
        let silent = Waveform::new(0.0, dt, vec![Complex64::new(0.0, 0.0); n]).unwrap();
        let init = CavityState {
            beta: Complex64::new(1.0, 0.0),
            beta_e: Complex64::new(0.0, 0.0),
            t: 0.0,
        };
        let tol = 1e-10;
        let run = simulate_branch(&r, AtomState::Zero, &silent, init, tol).unwrap();
        assert!((run.output_energy - r.kappa_ex / r.kappa).abs() < 10.0 * tol);
        for k in [0, 10, 100, 1000] {
            let t = silent.time(k);
            let expected = -(2.0 * r.kappa_ex).sqrt() * (-r.kappa * t).exp();
            assert!((run.output.samples[k].re - expected).abs() < 1e-8 * (2.0 * r.kappa_ex).sqrt());
        }
        assert!(run.energy_residual(1.0).abs() < 10.0 * tol);
    }

    #[test]
    fn long_pulse_reproduces_resonant_reflection() {
        let r = design_rates();
        let w = 30.0;
        let grid = probe_grid(&r, w).unwrap();
        let f = gaussian_pulse(w, 0.0, &grid).unwrap();
        let centre = (-grid.t0 / grid.dt).round() as usize;
        let s = eval_response(&r, 0.0);
        for (atom, expected) in [(AtomState::Zero, s.l0.re), (AtomState::One, s.l1.re)] {
            let out = integrate_branch(&r, atom, &f, 1e-9).unwrap();
            let ratio = out.samples[centre] / f.samples[centre];
            assert!((ratio.re - expected).abs() < 1e-3, "{atom:?} {ratio}");
            assert!(ratio.im.abs() < 1e-3);
        }
        assert!((s.l0.re + 0.95627).abs() < 1e-5);
    }

    #[test]
    fn coarse_grid_and_bad_tolerance_are_rejected() {
        let r = design_rates();
        let coarse = Waveform::new(0.0, 1.0 / r.kappa, vec![Complex64::new(0.0, 0.0); 64]).unwrap();
        assert!(matches!(
            integrate_branch(&r, AtomState::One, &coarse, 1e-8),
            Err(Error::GridTooCoarse { .. })
        ));
        let fine = Waveform::new(0.0, 0.01 / r.kappa, vec![Complex64::new(0.0, 0.0); 64]).unwrap();
        assert!(integrate_branch(&r, AtomState::One, &fine, 1e-3).is_err());
        assert!(integrate_branch(&r, AtomState::One, &fine, 1e-13).is_err());
    }

    #[test]
    fn drive_interpolation_is_exact_on_cubics() {
        let samples: Vec<Complex64> = (0..16)
            .map(|k| {
                let t = k as f64 * 0.5;
                Complex64::new(t * t * t - 2.0 * t, 1.0 - t * t)
            })
            .collect();
        let wf = Waveform::new(0.0, 0.5, samples).unwrap();
        let d = Drive { wf: &wf };
        for &t in &[0.1, 1.3, 3.77, 7.4] {
            let v = d.at(t);
            assert!((v.re - (t * t * t - 2.0 * t)).abs() < 1e-12);
            assert!((v.im - (1.0 - t * t)).abs() < 1e-12);
        }
        assert_eq!(d.at(-0.1), Complex64::new(0.0, 0.0));
        assert_eq!(d.at(7.6), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn weak_probe_bin_is_rejected() {
        let r = design_rates();
        assert!(matches!(
            extract_branch_response(&r, AtomState::Zero, 1.0, &[0.0, 20.0], 1e-8),
            Err(Error::InsufficientSpectralPower { delta }) if delta == 20.0
        ));
    }

    #[test]
    fn oracle_agrees_with_spectral_pipeline() {
        let geo = CavityGeometry::new(tex_loss(1.0, 0.001), lcav_opt(1.0, 0.001), 1.0, 0.001)
            .unwrap();
        let rep = cross_validate(&geo, &GateAmplitudes::default(), 1.0, TauRefPolicy::Midpoint, 1e-9)
            .unwrap();
        assert!(rep.max_distance() < 1e-6, "{}", rep.max_distance());
        assert!((rep.time_domain.fidelity - rep.frequency_domain.fidelity).abs() < 1e-6);
    }
}
