//! Bounded scalar maximization on a logarithmic axis.

use crate::error::{Error, Result};
use crate::par::{self, Execution};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Points in the fallback grid scan.
pub const FALLBACK_GRID: usize = 64;

/// Result of a bracketed maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// True when golden-section alone could not confirm an interior maximum.
    pub used_fallback: bool,
    pub evaluations: usize,
}

fn finite(x: f64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BracketFailure(format!("objective is {v} at x = {x:e}")))
    }
}

/// Golden-section on `ln x` between `lo` and `hi`; stops once the bracket is
/// narrower than `rel_tol` in relative terms.
fn golden_log<F>(f: &F, lo: f64, hi: f64, rel_tol: f64, evals: &mut usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut a = lo.ln();
    let mut b = hi.ln();
    let eval = |u: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let x = u.exp();
        finite(x, f(x)?)
    };
    let mut u1 = b - INV_PHI * (b - a);
    let mut u2 = a + INV_PHI * (b - a);
    let mut f1 = eval(u1, evals)?;
    let mut f2 = eval(u2, evals)?;
    while b - a > rel_tol {
        if f1 >= f2 {
            b = u2;
            u2 = u1;
            f2 = f1;
            u1 = b - INV_PHI * (b - a);
            f1 = eval(u1, evals)?;
        } else {
            a = u1;
            u1 = u2;
            f1 = f2;
            u2 = a + INV_PHI * (b - a);
            f2 = eval(u2, evals)?;
        }
    }
    Ok(if f1 >= f2 { (u1.exp(), f1) } else { (u2.exp(), f2) })
}

/// Maximizes `f` over `[lo, hi]` by golden-section search in `ln x`.
///
/// The returned value is never below either bracket end. When the interior
/// optimum does not beat the ends, a [`FALLBACK_GRID`]-point scan followed by
/// a local golden-section refinement is used instead. `tie_tol` resolves
/// near-equal candidates in favour of the smaller `x`.
pub fn maximize_log<F>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    tie_tol: f64,
    exec: Execution,
) -> Result<Maximum>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::BracketFailure(format!("invalid bracket [{lo:e}, {hi:e}]")));
    }
    let mut evals = 0;
    let f_lo = finite(lo, f(lo)?)?;
    let f_hi = finite(hi, f(hi)?)?;
    evals += 2;

    let (x, v) = golden_log(&f, lo, hi, rel_tol, &mut evals)?;
    if v >= f_lo && v >= f_hi {
        return Ok(Maximum {
            x,
            value: v,
            used_fallback: false,
            evaluations: evals,
        });
    }

    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (FALLBACK_GRID - 1) as f64;
    let grid: Vec<f64> = (0..FALLBACK_GRID)
        .map(|i| match i {
            0 => lo,
            i if i == FALLBACK_GRID - 1 => hi,
            i => (llo + step * i as f64).exp(),
        })
        .collect();
    let values: Vec<Result<f64>> = par::map(exec, &grid, |&x| f(x).and_then(|v| finite(x, v)));
    evals += FALLBACK_GRID;
    let mut best = 0;
    let mut scanned = Vec::with_capacity(FALLBACK_GRID);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        scanned.push(v);
        if v > scanned[best] + tie_tol {
            best = i;
        }
    }

    let mut candidate = (grid[best], scanned[best]);
    if best > 0 && best < FALLBACK_GRID - 1 {
        let (x, v) = golden_log(&f, grid[best - 1], grid[best + 1], rel_tol, &mut evals)?;
        if v > candidate.1 + tie_tol || (v >= candidate.1 - tie_tol && x < candidate.0) {
            candidate = (x, v);
        }
    }
    Ok(Maximum {
        x: candidate.0,
        value: candidate.1,
        used_fallback: true,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_peak() {
        let f = |x: f64| Ok(-(x.ln() - 2.0f64.ln()).powi(2));
        let m = maximize_log(f, 0.01, 100.0, 1e-8, 0.0, Execution::Sequential).unwrap();
        assert!((m.x - 2.0).abs() < 1e-7);
        assert!(!m.used_fallback);
    }

    #[test]
    fn edge_maximum_uses_fallback_and_beats_ends() {
        let f = |x: f64| Ok(-x);
        let m = maximize_log(f, 0.1, 10.0, 1e-6, 0.0, Execution::Sequential).unwrap();
        assert!(m.used_fallback);
        assert_eq!(m.x, 0.1);
        assert!(m.value >= -0.1);
    }

    #[test]
    fn local_bump_loses_to_bracket_end() {
        let f = |x: f64| {
            let u = x.ln();
            Ok(0.3 * (-(u - 0.05f64.ln()).powi(2)).exp() + x / 100.0)
        };
        let m = maximize_log(f, 0.01, 100.0, 1e-6, 0.0, Execution::Parallel).unwrap();
        assert!(m.used_fallback);
        assert_eq!(m.x, 100.0);
    }

    #[test]
    fn nan_objective_is_a_bracket_failure() {
        let f = |x: f64| Ok(if x > 1.0 { f64::NAN } else { x });
        assert!(matches!(
            maximize_log(f, 0.1, 10.0, 1e-6, 0.0, Execution::Sequential),
            Err(Error::BracketFailure(_))
        ));
        assert!(maximize_log(Ok, 1.0, 0.5, 1e-6, 0.0, Execution::Sequential).is_err());
    }
}
