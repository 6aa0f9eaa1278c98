use serde::{Deserialize, Serialize};

use super::{Terminal, Trajectory};
use crate::error::{Error, Result};
use crate::stats::fit_line;

/// Smallest `X^-2` used for extrapolation; below this the time samples carry
/// too few significant digits of `T+ - t`.
const INVERSE_SQUARE_FLOOR: f64 = 1e-12;

const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t_plus: f64,
    /// Coefficient (0 = A, 1 = B, 2 = C) used for extrapolation.
    pub coefficient: usize,
    /// Residual standard deviation of the final linear fit of `X^-2` against `t`.
    pub sigma: f64,
    pub points: usize,
}

/// Extrapolate the blow-up time from the last decade of `X^-2`, where `X` is
/// the fastest-growing coefficient: `X^-2` is asymptotically linear in
/// `T+ - t` for every blow-up regime. One refit drops points whose residual
/// exceeds three standard deviations.
pub fn estimate_blowup_time(traj: &Trajectory) -> Result<BlowupEstimate> {
    if traj.terminal != Terminal::BlowupCeiling {
        return Err(Error::InsufficientData(format!("trajectory ended with {:?}, not a blow-up", traj.terminal)));
    }
    let last = traj.last().coeffs();
    let coefficient = (0..3).fold(0, |best, i| if last[i] > last[best] { i } else { best });

    let inv_sq = |i: usize| traj.samples[i].state.coeffs()[coefficient].powi(-2);
    let n = traj.samples.len();
    let anchor = inv_sq(n - 1).max(INVERSE_SQUARE_FLOOR);
    let t_ref = traj.samples[n - 1].state.t;

    let mut pts = Vec::new();
    for i in (0..n).rev() {
        let y = inv_sq(i);
        if y > 10.0 * anchor {
            break;
        }
        if y >= anchor {
            pts.push((traj.samples[i].state.t - t_ref, y));
        }
    }
    if pts.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} samples in the final decade of X^-2, need {MIN_POINTS}",
            pts.len()
        )));
    }

    let degenerate = || Error::InsufficientData("final decade has no spread in t".into());
    let mut fit = fit_line(&pts).ok_or_else(degenerate)?;
    if fit.sigma > 0.0 {
        let kept: Vec<_> = pts.iter().copied().filter(|&(x, y)| fit.residual(x, y).abs() <= 3.0 * fit.sigma).collect();
        if kept.len() >= MIN_POINTS && kept.len() < pts.len() {
            pts = kept;
            fit = fit_line(&pts).ok_or_else(degenerate)?;
        }
    }
    if !(fit.slope < 0.0) {
        return Err(Error::InsufficientData("X^-2 is not decreasing toward the ceiling".into()));
    }
    Ok(BlowupEstimate { t_plus: t_ref - fit.intercept / fit.slope, coefficient, sigma: fit.sigma, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowSpec;
    use crate::geometry::{BianchiClass, MetricState};

    fn synthetic(t_plus: f64, t_lo: f64, t_hi: f64, n: usize) -> Trajectory {
        let states: Vec<_> = (0..n)
            .map(|i| {
                let t = t_lo + (t_hi - t_lo) * i as f64 / (n - 1) as f64;
                let a = (t_plus - t).powf(-0.5);
                MetricState::new(t, a, 2.0 / a.sqrt(), 2.0 / a.sqrt())
            })
            .collect();
        Trajectory::from_states(FlowSpec::positive(BianchiClass::Su2), &states, Terminal::BlowupCeiling)
    }

    #[test]
    fn exact_inverse_square_law() {
        let traj = synthetic(0.5, 0.4, 0.499, 200);
        let est = estimate_blowup_time(&traj).unwrap();
        assert!((est.t_plus - 0.5).abs() < 1e-9, "{}", est.t_plus);
        assert_eq!(est.coefficient, 0);
    }

    #[test]
    fn needs_a_blowup_terminal() {
        let mut traj = synthetic(0.5, 0.4, 0.499, 200);
        traj.terminal = Terminal::ReachedTmax;
        assert!(matches!(estimate_blowup_time(&traj), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn too_few_points_in_last_decade() {
        let traj = synthetic(0.5, 0.4, 0.499, 12);
        assert!(matches!(estimate_blowup_time(&traj), Err(Error::InsufficientData(_))));
    }
}
