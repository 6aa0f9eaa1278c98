use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::stats::{fit_line, median};

/// Trackable range of `T+ - t`: below the floor the sample times no longer
/// resolve the distance to the blow-up, above the ceiling the motion is not
/// yet asymptotic.
pub const TAU_FLOOR: f64 = 1e-12;
pub const TAU_CEILING: f64 = 1e-2;

/// Decades of `T+ - t` covered by a fit, and the guard dropped next to `T+`.
pub const FIT_DECADES: f64 = 2.0;
pub const FIT_GUARD_DECADES: f64 = 0.5;

const MIN_FIT_POINTS: usize = 8;
const COLLAPSE_EXPONENT: f64 = 0.25;
const BLOWUP_EXPONENT: f64 = -0.5;
const EXPONENT_SLACK: f64 = 0.05;

/// Interval of `T+ - t`, with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn decades(&self) -> f64 {
        (self.hi / self.lo).log10()
    }

    pub fn contains(&self, tau: f64) -> bool {
        tau >= self.lo && tau <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub t_plus: f64,
    /// Fits for A, B, C.
    pub coeffs: [CoefficientFit; 3],
    pub window: Window,
    pub points: usize,
}

impl ExponentFit {
    pub fn exponents(&self) -> [f64; 3] {
        self.coeffs.map(|c| c.exponent)
    }

    pub fn prefactors(&self) -> [f64; 3] {
        self.coeffs.map(|c| c.prefactor)
    }

    /// Index of the coefficient whose exponent is closest to `-1/2`.
    pub fn blowup_index(&self) -> usize {
        let d = |i: usize| (self.coeffs[i].exponent - BLOWUP_EXPONENT).abs();
        (0..3).fold(0, |best, i| if d(i) < d(best) { i } else { best })
    }
}

/// `(T+ - t, [A, B, C])` for every sample inside the trackable range.
fn trackable(traj: &Trajectory, t_plus: f64) -> Vec<(f64, [f64; 3])> {
    traj.states()
        .map(|s| (t_plus - s.t, s.coeffs()))
        .filter(|&(tau, _)| (TAU_FLOOR..=TAU_CEILING).contains(&tau))
        .collect()
}

/// Final two decades of the trackable range with the last half-decade dropped.
fn fit_window(points: &[(f64, [f64; 3])]) -> Result<Window> {
    let (tau_min, tau_max) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let lo = tau_min * 10f64.powf(FIT_GUARD_DECADES);
    let hi = lo * 10f64.powf(FIT_DECADES);
    if points.is_empty() || hi > tau_max * (1.0 + 1e-12) {
        return Err(Error::InsufficientData(format!(
            "need {} decades of T+ - t inside [{TAU_FLOOR:e}, {TAU_CEILING:e}], have [{tau_min:e}, {tau_max:e}]",
            FIT_DECADES + FIT_GUARD_DECADES
        )));
    }
    Ok(Window { lo, hi })
}

/// Fit `ln X = ln prefactor + exponent ln(T+ - t)` for each coefficient.
pub fn fit_exponents(traj: &Trajectory, t_plus: f64) -> Result<ExponentFit> {
    if !t_plus.is_finite() {
        return Err(Error::InsufficientData(format!("blow-up time {t_plus} is not finite")));
    }
    let points = trackable(traj, t_plus);
    let window = fit_window(&points)?;
    let in_window: Vec<_> = points.iter().filter(|p| window.contains(p.0)).collect();
    if in_window.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} samples in the fit window, need {MIN_FIT_POINTS}",
            in_window.len()
        )));
    }
    let mut coeffs = [CoefficientFit { exponent: 0.0, prefactor: 0.0, r_squared: 0.0 }; 3];
    for (i, out) in coeffs.iter_mut().enumerate() {
        let pts: Vec<_> = in_window.iter().map(|(tau, x)| (tau.ln(), x[i].ln())).collect();
        let line = fit_line(&pts).ok_or_else(|| Error::InsufficientData("degenerate fit window".into()))?;
        *out = CoefficientFit { exponent: line.slope, prefactor: line.intercept.exp(), r_squared: line.r_squared };
    }
    Ok(ExponentFit { t_plus, coeffs, window, points: in_window.len() })
}

/// A point estimate with the range it was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn from_samples(mut values: Vec<f64>) -> Option<Interval> {
        let value = median(&mut values)?;
        Some(Interval { value, lo: values[0], hi: values[values.len() - 1] })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn relative_width(&self) -> f64 {
        self.width() / self.value.abs()
    }

    pub fn map_monotone(&self, f: impl Fn(f64) -> f64) -> Interval {
        let (a, b) = (f(self.lo), f(self.hi));
        Interval { value: f(self.value), lo: a.min(b), hi: a.max(b) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    /// Prefactor of the first collapsing coefficient in `(A, B, C)` order.
    pub eta1: Interval,
    pub eta2: Interval,
    /// Indices of the collapsing coefficients behind `eta1` and `eta2`.
    pub indices: [usize; 2],
    pub window: Window,
}

impl EtaEstimate {
    /// `eta2 / eta1` with bounds from the extreme ends of both intervals.
    pub fn ratio(&self) -> Interval {
        Interval {
            value: self.eta2.value / self.eta1.value,
            lo: self.eta2.lo / self.eta1.hi,
            hi: self.eta2.hi / self.eta1.lo,
        }
    }
}

/// Prefactors of the two coefficients that collapse like `(T+ - t)^(1/4)`,
/// taken as medians of `X (T+ - t)^(-1/4)` over the final decade of the fit window.
pub fn estimate_eta(traj: &Trajectory, t_plus: f64) -> Result<EtaEstimate> {
    let fit = fit_exponents(traj, t_plus)?;
    let blowup = fit.blowup_index();
    let exps = fit.exponents();
    if (exps[blowup] - BLOWUP_EXPONENT).abs() > EXPONENT_SLACK {
        return Err(Error::WrongCase(format!("no coefficient blows up like (T+ - t)^(-1/2): exponents {exps:?}")));
    }
    let collapsing: Vec<usize> = (0..3).filter(|&i| i != blowup).collect();
    for &i in &collapsing {
        if (exps[i] - COLLAPSE_EXPONENT).abs() > EXPONENT_SLACK {
            return Err(Error::WrongCase(format!(
                "coefficient {} has exponent {:.4}, not 1/4",
                ["A", "B", "C"][i],
                exps[i]
            )));
        }
    }
    let decade = Window { lo: fit.window.lo, hi: fit.window.lo * 10.0 };
    let interval = |i: usize| {
        let v: Vec<f64> = trackable(traj, t_plus)
            .into_iter()
            .filter(|p| decade.contains(p.0))
            .map(|(tau, x)| x[i] * tau.powf(-COLLAPSE_EXPONENT))
            .collect();
        Interval::from_samples(v).ok_or_else(|| Error::InsufficientData("empty final decade".into()))
    };
    Ok(EtaEstimate {
        eta1: interval(collapsing[0])?,
        eta2: interval(collapsing[1])?,
        indices: [collapsing[0], collapsing[1]],
        window: decade,
    })
}
