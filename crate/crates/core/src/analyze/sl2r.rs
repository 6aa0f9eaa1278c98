use serde::{Deserialize, Serialize};

use super::fit::{TAU_CEILING, TAU_FLOOR};
use crate::error::{Error, Result};
use crate::flow::FlowSpec;
use crate::geometry::{BianchiClass, MetricState};
use crate::integrate::{estimate_blowup_time, integrate, Controls, Trajectory};
use crate::parallel::par_map;
use crate::stats::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sl2rLabel {
    /// `A >= B` at some sample: `A` blows up.
    Q1,
    /// `A <= B - C` at some sample: `B` blows up.
    Q2,
    /// Neither inequality triggered before the run ended.
    Undetermined,
}

impl Sl2rLabel {
    pub fn tag(self) -> &'static str {
        match self {
            Sl2rLabel::Q1 => "Q1",
            Sl2rLabel::Q2 => "Q2",
            Sl2rLabel::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for Sl2rLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sl2rClassification {
    pub label: Sl2rLabel,
    pub trigger_time: Option<f64>,
    pub trigger_index: Option<usize>,
    /// Signed distance to the deciding inequality at the final sample, relative
    /// to the largest coefficient there. Nonnegative once a label is assigned;
    /// for an undetermined run it is the larger of the two (negative) gaps.
    pub margin: f64,
}

/// `(A - B, (B - C) - A)` over the largest coefficient; a nonnegative entry
/// means the corresponding trigger holds.
pub fn trigger_gaps(s: &MetricState) -> (f64, f64) {
    let m = s.a.max(s.b).max(s.c);
    ((s.a - s.b) / m, (s.b - s.c - s.a) / m)
}

fn label_of(s: &MetricState) -> Option<Sl2rLabel> {
    if s.a >= s.b {
        Some(Sl2rLabel::Q1)
    } else if s.a <= s.b - s.c {
        Some(Sl2rLabel::Q2)
    } else {
        None
    }
}

/// Label from the first sample at which `A >= B` or `A <= B - C` holds.
pub fn classify_sl2r(traj: &Trajectory) -> Sl2rClassification {
    let found = traj.states().enumerate().find_map(|(i, s)| label_of(s).map(|l| (i, s.t, l)));
    let (q1, q2) = trigger_gaps(traj.last());
    match found {
        Some((i, t, label)) => Sl2rClassification {
            label,
            trigger_time: Some(t),
            trigger_index: Some(i),
            margin: if label == Sl2rLabel::Q1 { q1 } else { q2 },
        },
        None => Sl2rClassification {
            label: Sl2rLabel::Undetermined,
            trigger_time: None,
            trigger_index: None,
            margin: q1.max(q2),
        },
    }
}

/// Number of samples after the trigger at which the triggering inequality
/// fails by more than `rel_slack` of the largest coefficient.
pub fn absorbing_violations(traj: &Trajectory, rel_slack: f64) -> usize {
    let c = classify_sl2r(traj);
    let Some(start) = c.trigger_index else { return 0 };
    traj.states()
        .skip(start)
        .filter(|s| {
            let (q1, q2) = trigger_gaps(s);
            match c.label {
                Sl2rLabel::Q1 => q1 < -rel_slack,
                Sl2rLabel::Q2 => q2 < -rel_slack,
                Sl2rLabel::Undetermined => false,
            }
        })
        .count()
}

/// Upper bound on the SL(2,R) blow-up time in the product-4 gauge: `dC/dt <= -2/3`.
pub fn sl2r_time_bound(s0: &MetricState) -> f64 {
    s0.t + 1.5 * s0.c
}

/// Integrate the positive flow from `s0` and classify.
pub fn classify_initial(s0: &MetricState, c: &Controls) -> Result<(Trajectory, Sl2rClassification)> {
    let spec = FlowSpec::positive(BianchiClass::Sl2r);
    let traj = integrate(&spec, s0, sl2r_time_bound(s0) + 1.0, c)?;
    let class = classify_sl2r(&traj);
    Ok((traj, class))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOptions {
    /// Stop once the bracket is at most this wide.
    pub width: f64,
    /// Interior probes per refinement round.
    pub probes: usize,
    pub controls: Controls,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions { width: 1e-6, probes: 7, controls: Controls::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointReport {
    pub x: f64,
    pub label: Sl2rLabel,
    pub trigger_time: Option<f64>,
    /// Largest `|A - B| / A` over the last half decade of growth before the trigger,
    /// i.e. roughly the last decade of `T+ - t`.
    pub ab_gap: f64,
    /// Slope of `ln C` against `ln(T+ - t)` before the trigger, if enough decades are resolved.
    pub c_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub lo: f64,
    pub hi: f64,
    pub label_lo: Sl2rLabel,
    pub label_hi: Sl2rLabel,
    pub rounds: usize,
    pub integrations: usize,
    pub midpoint: MidpointReport,
}

impl Boundary {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn probe(family: &(dyn Fn(f64) -> MetricState + Sync), x: f64, c: &Controls) -> Result<Sl2rLabel> {
    let s0 = family(x);
    if s0.b < s0.c {
        return Err(Error::InvalidInput(format!("family at x = {x} violates B >= C")));
    }
    let (_, class) = classify_initial(&s0, c)?;
    match class.label {
        Sl2rLabel::Undetermined => {
            Err(Error::IntegrationFailure(format!("probe at x = {x} reached the ceiling without deciding Q1 or Q2")))
        }
        l => Ok(l),
    }
}

/// Shrink `[x_lo, x_hi]` around the change of label along `family` by
/// repeated k-section, running the probes of each round in parallel.
pub fn locate_boundary(
    family: &(dyn Fn(f64) -> MetricState + Sync),
    x_lo: f64,
    x_hi: f64,
    opts: &BoundaryOptions,
) -> Result<Boundary> {
    if !(x_lo < x_hi) || !(opts.width > 0.0) || opts.probes == 0 {
        return Err(Error::InvalidInput(format!("bad bracket [{x_lo}, {x_hi}] or options")));
    }
    let c = &opts.controls;
    let ends = par_map(&[x_lo, x_hi], |&x| probe(family, x, c));
    let mut ends = ends.into_iter();
    let label_lo = ends.next().unwrap()?;
    let label_hi = ends.next().unwrap()?;
    if label_lo == label_hi {
        return Err(Error::SameLabel(label_lo.to_string()));
    }

    let (mut lo, mut hi) = (x_lo, x_hi);
    let mut rounds = 0;
    let mut integrations = 2;
    while hi - lo > opts.width {
        let k = opts.probes + 1;
        let xs: Vec<f64> = (1..k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
        let labels = par_map(&xs, |&x| probe(family, x, c));
        integrations += xs.len();
        rounds += 1;
        let mut new_lo = lo;
        let mut new_hi = hi;
        for (x, l) in xs.iter().zip(labels) {
            if l? == label_lo {
                new_lo = *x;
            } else {
                new_hi = *x;
                break;
            }
        }
        if !(new_hi - new_lo < hi - lo) {
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }

    let midpoint = midpoint_report(family, 0.5 * (lo + hi), c)?;
    integrations += 1;
    Ok(Boundary { lo, hi, label_lo, label_hi, rounds, integrations, midpoint })
}

fn midpoint_report(family: &(dyn Fn(f64) -> MetricState + Sync), x: f64, c: &Controls) -> Result<MidpointReport> {
    let (traj, class) = classify_initial(&family(x), c)?;
    let end = class.trigger_index.unwrap_or(traj.samples.len());
    let before: Vec<&MetricState> = traj.states().take(end).collect();

    let ab_gap = match before.last() {
        Some(last) => {
            let top = last.a.max(last.b);
            before
                .iter()
                .filter(|s| s.a.max(s.b) >= top / 10f64.sqrt())
                .map(|s| (s.a - s.b).abs() / s.a)
                .fold(0.0, f64::max)
        }
        None => f64::NAN,
    };

    let c_exponent = estimate_blowup_time(&traj).ok().and_then(|e| {
        let pts: Vec<(f64, f64)> = before
            .iter()
            .map(|s| (e.t_plus - s.t, s.c))
            .filter(|&(tau, _)| (TAU_FLOOR..=TAU_CEILING).contains(&tau))
            .map(|(tau, cc)| (tau.ln(), cc.ln()))
            .collect();
        let span = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
            - pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        (pts.len() >= 8 && span >= std::f64::consts::LN_10).then(|| fit_line(&pts)).flatten().map(|l| l.slope)
    });

    Ok(MidpointReport { x, label: class.label, trigger_time: class.trigger_time, ab_gap, c_exponent })
}

/// The one-parameter family `x -> (x, 2 sqrt(2/x), sqrt(2/x))`: product 4 and `B = 2C`.
pub fn standard_family(x: f64) -> MetricState {
    let r = (2.0 / x).sqrt();
    MetricState::initial(x, 2.0 * r, r)
}
