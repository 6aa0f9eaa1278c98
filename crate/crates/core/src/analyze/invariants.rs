use serde::{Deserialize, Serialize};

use super::sl2r::absorbing_violations;
use crate::flow::{self, FlowDirection, CANONICAL_PRODUCT};
use crate::geometry::{BianchiClass, MetricState};
use crate::integrate::Trajectory;

/// Relative slack for monotonicity and ordering checks.
pub const ORDER_SLACK: f64 = 1e-10;
/// Relative slack for quantities the flow conserves exactly.
pub const CONSERVED_SLACK: f64 = 1e-9;
/// Product drift allowed with or without renormalization at default tolerances.
pub const DRIFT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    /// Worst violation found; zero when the property holds exactly.
    pub worst: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, worst: f64, slack: f64) {
        let worst = worst.max(0.0);
        self.checks.push(InvariantCheck { name: name.to_string(), worst, slack, passed: worst <= slack });
    }
}

/// Worst relative decrease of `value` between consecutive samples, measured against `scale`.
fn worst_decrease<'a>(
    states: impl Iterator<Item = &'a MetricState>,
    value: impl Fn(&MetricState) -> f64,
    scale: impl Fn(&MetricState) -> f64,
) -> f64 {
    let v: Vec<(f64, f64)> = states.map(|s| (value(s), scale(s))).collect();
    v.windows(2).map(|w| (w[0].0 - w[1].0) / w[0].1.abs().max(w[1].1.abs())).fold(0.0, f64::max)
}

/// Worst relative amount by which `lhs >= rhs` fails.
fn worst_order<'a>(
    states: impl Iterator<Item = &'a MetricState>,
    lhs: impl Fn(&MetricState) -> f64,
    rhs: impl Fn(&MetricState) -> f64,
) -> f64 {
    states.map(|s| (rhs(s) - lhs(s)) / lhs(s).abs().max(rhs(s).abs())).fold(0.0, f64::max)
}

fn worst_conserved<'a>(states: impl Iterator<Item = &'a MetricState>, q: impl Fn(&MetricState) -> f64, q0: f64) -> f64 {
    states.map(|s| (q(s) - q0).abs() / q0.abs()).fold(0.0, f64::max)
}

fn coincide(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * x.abs().max(y.abs())
}

/// Evaluate every invariant that applies to the trajectory's class, direction
/// and initial ordering.
pub fn invariant_report(traj: &Trajectory) -> InvariantReport {
    let mut r = InvariantReport::default();
    let st = || traj.states();
    let s0 = *traj.first();
    let class = traj.spec.class;
    let positive = traj.spec.direction == FlowDirection::PositiveNormalized;
    let gauge = (traj.spec.product - CANONICAL_PRODUCT).abs() <= 1e-12;

    let time_gap = traj.samples.windows(2).map(|w| w[0].state.t - w[1].state.t).fold(f64::NEG_INFINITY, f64::max);
    let strictly_increasing = traj.samples.len() < 2 || time_gap < 0.0;
    r.push("times_strictly_increasing", if strictly_increasing { 0.0 } else { time_gap.max(f64::MIN_POSITIVE) }, 0.0);
    let nonpositive = st().filter(|s| !s.is_valid()).count();
    r.push("coefficients_positive", nonpositive as f64, 0.0);
    r.push("product_drift", traj.max_product_drift(), DRIFT_SLACK);

    // Orderings preserved by the symmetry of each class.
    let pairs: &[(usize, usize)] = match class {
        BianchiClass::Su2 => &[(0, 1), (1, 2), (0, 2)],
        BianchiClass::E11 => &[(0, 2)],
        BianchiClass::E2 => &[(0, 1)],
        BianchiClass::Sl2r => &[(1, 2)],
        BianchiClass::Nil => &[],
    };
    let c0 = s0.coeffs();
    let names = ["A", "B", "C"];
    for &(i, j) in pairs {
        if coincide(c0[i], c0[j]) {
            continue;
        }
        let (hi, lo) = if c0[i] > c0[j] { (i, j) } else { (j, i) };
        let worst = worst_order(st(), |s| s.coeffs()[hi], |s| s.coeffs()[lo]);
        r.push(&format!("order_{}_ge_{}", names[hi], names[lo]), worst, ORDER_SLACK);
    }

    let nondecr = |f: &dyn Fn(&MetricState) -> f64, scale: &dyn Fn(&MetricState) -> f64| worst_decrease(st(), f, scale);
    let noninc =
        |f: &dyn Fn(&MetricState) -> f64, scale: &dyn Fn(&MetricState) -> f64| worst_decrease(st(), |s| -f(s), scale);

    match class {
        BianchiClass::Su2 => {
            let ordered = s0.a >= s0.b && s0.b >= s0.c;
            if positive && ordered {
                r.push("A_nondecreasing", nondecr(&|s| s.a, &|s| s.a), ORDER_SLACK);
                r.push("A_minus_B_nondecreasing", nondecr(&|s| s.a - s.b, &|s| s.a), ORDER_SLACK);
                r.push("A_minus_C_nondecreasing", nondecr(&|s| s.a - s.c, &|s| s.a), ORDER_SLACK);
                r.push("C_nonincreasing", noninc(&|s| s.c, &|s| s.c), ORDER_SLACK);
            }
            if coincide(s0.a, s0.b) && s0.b > s0.c {
                r.push("A_equals_B", st().map(|s| (s.a - s.b).abs() / s.a).fold(0.0, f64::max), ORDER_SLACK);
                let q0 = s0.a * s0.a * s0.c;
                r.push("A2C_conserved", worst_conserved(st(), |s| s.a * s.a * s.c, q0), CONSERVED_SLACK);
            }
        }
        BianchiClass::Sl2r if positive => {
            r.push("AB_nondecreasing", nondecr(&|s| s.a * s.b, &|s| s.a * s.b), ORDER_SLACK);
            // d/dt ln(A/B) has the sign of A + C - B; check it wherever the sign
            // is the same at both ends of a sample interval.
            let v: Vec<&MetricState> = st().collect();
            let worst = v
                .windows(2)
                .filter_map(|w| {
                    let g = |s: &MetricState| (s.a + s.c - s.b) / s.b;
                    let (g0, g1) = (g(w[0]), g(w[1]));
                    let d = (w[1].a / w[1].b).ln() - (w[0].a / w[0].b).ln();
                    (g0 * g1 > 0.0 && g0.abs().min(g1.abs()) > ORDER_SLACK).then(|| if g0 > 0.0 { -d } else { d })
                })
                .fold(0.0, f64::max);
            r.push("ln_A_over_B_rate_sign", worst, ORDER_SLACK);
            if gauge {
                let spec = traj.spec;
                let worst = st().filter_map(|s| flow::rhs(&spec, s).ok()).map(|d| d.dc + 2.0 / 3.0).fold(0.0, f64::max);
                r.push("dC_dt_at_most_minus_two_thirds", worst, 1e-12);
            }
            r.push("trigger_absorbing", absorbing_violations(traj, 1e-12) as f64, 0.0);
        }
        BianchiClass::E2 if positive => {
            if coincide(s0.a, s0.b) {
                r.push(
                    "stationary",
                    worst_conserved(st(), |s| s.a, s0.a).max(worst_conserved(st(), |s| s.c, s0.c)),
                    ORDER_SLACK,
                );
            } else if s0.a > s0.b {
                r.push("A_nondecreasing", nondecr(&|s| s.a, &|s| s.a), ORDER_SLACK);
                r.push("B_nonincreasing", noninc(&|s| s.b, &|s| s.b), ORDER_SLACK);
                r.push("C_nonincreasing", noninc(&|s| s.c, &|s| s.c), ORDER_SLACK);
                r.push("AB2_nonincreasing", noninc(&|s| s.a * s.b * s.b, &|s| s.a * s.b * s.b), ORDER_SLACK);
            }
        }
        BianchiClass::E11 if positive => {
            r.push("B_nonincreasing", noninc(&|s| s.b, &|s| s.b), ORDER_SLACK);
            if coincide(s0.a, s0.c) {
                r.push("A_equals_C", st().map(|s| (s.a - s.c).abs() / s.a).fold(0.0, f64::max), ORDER_SLACK);
            } else if s0.a > s0.c {
                r.push("A_over_C_nondecreasing", nondecr(&|s| s.a / s.c, &|s| s.a / s.c), ORDER_SLACK);
            }
        }
        BianchiClass::Nil => {
            r.push("AB2_conserved", worst_conserved(st(), |s| s.a * s.b * s.b, s0.a * s0.b * s0.b), CONSERVED_SLACK);
            r.push("AC2_conserved", worst_conserved(st(), |s| s.a * s.c * s.c, s0.a * s0.c * s0.c), CONSERVED_SLACK);
            let (grow, shrink) =
                if positive { ("A_nondecreasing", "B_nonincreasing") } else { ("A_nonincreasing", "B_nondecreasing") };
            if positive {
                r.push(grow, nondecr(&|s| s.a, &|s| s.a), ORDER_SLACK);
                r.push(shrink, noninc(&|s| s.b, &|s| s.b), ORDER_SLACK);
            } else {
                r.push(grow, noninc(&|s| s.a, &|s| s.a), ORDER_SLACK);
                r.push(shrink, nondecr(&|s| s.b, &|s| s.b), ORDER_SLACK);
            }
        }
        _ => {}
    }
    r
}
