//! Self-check suite: closed-form oracles, asymptotic laws, invariants and
//! structural identities, each reduced to a worst deviation against a tolerance.

use serde::Serialize;

use crate::analyze::{
    classify_sl2r, fit_exponents, invariant_report, locate_boundary, standard_family, BoundaryOptions, Sl2rLabel,
};
use crate::error::{Error, Result};
use crate::flow::{self, FlowDirection, FlowSpec};
use crate::geometry::{BianchiClass, MetricState};
use crate::integrate::{integrate, scaling_check, Controls, Trajectory};
use crate::oracle::{self, BLOWUP_PREFACTOR, LINEAR_COLLAPSE_PREFACTOR};
use crate::parallel::par_map;

/// Deliberate defects used to show that the suite detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Integrate every run with the opposite sign of the right-hand side.
    FlipRhsSign,
}

impl std::str::FromStr for Fault {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Fault::None),
            "flip-rhs-sign" => Ok(Fault::FlipRhsSign),
            _ => Err(Error::InvalidInput(format!("unknown fault {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn new(name: &str, deviation: f64, tolerance: f64) -> Check {
        // NaN deviations fail.
        Check { name: name.to_string(), deviation, tolerance, passed: deviation <= tolerance, error: None }
    }

    fn failed(name: &str, why: &Error) -> Check {
        Check {
            name: name.to_string(),
            deviation: f64::INFINITY,
            tolerance: 0.0,
            passed: false,
            error: Some(why.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub max_product_drift: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Fixed-width table of name, deviation, tolerance and verdict.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
        let mut out = format!("{:<width$}  {:>12}  {:>10}  result\n", "check", "deviation", "tolerance");
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "FAIL" };
            out.push_str(&format!("{:<width$}  {:>12.3e}  {:>10.1e}  {verdict}", c.name, c.deviation, c.tolerance));
            if let Some(e) = &c.error {
                out.push_str(&format!("  ({e})"));
            }
            out.push('\n');
        }
        out
    }
}

struct Ctx {
    fault: Fault,
    controls: Controls,
}

impl Ctx {
    fn run(&self, class: BianchiClass, direction: FlowDirection, x: [f64; 3], horizon: f64) -> Result<Trajectory> {
        let d = match self.fault {
            Fault::None => direction,
            Fault::FlipRhsSign => direction.reversed(),
        };
        let mut traj =
            integrate(&FlowSpec::new(class, d), &MetricState::initial(x[0], x[1], x[2]), horizon, &self.controls)?;
        // Analysis sees the direction that was asked for.
        traj.spec.direction = direction;
        Ok(traj)
    }

    fn positive(&self, class: BianchiClass, x: [f64; 3]) -> Result<Trajectory> {
        self.run(class, FlowDirection::PositiveNormalized, x, 10.0)
    }
}

/// Group of checks sharing one or two integrations, plus the drift they saw.
type Group = (Vec<Check>, f64);

fn rel(x: f64, e: f64) -> f64 {
    (x - e).abs() / e.abs()
}

fn blowup_exponents(
    ctx: &Ctx,
    prefix: &str,
    class: BianchiClass,
    x: [f64; 3],
    expected: [f64; 3],
) -> Result<(Trajectory, Vec<Check>)> {
    let traj = ctx.positive(class, x)?;
    let t_plus = traj
        .t_plus_estimate
        .ok_or_else(|| Error::InsufficientData(format!("{prefix}: no blow-up within the horizon")))?;
    let fit = fit_exponents(&traj, t_plus)?;
    let worst = fit.exponents().iter().zip(expected).map(|(e, x)| (e - x).abs()).fold(0.0, f64::max);
    Ok((traj, vec![Check::new(&format!("{prefix}_exponents"), worst, 0.02)]))
}

fn nil_closed_form(ctx: &Ctx) -> Result<Group> {
    let x = [1.0, 2.0, 2.0];
    let fwd = ctx.run(BianchiClass::Nil, FlowDirection::ForwardNormalized, x, 10.0)?;
    let bwd = ctx.run(BianchiClass::Nil, FlowDirection::PositiveNormalized, x, 0.37)?;
    let mut worst = 0.0f64;
    for (traj, sign) in [(&fwd, 1.0), (&bwd, -1.0)] {
        for s in traj.states() {
            let e = oracle::nil_solution(1.0, 2.0, 2.0, sign * s.t)?;
            for (v, ev) in s.coeffs().iter().zip(e.coeffs()) {
                worst = worst.max(rel(*v, ev));
            }
        }
    }
    Ok((vec![Check::new("nil_closed_form", worst, 1e-8)], fwd.max_product_drift().max(bwd.max_product_drift())))
}

fn e11_symmetric(ctx: &Ctx) -> Result<Group> {
    let traj = ctx.positive(BianchiClass::E11, [2.0, 1.0, 2.0])?;
    let exact_t = oracle::e11_blowup_time(1.0);
    let t_plus = traj.t_plus_estimate.unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    for s in traj.states().filter(|s| exact_t - s.t >= 1e-4) {
        let e = oracle::e11_symmetric(2.0, 1.0, s.t)?;
        for (v, ev) in s.coeffs().iter().zip(e.coeffs()) {
            worst = worst.max(rel(*v, ev));
        }
    }
    let mut checks =
        vec![Check::new("e11_blowup_time", rel(t_plus, exact_t), 1e-6), Check::new("e11_closed_form", worst, 1e-8)];
    let fit = fit_exponents(&traj, t_plus)?;
    checks.push(Check::new("e11_B_exponent", (fit.coeffs[1].exponent - 1.0).abs(), 0.01));
    checks.push(Check::new("e11_B_prefactor", rel(fit.coeffs[1].prefactor, LINEAR_COLLAPSE_PREFACTOR), 0.01));
    Ok((checks, traj.max_product_drift()))
}

fn su2_generic(ctx: &Ctx) -> Result<Group> {
    let (traj, mut checks) = blowup_exponents(ctx, "su2", BianchiClass::Su2, [2.0, 1.6, 1.25], [-0.5, 0.25, 0.25])?;
    let t_plus = traj.t_plus_estimate.unwrap_or(f64::NAN);
    let fit = fit_exponents(&traj, t_plus)?;
    let worst = traj
        .states()
        .filter(|s| fit.window.contains(t_plus - s.t))
        .map(|s| rel(s.a * (t_plus - s.t).sqrt(), BLOWUP_PREFACTOR))
        .fold(0.0, f64::max);
    checks.push(Check::new("su2_A_prefactor", worst, 0.01));
    let report = invariant_report(&traj);
    let worst =
        report.checks.iter().map(|c| if c.passed { 0.0 } else { c.worst.max(f64::MIN_POSITIVE) }).fold(0.0, f64::max);
    checks.push(Check::new("su2_invariants", worst, 0.0));
    Ok((checks, traj.max_product_drift()))
}

fn su2_symmetric_pair(ctx: &Ctx) -> Result<Group> {
    let traj = ctx.run(BianchiClass::Su2, FlowDirection::PositiveNormalized, [2.0, 2.0, 1.0], 1e3)?;
    let last = traj.last();
    let t = last.t;
    let a2c = traj.states().map(|s| rel(s.a * s.a * s.c, 4.0)).fold(0.0, f64::max);
    let checks = vec![
        Check::new("su2_pair_A_over_t", rel(last.a / t, 8.0 / 3.0) + (t - 1e3).abs(), 0.01),
        Check::new("su2_pair_C_t2", rel(last.c * t * t, 9.0 / 16.0) + (t - 1e3).abs(), 0.01),
        Check::new("su2_pair_A2C", a2c, 1e-9),
    ];
    Ok((checks, traj.max_product_drift()))
}

/// Median of `q` over the final decade of `T+ - t` resolved by the samples.
fn final_decade_median(traj: &Trajectory, t_plus: f64, q: impl Fn(&MetricState) -> f64) -> f64 {
    let fit = match fit_exponents(traj, t_plus) {
        Ok(f) => f,
        Err(_) => return f64::NAN,
    };
    let mut v: Vec<f64> =
        traj.states().filter(|s| (fit.window.lo..=fit.window.lo * 10.0).contains(&(t_plus - s.t))).map(q).collect();
    crate::stats::median(&mut v).unwrap_or(f64::NAN)
}

fn e2_generic(ctx: &Ctx) -> Result<Group> {
    let (traj, mut checks) = blowup_exponents(ctx, "e2", BianchiClass::E2, [2.0, 1.0, 2.0], [-0.5, 0.25, 0.25])?;
    let report = invariant_report(&traj);
    let ab2 = report.get("AB2_nonincreasing").map_or(f64::INFINITY, |c| c.worst);
    checks.push(Check::new("e2_AB2_nonincreasing", ab2, 1e-10));
    // AB^2 decreases and AC^2 increases along the flow, so both limits are
    // finite and positive and keep the order they have at t = 0.
    let t_plus = traj.t_plus_estimate.unwrap_or(f64::NAN);
    let ab2 = final_decade_median(&traj, t_plus, |s| s.a * s.b * s.b);
    let ac2 = final_decade_median(&traj, t_plus, |s| s.a * s.c * s.c);
    let s0 = traj.first();
    let ok = ab2 > 0.0 && ac2.is_finite() && ab2 <= s0.a * s0.b * s0.b && ac2 >= s0.a * s0.c * s0.c;
    checks.push(Check::new("e2_conserved_limits", if ok { 0.0 } else { f64::INFINITY }, 0.0));
    Ok((checks, traj.max_product_drift()))
}

fn e11_generic(ctx: &Ctx) -> Result<Group> {
    let (traj, mut checks) =
        blowup_exponents(ctx, "e11_generic", BianchiClass::E11, [2.0, 2.0, 1.0], [-0.5, 0.25, 0.25])?;
    let states: Vec<&MetricState> = traj.states().collect();
    let start = states.iter().position(|s| s.a >= 2.0 * s.c);
    checks.push(Check::new("e11_reaches_A_ge_2C", if start.is_some() { 0.0 } else { f64::INFINITY }, 0.0));
    let worst = start.map_or(f64::INFINITY, |i| {
        states[i..].windows(2).map(|w| (w[0].a / w[0].c - w[1].a / w[1].c) / (w[0].a / w[0].c)).fold(0.0, f64::max)
    });
    checks.push(Check::new("e11_A_over_C_nondecreasing", worst, 1e-10));
    Ok((checks, traj.max_product_drift()))
}

fn sl2r_regions(ctx: &Ctx) -> Result<Group> {
    let mut checks = Vec::new();
    let mut drift = 0.0f64;
    for (prefix, x, label, expected) in [
        ("sl2r_q1", [2.0, 2.0, 1.0], Sl2rLabel::Q1, [-0.5, 0.25, 0.25]),
        ("sl2r_q2", [0.5, 4.0, 2.0], Sl2rLabel::Q2, [0.25, -0.5, 0.25]),
    ] {
        let (traj, mut c) = blowup_exponents(ctx, prefix, BianchiClass::Sl2r, x, expected)?;
        let got = classify_sl2r(&traj).label;
        c.push(Check::new(&format!("{prefix}_label"), if got == label { 0.0 } else { f64::INFINITY }, 0.0));
        let ab = invariant_report(&traj).get("AB_nondecreasing").map_or(f64::INFINITY, |c| c.worst);
        c.push(Check::new(&format!("{prefix}_AB_nondecreasing"), ab, 1e-10));
        checks.extend(c);
        drift = drift.max(traj.max_product_drift());
    }
    Ok((checks, drift))
}

fn sl2r_boundary(ctx: &Ctx) -> Result<Group> {
    let opts = BoundaryOptions { controls: ctx.controls, ..BoundaryOptions::default() };
    let b = if ctx.fault == Fault::None {
        locate_boundary(&standard_family, 0.5, 2.0, &opts)?
    } else {
        // Flipped dynamics would never be seen by the classifier; fail outright.
        return Err(Error::WrongCase("boundary search requires the positive flow".into()));
    };
    let opposite = b.label_lo != b.label_hi;
    Ok((
        vec![
            Check::new("sl2r_boundary_width", if opposite { b.width() } else { f64::INFINITY }, 1e-6),
            Check::new("sl2r_boundary_midpoint_AB_gap", b.midpoint.ab_gap, 0.05),
        ],
        0.0,
    ))
}

fn scaling(ctx: &Ctx) -> Result<Group> {
    let mut worst = 0.0f64;
    for (class, x, horizon) in [(BianchiClass::Su2, [2.0, 1.6, 1.25], 0.1), (BianchiClass::Nil, [1.0, 2.0, 2.0], 1.0)] {
        for lambda in [0.5, 2.0] {
            let direction = match ctx.fault {
                Fault::None => FlowDirection::PositiveNormalized,
                Fault::FlipRhsSign => FlowDirection::ForwardNormalized,
            };
            let s0 = MetricState::initial(x[0], x[1], x[2]);
            let r = scaling_check(class, direction, &s0, lambda, horizon, &ctx.controls)?;
            worst = worst.max(r.max_rel_deviation);
        }
    }
    Ok((vec![Check::new("scaling_covariance", worst, 1e-6)], 0.0))
}

/// Deterministic product-4 states spread over three decades per coefficient.
pub fn sample_states(n: usize) -> Vec<MetricState> {
    let (g1, g2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_2);
    (0..n)
        .map(|k| {
            let u = ((k as f64 + 0.5) * g1).fract();
            let v = ((k as f64 + 0.5) * g2).fract();
            let a = 10f64.powf(3.0 * u - 1.5);
            let b = 10f64.powf(3.0 * v - 1.5);
            MetricState::initial(a, b, 4.0 / (a * b))
        })
        .collect()
}

fn route_agreement(ctx: &Ctx) -> Result<Group> {
    let mut worst = 0.0f64;
    for class in BianchiClass::ALL {
        for direction in [FlowDirection::PositiveNormalized, FlowDirection::ForwardNormalized] {
            let spec = FlowSpec::new(class, direction);
            for s in sample_states(1000) {
                let mut p = flow::rhs(&spec, &s)?.as_array();
                if ctx.fault == Fault::FlipRhsSign {
                    p = p.map(|x| -x);
                }
                let q = flow::rhs_from_curvatures(&spec, &s)?.as_array();
                let scale = q.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
                let d = p.iter().zip(q).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                worst = worst.max(d / scale);
            }
        }
    }
    Ok((vec![Check::new("rhs_route_agreement", worst, 1e-12)], 0.0))
}

fn fixed_points(ctx: &Ctx) -> Result<Group> {
    let x = 4f64.cbrt();
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    for (class, s) in [(BianchiClass::Su2, [x, x, x]), (BianchiClass::E2, [1.0, 1.0, 4.0])] {
        for direction in [FlowDirection::PositiveNormalized, FlowDirection::ForwardNormalized] {
            let traj = ctx.run(class, direction, s, 10.0)?;
            for st in traj.states() {
                for (v, e) in st.coeffs().iter().zip(s) {
                    worst = worst.max(rel(*v, e));
                }
            }
            if traj.last().t != 10.0 {
                worst = f64::INFINITY;
            }
            drift = drift.max(traj.max_product_drift());
        }
    }
    Ok((vec![Check::new("fixed_points_stationary", worst, 1e-10)], drift))
}

type GroupFn = fn(&Ctx) -> Result<Group>;

const GROUPS: [(&str, GroupFn); 11] = [
    ("nil_closed_form", nil_closed_form),
    ("e11_symmetric", e11_symmetric),
    ("su2_generic", su2_generic),
    ("su2_symmetric_pair", su2_symmetric_pair),
    ("e2_generic", e2_generic),
    ("e11_generic", e11_generic),
    ("sl2r_regions", sl2r_regions),
    ("sl2r_boundary", sl2r_boundary),
    ("scaling", scaling),
    ("rhs_route_agreement", route_agreement),
    ("fixed_points", fixed_points),
];

/// Run every check group; groups run in parallel, output order is fixed.
pub fn run_suite(fault: Fault, controls: &Controls) -> SuiteReport {
    let ctx = Ctx { fault, controls: *controls };
    let results = par_map(&GROUPS, |(name, f)| (*name, f(&ctx)));
    let mut report = SuiteReport::default();
    for (name, r) in results {
        match r {
            Ok((checks, drift)) => {
                report.checks.extend(checks);
                report.max_product_drift = report.max_product_drift.max(drift);
            }
            Err(e) => report.checks.push(Check::failed(name, &e)),
        }
    }
    report.checks.push(Check::new("product_drift", report.max_product_drift, 1e-9));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_states_have_product_four() {
        for s in sample_states(100) {
            assert!((s.product() - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn fault_names() {
        assert_eq!("flip-rhs-sign".parse::<Fault>().unwrap(), Fault::FlipRhsSign);
        assert!("other".parse::<Fault>().is_err());
    }
}
