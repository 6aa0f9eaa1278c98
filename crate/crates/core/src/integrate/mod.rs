//! Adaptive integration of the flow into the blow-up regime.
//!
//! The state is carried in log coordinates `(u, v, w) = (ln A, ln B, ln C)`, so
//! positivity is structural and the volume constraint `u + v + w = ln P` is
//! linear. Time itself is a dependent variable: the integrator advances an
//! arc-length parameter `s` with
//!
//! ```text
//! dt/ds = 1 / sqrt(1 + |f|^2),    d(u,v,w)/ds = f / sqrt(1 + |f|^2),
//! ```
//!
//! where `f` is the log-rate of the coefficients. Near a finite-time blow-up
//! `|f|` grows like `(T+ - t)^-1`, and the reparametrization keeps the step in
//! `s` bounded all the way to the blow-up ceiling instead of collapsing with
//! `T+ - t`. Elapsed time is accumulated with compensated summation.

mod blowup;
mod canonical;
mod dopri;
mod scaling;

pub use blowup::{estimate_blowup_time, BlowupEstimate};
pub use canonical::{canonicalize, canonicalize_with, Canonicalization, Permutation};
pub use scaling::{scaling_check, ScalingReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowSpec, RhsRoute};
use crate::geometry::{sectional_curvatures, Curvatures, MetricState};

use dopri::{bisect_root, Controller, Dense, Tolerance, Vec4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Blow-up is declared once a coefficient exceeds this value.
    pub max_coeff: f64,
    /// Smallest step in the arc-length parameter.
    pub min_step: f64,
    /// Number of intervals of the uniform output grid over `[t0, horizon]`.
    pub max_samples: usize,
    /// Project `ABC` back onto the product after every accepted step.
    pub renormalize: bool,
    /// Output samples per decade of the largest coefficient once it sets a new high.
    pub levels_per_decade: usize,
    pub max_steps: usize,
    pub route: RhsRoute,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            max_coeff: 1e8,
            min_step: 1e-14,
            max_samples: 2000,
            renormalize: true,
            levels_per_decade: 64,
            max_steps: 5_000_000,
            route: RhsRoute::Polynomial,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_coeff > 10.0
            && self.min_step > 0.0
            && self.max_samples > 0
            && self.levels_per_decade > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid controls {self:?}")))
        }
    }

    /// Same controls with both tolerances scaled by `factor`.
    pub fn with_tolerance_scaled(mut self, factor: f64) -> Self {
        self.rel_tol *= factor;
        self.abs_tol *= factor;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    ReachedTmax,
    BlowupCeiling,
    StepUnderflow,
}

impl Terminal {
    pub fn tag(self) -> &'static str {
        match self {
            Terminal::ReachedTmax => "reached_tmax",
            Terminal::BlowupCeiling => "blowup_ceiling",
            Terminal::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: MetricState,
    pub curvatures: Curvatures,
    /// `|ABC - P| / P`.
    pub product_drift: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: FlowSpec,
    pub samples: Vec<Sample>,
    pub terminal: Terminal,
    pub t_plus_estimate: Option<f64>,
    pub stats: StepStats,
}

impl Trajectory {
    /// Assemble a trajectory from states, e.g. for analysis of externally produced data.
    pub fn from_states(spec: FlowSpec, states: &[MetricState], terminal: Terminal) -> Self {
        let samples = states.iter().map(|s| make_sample(&spec, *s)).collect();
        Trajectory { spec, samples, terminal, t_plus_estimate: None, stats: StepStats::default() }
    }

    pub fn states(&self) -> impl Iterator<Item = &MetricState> + '_ {
        self.samples.iter().map(|s| &s.state)
    }

    pub fn first(&self) -> &MetricState {
        &self.samples[0].state
    }

    pub fn last(&self) -> &MetricState {
        &self.samples[self.samples.len() - 1].state
    }

    pub fn max_product_drift(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.product_drift))
    }
}

fn make_sample(spec: &FlowSpec, state: MetricState) -> Sample {
    Sample {
        curvatures: sectional_curvatures(spec.class, &state),
        product_drift: (state.product() - spec.product).abs() / spec.product,
        state,
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn max_log(y: &Vec4) -> f64 {
    y[1].max(y[2]).max(y[3])
}

/// Elapsed time kept as an unevaluated sum `hi + lo`.
#[derive(Debug, Clone, Copy)]
struct Clock {
    hi: f64,
    lo: f64,
}

impl Clock {
    fn at(&self, offset: f64) -> f64 {
        self.hi + (self.lo + offset)
    }

    /// Offset from the clock that reaches the absolute time `t`.
    fn offset_to(&self, t: f64) -> f64 {
        (t - self.hi) - self.lo
    }

    fn advance(&mut self, dt: f64) {
        let (s, e) = two_sum(self.hi, dt);
        let (hi, lo) = two_sum(s, e + self.lo);
        self.hi = hi;
        self.lo = lo;
    }
}

struct Recorder<'a> {
    spec: &'a FlowSpec,
    samples: Vec<Sample>,
    /// `ln(product)` to project samples onto, when renormalizing.
    project_to: Option<f64>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, y: &Vec4, terminal: bool) {
        let shift = self.project_to.map_or(0.0, |lp| (lp - (y[1] + y[2] + y[3])) / 3.0);
        let state = MetricState::new(t, (y[1] + shift).exp(), (y[2] + shift).exp(), (y[3] + shift).exp());
        let sample = make_sample(self.spec, state);
        if terminal {
            // Keep the very first sample even if the run stops where it started.
            while self.samples.len() > 1 && self.samples.last().is_some_and(|p| p.state.t >= t) {
                self.samples.pop();
            }
            if self.samples.last().is_some_and(|p| p.state.t >= t) {
                return;
            }
        } else if self.samples.last().is_some_and(|p| p.state.t >= t) {
            return;
        }
        self.samples.push(sample);
    }
}

/// Integrate `spec` from `s0` (at time `s0.t`) up to time `horizon`.
///
/// Output samples are taken on a uniform grid of `max_samples` intervals over
/// `[s0.t, horizon]` and, whenever the largest coefficient reaches a new high,
/// at every crossing of `10^(k / levels_per_decade)`. Near a blow-up the
/// largest coefficient behaves like `(T+ - t)^(-1/2)`, so the default 64 levels
/// per decade give 32 samples per decade of `T+ - t`.
pub fn integrate(spec: &FlowSpec, s0: &MetricState, horizon: f64, c: &Controls) -> Result<Trajectory> {
    spec.validate()?;
    c.validate()?;
    s0.validate()?;
    spec.check_product(s0)?;
    if !(horizon > s0.t) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must exceed start time {}", s0.t)));
    }

    let route = c.route;
    let mut rhs = |y: &Vec4| -> Result<Vec4> {
        let st = MetricState::new(0.0, y[1].exp(), y[2].exp(), y[3].exp());
        if !st.is_valid() {
            return Ok([f64::NAN; 4]);
        }
        let d = flow::evaluate(route, spec, &st)?;
        let f = [d.da / st.a, d.db / st.b, d.dc / st.c];
        let m = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let norm = m * ((1.0 / m).powi(2) + f.iter().map(|x| (x / m).powi(2)).sum::<f64>()).sqrt();
        Ok([1.0 / norm, f[0] / norm, f[1] / norm, f[2] / norm])
    };

    // The first component is the time elapsed within the step (it starts at
    // zero), so it is controlled relative to the step length alone. An
    // absolute floor there would swamp `T+ - t` near a blow-up.
    let tol = Tolerance { rel: c.rel_tol, abs: [0.0, c.abs_tol, c.abs_tol, c.abs_tol] };
    let ln_ceiling = c.max_coeff.ln();
    let ln_product = spec.product.ln();
    let level_step = std::f64::consts::LN_10 / c.levels_per_decade as f64;

    let grid_dt = if horizon.is_finite() { (horizon - s0.t) / c.max_samples as f64 } else { f64::INFINITY };
    let grid_time = |k: usize| if k == c.max_samples { horizon } else { s0.t + k as f64 * grid_dt };
    let mut next_grid = 1usize;

    let mut clock = Clock { hi: s0.t, lo: 0.0 };
    let mut y: Vec4 = [0.0, s0.a.ln(), s0.b.ln(), s0.c.ln()];
    // Index of the highest level already recorded; levels sit at k * level_step.
    let mut level_record = (max_log(&y) / level_step).floor() as i64;
    let mut rec = Recorder { spec, samples: Vec::new(), project_to: c.renormalize.then_some(ln_product) };
    rec.push(s0.t, &y, false);

    let mut k1 = rhs(&y)?;
    let mut h = 1e-2;
    let mut ctrl = Controller::new();
    let mut stats = StepStats::default();
    let horizon_eps = 4.0 * f64::EPSILON * horizon.abs().max(1.0);

    let terminal = loop {
        if stats.accepted + stats.rejected >= c.max_steps {
            return Err(Error::IntegrationFailure(format!(
                "step budget of {} exhausted at t = {}",
                c.max_steps,
                clock.at(0.0)
            )));
        }
        if h < c.min_step {
            rec.push(clock.at(0.0), &y, true);
            break Terminal::StepUnderflow;
        }

        let out = dopri::step(&mut rhs, &y, &k1, h, tol)?;
        if !(out.err <= 1.0) {
            stats.rejected += 1;
            h = ctrl.reject(h, out.err);
            continue;
        }

        let ceiling_hit = max_log(&out.y) >= ln_ceiling;
        let t_end = clock.at(out.y[0]);
        let crosses_horizon = t_end > horizon + horizon_eps;
        let theta_ceiling = ceiling_hit.then(|| bisect_root(|th| max_log(&out.dense.eval(th)) - ln_ceiling, 0.0, 1.0));
        let ceiling_first = match theta_ceiling {
            Some(th) => clock.at(out.dense.eval(th)[0]) <= horizon,
            None => false,
        };

        if crosses_horizon && !ceiling_first {
            // Retake a shorter step that lands on the horizon.
            let target = clock.offset_to(horizon);
            let theta = bisect_root(|th| out.dense.eval(th)[0] - target, 0.0, 1.0);
            h *= theta.max(1e-3);
            continue;
        }
        stats.accepted += 1;

        let lands = !ceiling_first && t_end >= horizon - horizon_eps;
        let theta_stop = if ceiling_first { theta_ceiling.unwrap() } else { 1.0 };
        let step_end_t = if lands { horizon } else { clock.at(out.dense.eval(theta_stop)[0]) };

        emit_events(
            &mut rec,
            &out.dense,
            &clock,
            theta_stop,
            step_end_t,
            &mut next_grid,
            c.max_samples,
            &grid_time,
            &mut level_record,
            level_step,
        );

        if ceiling_first {
            let yc = out.dense.eval(theta_stop);
            rec.push(step_end_t, &yc, true);
            break Terminal::BlowupCeiling;
        }

        let mut y_new = out.y;
        let mut k_new = out.k_end;
        if c.renormalize {
            let shift = (ln_product - (y_new[1] + y_new[2] + y_new[3])) / 3.0;
            if shift != 0.0 {
                for v in &mut y_new[1..] {
                    *v += shift;
                }
                y_new[0] = 0.0;
                k_new = rhs(&y_new)?;
            }
        }
        if lands {
            rec.push(horizon, &y_new, true);
            break Terminal::ReachedTmax;
        }
        clock.advance(out.y[0]);
        y_new[0] = 0.0;
        y = y_new;
        k1 = k_new;
        h = ctrl.accept(h, out.err);
    };

    let mut traj = Trajectory { spec: *spec, samples: rec.samples, terminal, t_plus_estimate: None, stats };
    if terminal == Terminal::BlowupCeiling {
        traj.t_plus_estimate = estimate_blowup_time(&traj).ok().map(|e| e.t_plus);
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn emit_events(
    rec: &mut Recorder<'_>,
    dense: &Dense,
    clock: &Clock,
    theta_stop: f64,
    step_end_t: f64,
    next_grid: &mut usize,
    n_grid: usize,
    grid_time: &impl Fn(usize) -> f64,
    level_record: &mut i64,
    level_step: f64,
) {
    let mut events: Vec<(f64, Option<f64>)> = Vec::new();

    while *next_grid <= n_grid {
        let tg = grid_time(*next_grid);
        if tg > step_end_t {
            break;
        }
        let theta = if tg == step_end_t {
            theta_stop
        } else {
            let target = clock.offset_to(tg);
            bisect_root(|th| dense.eval(th)[0] - target, 0.0, theta_stop)
        };
        events.push((theta, Some(tg)));
        *next_grid += 1;
    }

    let peak = max_log(&dense.eval(theta_stop));
    loop {
        let level = (*level_record + 1) as f64 * level_step;
        if level > peak {
            break;
        }
        let theta = bisect_root(|th| max_log(&dense.eval(th)) - level, 0.0, theta_stop);
        if theta < theta_stop {
            events.push((theta, None));
        }
        *level_record += 1;
    }

    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (theta, exact_t) in events {
        let yv = dense.eval(theta);
        let t = exact_t.unwrap_or_else(|| clock.at(yv[0]));
        rec.push(t, &yv, false);
    }
}
