use serde::{Deserialize, Serialize};

use super::{integrate, Controls, Trajectory};
use crate::error::{Error, Result};
use crate::flow::{FlowDirection, FlowSpec, RhsRoute, CANONICAL_PRODUCT};
use crate::geometry::{BianchiClass, MetricState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    /// Largest `|X~(t) - lambda X(t/lambda)| / (lambda X(t/lambda))` over matched samples.
    pub max_rel_deviation: f64,
    pub compared: usize,
}

/// Sample recorded exactly at grid time `t`; a ceiling stop is excluded because it
/// sits at a different rescaled height in the two runs.
fn grid_sample(traj: &Trajectory, t: f64) -> Option<&MetricState> {
    let samples = match traj.terminal {
        super::Terminal::BlowupCeiling => &traj.samples[..traj.samples.len() - 1],
        _ => &traj.samples[..],
    };
    let idx = samples.partition_point(|s| s.state.t < t);
    samples.get(idx).map(|s| &s.state).filter(|s| s.t == t)
}

/// Compare a run from `lambda * s0` against the rescaled canonical run from `s0`.
///
/// The canonical side uses the product-4 gauge and `c.route`; the scaled side is
/// integrated from the curvature tables at product `4 lambda^3`, so it does not
/// share the polynomial systems with the canonical run. Both runs use the same
/// number of grid intervals, which puts their uniform samples at `t` and `t/lambda`.
pub fn scaling_check(
    class: BianchiClass,
    direction: FlowDirection,
    s0: &MetricState,
    lambda: f64,
    horizon: f64,
    c: &Controls,
) -> Result<ScalingReport> {
    if !(0.1..=10.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda {lambda} outside [0.1, 10]")));
    }
    let spec = FlowSpec::new(class, direction);
    let base = integrate(&spec, s0, horizon / lambda, c)?;

    let scaled_spec = spec.with_product(CANONICAL_PRODUCT * lambda.powi(3));
    let scaled_s0 = MetricState::initial(lambda * s0.a, lambda * s0.b, lambda * s0.c);
    let scaled_controls = Controls { route: RhsRoute::Curvature, ..*c };
    let scaled = integrate(&scaled_spec, &scaled_s0, horizon, &scaled_controls)?;

    let mut worst = 0.0f64;
    let mut compared = 0;
    let n = c.max_samples;
    for k in 1..=n {
        let grid = |t0: f64, end: f64| if k == n { end } else { t0 + k as f64 * ((end - t0) / n as f64) };
        let (Some(s), Some(reference)) =
            (grid_sample(&scaled, grid(scaled_s0.t, horizon)), grid_sample(&base, grid(s0.t, horizon / lambda)))
        else {
            continue;
        };
        for (x, r) in s.coeffs().iter().zip(reference.coeffs()) {
            let expected = lambda * r;
            worst = worst.max((x - expected).abs() / expected);
        }
        compared += 1;
    }
    if compared < 2 {
        return Err(Error::InsufficientData("no common grid samples between the two runs".into()));
    }
    Ok(ScalingReport { lambda, max_rel_deviation: worst, compared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_only_sees_route_roundoff() {
        let s0 = MetricState::initial(2.0, 1.6, 1.25);
        let r =
            scaling_check(BianchiClass::Su2, FlowDirection::PositiveNormalized, &s0, 1.0, 0.1, &Controls::default())
                .unwrap();
        assert!(r.max_rel_deviation <= 1e-10, "{}", r.max_rel_deviation);
        assert!(r.compared > 100);
    }

    #[test]
    fn su2_half_scale() {
        let s0 = MetricState::initial(2.0, 1.6, 1.25);
        let r =
            scaling_check(BianchiClass::Su2, FlowDirection::PositiveNormalized, &s0, 0.5, 0.1, &Controls::default())
                .unwrap();
        assert!(r.max_rel_deviation <= 1e-6, "{}", r.max_rel_deviation);
    }

    #[test]
    fn lambda_out_of_range() {
        let s0 = MetricState::initial(2.0, 1.6, 1.25);
        let err =
            scaling_check(BianchiClass::Su2, FlowDirection::PositiveNormalized, &s0, 20.0, 0.1, &Controls::default());
        assert!(err.is_err());
    }
}
