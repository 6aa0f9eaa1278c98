use serde::{Deserialize, Serialize};

use super::fit::{estimate_eta, fit_exponents, Interval, TAU_CEILING, TAU_FLOOR};
use crate::error::{Error, Result};
use crate::geometry::{BianchiClass, MetricState};
use crate::integrate::Trajectory;
use crate::oracle::CaseLabel;

/// Limit of the rescaled metric `(X_ref(0) / X_ref(t)) g(t)` on the two
/// directions that stay finite, together with the dual (co)metric on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubRiemannianLimit {
    /// Coefficient held fixed by the rescaling (0 = A, 1 = B, 2 = C).
    pub reference: usize,
    /// The two surviving directions in increasing index order.
    pub surviving: [usize; 2],
    pub limit_metric_coeffs: [f64; 2],
    pub dual_coeffs: [f64; 2],
    /// Index of the direction that degenerates.
    pub diverging: usize,
    /// Largest `(max - min) / median` of a rescaled surviving coefficient over the final decade.
    pub variation: f64,
    /// Whether the rescaled diverging coefficient grows at every sample of the final decade.
    pub diverges_monotonically: bool,
    pub eta_ratio: Option<Interval>,
}

/// Coefficient kept fixed by the rescaling for each blow-up case.
pub fn reference_coefficient(class: BianchiClass, case: CaseLabel) -> Result<usize> {
    match (class, case) {
        (BianchiClass::Su2 | BianchiClass::E11 | BianchiClass::E2, CaseLabel::Generic) => Ok(1),
        (BianchiClass::Sl2r, CaseLabel::Q1) | (BianchiClass::Nil, CaseLabel::Heisenberg) => Ok(2),
        (BianchiClass::Sl2r, CaseLabel::Q2) => Ok(0),
        (BianchiClass::Sl2r, CaseLabel::S0) => Err(Error::WrongCase(
            "two coefficients blow up on the separatrix; no rescaling keeps a rank-two limit".into(),
        )),
        _ => Err(Error::WrongCase(format!("{class} case {} has no single diverging direction", case.tag()))),
    }
}

/// Diverging direction for each blow-up case.
fn diverging_coefficient(class: BianchiClass, case: CaseLabel) -> usize {
    match (class, case) {
        (BianchiClass::Sl2r, CaseLabel::Q2) => 1,
        _ => 0,
    }
}

/// Samples from the final decade of `T+ - t` that the samples resolve.
fn final_decade(traj: &Trajectory, t_plus: f64) -> Vec<&MetricState> {
    let inside: Vec<&MetricState> =
        traj.states().filter(|s| (TAU_FLOOR..=TAU_CEILING).contains(&(t_plus - s.t))).collect();
    let Some(tau_min) = inside.iter().map(|s| t_plus - s.t).reduce(f64::min) else {
        return inside;
    };
    inside.into_iter().filter(|s| t_plus - s.t <= 10.0 * tau_min).collect()
}

pub fn subriemannian_limit(
    traj: &Trajectory,
    t_plus: f64,
    class: BianchiClass,
    case: CaseLabel,
) -> Result<SubRiemannianLimit> {
    let reference = reference_coefficient(class, case)?;
    let diverging = diverging_coefficient(class, case);
    let surviving = match diverging {
        0 => [1, 2],
        _ => [0, 2],
    };

    let decade = final_decade(traj, t_plus);
    if decade.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the final resolved decade before T+",
            decade.len()
        )));
    }
    let x0 = traj.first().coeffs()[reference];
    let rescaled = |s: &MetricState, i: usize| x0 / s.coeffs()[reference] * s.coeffs()[i];

    let mut limit_metric_coeffs = [0.0; 2];
    let mut variation = 0.0f64;
    for (slot, &i) in surviving.iter().enumerate() {
        let iv = Interval::from_samples(decade.iter().map(|s| rescaled(s, i)).collect())
            .ok_or_else(|| Error::InsufficientData("empty decade".into()))?;
        if !(iv.value > 0.0 && iv.value.is_finite()) {
            return Err(Error::WrongCase(format!("rescaled coefficient {i} has no positive limit")));
        }
        limit_metric_coeffs[slot] = iv.value;
        variation = variation.max(iv.relative_width());
    }
    let diverges_monotonically = decade.windows(2).all(|w| rescaled(w[1], diverging) > rescaled(w[0], diverging));

    let eta_ratio = estimate_eta(traj, t_plus).ok().map(|e| e.ratio());
    Ok(SubRiemannianLimit {
        reference,
        surviving,
        limit_metric_coeffs,
        dual_coeffs: limit_metric_coeffs.map(|x| 1.0 / x),
        diverging,
        variation,
        diverges_monotonically,
        eta_ratio,
    })
}

/// Whether the fitted exponents single out exactly one diverging coefficient.
pub fn single_diverging_direction(traj: &Trajectory, t_plus: f64) -> Result<bool> {
    let fit = fit_exponents(traj, t_plus)?;
    Ok(fit.exponents().iter().filter(|&&e| e < -0.25).count() == 1)
}
