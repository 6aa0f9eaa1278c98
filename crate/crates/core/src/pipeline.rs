//! One simulation end to end: canonical gauge, integration, analysis, summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analyze::{
    classify_sl2r, estimate_eta, fit_exponents, invariant_report, subriemannian_limit, Interval, InvariantReport,
    Sl2rClassification, Sl2rLabel,
};
use crate::error::Result;
use crate::flow::{FlowDirection, FlowSpec};
use crate::geometry::BianchiClass;
use crate::integrate::{canonicalize_with, integrate, Canonicalization, Controls, Trajectory};
use crate::oracle::{initial_case, CaseLabel};

pub const SUMMARY_VERSION: u32 = 1;
pub const DEFAULT_HORIZON: f64 = 100.0;
const NAMES: [&str; 3] = ["A", "B", "C"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRequest {
    pub class: BianchiClass,
    pub direction: FlowDirection,
    pub initial: [f64; 3],
    /// End time in the canonical gauge.
    pub horizon: f64,
    pub controls: Controls,
    pub allow_swap: bool,
}

impl RunRequest {
    pub fn new(class: BianchiClass, direction: FlowDirection, initial: [f64; 3]) -> Self {
        RunRequest {
            class,
            direction,
            initial,
            horizon: DEFAULT_HORIZON,
            controls: Controls::default(),
            allow_swap: true,
        }
    }
}

/// Values keyed by coefficient name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Abc {
    pub A: f64,
    pub B: f64,
    pub C: f64,
}

impl From<[f64; 3]> for Abc {
    fn from(x: [f64; 3]) -> Self {
        Abc { A: x[0], B: x[1], C: x[2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSummary {
    pub eta1: Interval,
    pub eta2: Interval,
    /// Coefficients the two prefactors belong to.
    pub directions: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub reference: String,
    pub coeffs: BTreeMap<String, f64>,
    pub dual: BTreeMap<String, f64>,
    /// Relative spread of the rescaled coefficients over the final decade.
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub t: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

/// Run summary. All times and coefficients are in the canonical gauge
/// (product 4, permuted frame); `lambda` and `permutation` map back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub class: String,
    pub direction: String,
    pub initial: [f64; 3],
    pub lambda: f64,
    pub permutation: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    pub terminal: String,
    pub horizon: f64,
    #[serde(rename = "final")]
    pub final_state: FinalState,
    pub samples: usize,
    pub max_product_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Abc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactors: Option<Abc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<Abc>,
    /// Range of `T+ - t` the exponents were fitted over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sl2r_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sl2r_trigger_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitSummary>,
    pub invariants_passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_invariants: Vec<String>,
}

impl Summary {
    /// One-line verdict: class, case, blow-up time and exponents.
    pub fn verdict(&self) -> String {
        let mut line = format!("{} {}", self.class, self.case.as_deref().unwrap_or("-"));
        if let Some(label) = &self.sl2r_label {
            line.push_str(&format!(" [{label}]"));
        }
        line.push_str(&format!(" terminal={}", self.terminal));
        match self.t_plus {
            Some(t) => line.push_str(&format!(" T+={t:.10}")),
            None => line.push_str(&format!(" t_end={:.6}", self.final_state.t)),
        }
        if let Some(e) = &self.exponents {
            line.push_str(&format!(" exponents=({:.4}, {:.4}, {:.4})", e.A, e.B, e.C));
        }
        if !self.invariants_passed {
            line.push_str(&format!(" invariant failures: {}", self.failed_invariants.join(",")));
        }
        line
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub canonical: Canonicalization,
    pub case: Option<CaseLabel>,
    pub trajectory: Trajectory,
    pub sl2r: Option<Sl2rClassification>,
    pub invariants: InvariantReport,
    pub summary: Summary,
}

fn sl2r_case(label: Sl2rLabel) -> CaseLabel {
    match label {
        Sl2rLabel::Q1 => CaseLabel::Q1,
        Sl2rLabel::Q2 => CaseLabel::Q2,
        Sl2rLabel::Undetermined => CaseLabel::S0,
    }
}

pub fn run(req: &RunRequest) -> Result<RunOutput> {
    let [a, b, c] = req.initial;
    let canonical = canonicalize_with(req.class, a, b, c, req.allow_swap)?;
    let s0 = canonical.canonical_initial;
    let spec = FlowSpec::new(req.class, req.direction);
    let trajectory = integrate(&spec, &s0, req.horizon, &req.controls)?;

    let positive = req.direction == FlowDirection::PositiveNormalized;
    let sl2r = (req.class == BianchiClass::Sl2r && positive).then(|| classify_sl2r(&trajectory));
    let case = match (req.class, sl2r) {
        (BianchiClass::Sl2r, Some(cl)) => Some(sl2r_case(cl.label)),
        (BianchiClass::Sl2r, None) => None,
        (class, _) => initial_case(class, &s0),
    };
    let invariants = invariant_report(&trajectory);

    let last = *trajectory.last();
    let mut summary = Summary {
        version: SUMMARY_VERSION,
        class: req.class.tag().to_string(),
        direction: req.direction.tag().to_string(),
        initial: req.initial,
        lambda: canonical.lambda,
        permutation: canonical.permutation,
        case: case.map(|c| c.tag().to_string()),
        terminal: trajectory.terminal.tag().to_string(),
        horizon: req.horizon,
        final_state: FinalState { t: last.t, a: last.a, b: last.b, c: last.c },
        samples: trajectory.samples.len(),
        max_product_drift: trajectory.max_product_drift(),
        t_plus: trajectory.t_plus_estimate,
        exponents: None,
        prefactors: None,
        r_squared: None,
        fit_window: None,
        eta: None,
        sl2r_label: sl2r.map(|c| c.label.tag().to_string()),
        sl2r_trigger_time: sl2r.and_then(|c| c.trigger_time),
        limit: None,
        invariants_passed: invariants.passed(),
        failed_invariants: invariants.failures().map(|c| c.name.clone()).collect(),
    };

    if let Some(t_plus) = trajectory.t_plus_estimate {
        if let Ok(fit) = fit_exponents(&trajectory, t_plus) {
            summary.exponents = Some(fit.exponents().into());
            summary.prefactors = Some(fit.prefactors().into());
            summary.r_squared = Some(fit.coeffs.map(|c| c.r_squared).into());
            summary.fit_window = Some([fit.window.lo, fit.window.hi]);
        }
        if let Ok(eta) = estimate_eta(&trajectory, t_plus) {
            summary.eta = Some(EtaSummary {
                eta1: eta.eta1,
                eta2: eta.eta2,
                directions: eta.indices.map(|i| NAMES[i].to_string()),
            });
        }
        if let Some(case) = case {
            if let Ok(lim) = subriemannian_limit(&trajectory, t_plus, req.class, case) {
                let named = |v: [f64; 2]| -> BTreeMap<String, f64> {
                    lim.surviving.iter().zip(v).map(|(&i, x)| (NAMES[i].to_string(), x)).collect()
                };
                summary.limit = Some(LimitSummary {
                    reference: NAMES[lim.reference].to_string(),
                    coeffs: named(lim.limit_metric_coeffs),
                    dual: named(lim.dual_coeffs),
                    variation: lim.variation,
                });
            }
        }
    }

    Ok(RunOutput { canonical, case, trajectory, sl2r, invariants, summary })
}
