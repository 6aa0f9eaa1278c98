//! Closed-form solutions and asymptotic laws used as ground truth.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BianchiClass, MetricState};

/// `sqrt(6)/4`, the universal prefactor of a coefficient blowing up like `(T+ - t)^(-1/2)`.
pub const BLOWUP_PREFACTOR: f64 = 0.612_372_435_695_794_5;

/// Slope of the collapsing coefficient in the symmetric E(1,1) and S0 regimes.
pub const LINEAR_COLLAPSE_PREFACTOR: f64 = 32.0 / 3.0;

/// Relative tolerance used to decide that two initial coefficients coincide.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn coincide(x: f64, y: f64) -> bool {
    (x - y).abs() <= SYMMETRY_TOL * x.abs().max(y.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClosedFormSolution {
    NilExplicit { a0: f64, b0: f64, c0: f64 },
    E11Symmetric { a0: f64, b0: f64 },
    FixedPoint { state: MetricState },
}

impl ClosedFormSolution {
    /// Maximal interval of existence `(lo, hi)`; `lo` is closed for the E(1,1)
    /// solution, which starts at its initial time.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            ClosedFormSolution::NilExplicit { a0, b0, c0 } => {
                (3.0 / (16.0 * nil_initial_scalar(a0, b0, c0)), f64::INFINITY)
            }
            ClosedFormSolution::E11Symmetric { b0, .. } => (0.0, e11_blowup_time(b0)),
            ClosedFormSolution::FixedPoint { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn eval(&self, t: f64) -> Result<MetricState> {
        match *self {
            ClosedFormSolution::NilExplicit { a0, b0, c0 } => nil_solution(a0, b0, c0, t),
            ClosedFormSolution::E11Symmetric { a0, b0 } => e11_symmetric(a0, b0, t),
            ClosedFormSolution::FixedPoint { state } => Ok(MetricState { t, ..state }),
        }
    }
}

/// Initial scalar curvature `R0 = -2 A0 / (B0 C0)` of a Heisenberg metric.
pub fn nil_initial_scalar(a0: f64, b0: f64, c0: f64) -> f64 {
    -2.0 * a0 / (b0 * c0)
}

/// Explicit maximal solution of the forward normalized flow on the Heisenberg group.
pub fn nil_solution(a0: f64, b0: f64, c0: f64, t: f64) -> Result<MetricState> {
    MetricState::initial(a0, b0, c0).validate()?;
    let r0 = nil_initial_scalar(a0, b0, c0);
    let lo = 3.0 / (16.0 * r0);
    if !(t > lo) || !t.is_finite() {
        return Err(Error::DomainError { t, lo, hi: f64::INFINITY });
    }
    let base = 1.0 - 16.0 / 3.0 * r0 * t;
    let quarter = base.powf(0.25);
    Ok(MetricState::new(t, a0 / base.sqrt(), b0 * quarter, c0 * quarter))
}

pub fn e11_blowup_time(b0: f64) -> f64 {
    3.0 / 32.0 * b0
}

/// Symmetric (`A = C`) E(1,1) solution of the positive flow in the product-4 gauge.
pub fn e11_symmetric(a0: f64, b0: f64, t: f64) -> Result<MetricState> {
    MetricState::initial(a0, b0, a0).validate()?;
    let t_plus = e11_blowup_time(b0);
    let expected_a0 = BLOWUP_PREFACTOR / t_plus.sqrt();
    if (a0 - expected_a0).abs() > 1e-12 * expected_a0 {
        return Err(Error::InconsistentInitialData(format!(
            "A0 = {a0} but a blow-up at T+ = {t_plus} requires A0 = {expected_a0} (A0^2 B0 = 4)"
        )));
    }
    if !(0.0..t_plus).contains(&t) {
        return Err(Error::DomainError { t, lo: 0.0, hi: t_plus });
    }
    let rem = t_plus - t;
    let a = BLOWUP_PREFACTOR / rem.sqrt();
    Ok(MetricState::new(t, a, LINEAR_COLLAPSE_PREFACTOR * rem, a))
}

/// Returns the initial state when it is a stationary point of the positive flow.
pub fn fixed_point(class: BianchiClass, s0: &MetricState) -> Option<MetricState> {
    let stationary = match class {
        BianchiClass::Su2 => coincide(s0.a, s0.b) && coincide(s0.b, s0.c),
        BianchiClass::E2 => coincide(s0.a, s0.b),
        _ => false,
    };
    stationary.then_some(*s0)
}

/// Which asymptotic regime a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    /// Stationary metric.
    Fixed,
    /// SU(2) with `A0 = B0 > C0`: immortal, `A ~ 8t/3`, `C ~ 9/(16 t^2)`.
    SymmetricPair,
    /// One coefficient blows up like `(T+ - t)^(-1/2)`, the others collapse like `(T+ - t)^(1/4)`.
    Generic,
    /// E(1,1) with `A0 = C0`: the explicit solution.
    E11Symmetric,
    /// SL(2,R), `A` blows up.
    Q1,
    /// SL(2,R), `B` blows up.
    Q2,
    /// SL(2,R) separatrix: `A` and `B` both blow up, `C` collapses linearly.
    S0,
    /// Heisenberg group under the positive flow.
    Heisenberg,
}

impl CaseLabel {
    pub fn tag(self) -> &'static str {
        match self {
            CaseLabel::Fixed => "fixed",
            CaseLabel::SymmetricPair => "symmetric_pair",
            CaseLabel::Generic => "generic",
            CaseLabel::E11Symmetric => "e11_symmetric",
            CaseLabel::Q1 => "q1",
            CaseLabel::Q2 => "q2",
            CaseLabel::S0 => "s0",
            CaseLabel::Heisenberg => "heisenberg",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Case of canonical initial data, when it can be read off before integrating.
/// SL(2,R) needs a trajectory (see `analyze::classify_sl2r`) and yields `None`.
pub fn initial_case(class: BianchiClass, s0: &MetricState) -> Option<CaseLabel> {
    if fixed_point(class, s0).is_some() {
        return Some(CaseLabel::Fixed);
    }
    match class {
        BianchiClass::Su2 if coincide(s0.a, s0.b) => Some(CaseLabel::SymmetricPair),
        BianchiClass::Su2 | BianchiClass::E2 => Some(CaseLabel::Generic),
        BianchiClass::E11 if coincide(s0.a, s0.c) => Some(CaseLabel::E11Symmetric),
        BianchiClass::E11 => Some(CaseLabel::Generic),
        BianchiClass::Nil => Some(CaseLabel::Heisenberg),
        BianchiClass::Sl2r => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivot {
    /// Power of `T+ - t`.
    BlowupTime,
    /// Power of `t` as `t -> infinity`.
    InfiniteTime,
}

/// `X ~ prefactor * pivot^exponent`; `prefactor` is `None` where only existence is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientLaw {
    pub exponent: f64,
    pub prefactor: Option<f64>,
}

impl CoefficientLaw {
    const fn new(exponent: f64, prefactor: Option<f64>) -> Self {
        CoefficientLaw { exponent, prefactor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLaw {
    pub a: CoefficientLaw,
    pub b: CoefficientLaw,
    pub c: CoefficientLaw,
    pub pivot: Pivot,
}

impl AsymptoticLaw {
    pub fn laws(&self) -> [CoefficientLaw; 3] {
        [self.a, self.b, self.c]
    }

    pub fn exponents(&self) -> [f64; 3] {
        [self.a.exponent, self.b.exponent, self.c.exponent]
    }

    /// Index of the coefficient that blows up (exponent -1/2), if exactly one does.
    pub fn blowup_index(&self) -> Option<usize> {
        let idx: Vec<usize> = (0..3).filter(|&i| self.exponents()[i] == -0.5).collect();
        (idx.len() == 1).then(|| idx[0])
    }
}

pub fn asymptotic_law(class: BianchiClass, case: CaseLabel) -> Result<AsymptoticLaw> {
    const BLOW: CoefficientLaw = CoefficientLaw::new(-0.5, Some(BLOWUP_PREFACTOR));
    const QUARTER: CoefficientLaw = CoefficientLaw::new(0.25, None);
    const LINEAR: CoefficientLaw = CoefficientLaw::new(1.0, Some(LINEAR_COLLAPSE_PREFACTOR));
    let blowup = |a, b, c| AsymptoticLaw { a, b, c, pivot: Pivot::BlowupTime };
    use BianchiClass::*;
    use CaseLabel::*;
    match (class, case) {
        (Su2 | E11 | E2, Generic) | (Sl2r, Q1) | (Nil, Heisenberg) => Ok(blowup(BLOW, QUARTER, QUARTER)),
        (Sl2r, Q2) => Ok(blowup(QUARTER, BLOW, QUARTER)),
        (Sl2r, S0) => Ok(blowup(BLOW, BLOW, LINEAR)),
        (E11, E11Symmetric) => Ok(blowup(BLOW, LINEAR, BLOW)),
        (Su2, SymmetricPair) => {
            let grow = CoefficientLaw::new(1.0, Some(8.0 / 3.0));
            Ok(AsymptoticLaw {
                a: grow,
                b: grow,
                c: CoefficientLaw::new(-2.0, Some(9.0 / 16.0)),
                pivot: Pivot::InfiniteTime,
            })
        }
        _ => Err(Error::UnknownCase(format!("{class} / {case}"))),
    }
}
