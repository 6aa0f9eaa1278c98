//! Right-hand sides of the volume-normalized Ricci flow in a Milnor frame.
//!
//! The positive flow `dg/dt = 2 Rc - (2/3) R g` is the time reversal of the
//! forward normalized flow `dg/dt = -2 Rc + (2/3) R g`. Both preserve the
//! product `ABC`. The polynomial systems below are the product-4 gauge; any
//! other product `P` rescales them by `4/P` (every term is a cubic over `ABC`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sectional_curvatures, BianchiClass, MetricState};

/// Product of the metric coefficients in the canonical gauge.
pub const CANONICAL_PRODUCT: f64 = 4.0;

/// Relative tolerance on `ABC` before the RHS refuses to evaluate.
pub const PRODUCT_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// `dg/dt = -2 Rc + (2/3) R g`
    #[serde(rename = "forward")]
    ForwardNormalized,
    /// `dg/dt = 2 Rc - (2/3) R g`
    #[serde(rename = "positive")]
    PositiveNormalized,
}

impl FlowDirection {
    pub fn tag(self) -> &'static str {
        match self {
            FlowDirection::ForwardNormalized => "forward",
            FlowDirection::PositiveNormalized => "positive",
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            FlowDirection::ForwardNormalized => FlowDirection::PositiveNormalized,
            FlowDirection::PositiveNormalized => FlowDirection::ForwardNormalized,
        }
    }
}

impl fmt::Display for FlowDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FlowDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(FlowDirection::ForwardNormalized),
            "positive" | "backward" => Ok(FlowDirection::PositiveNormalized),
            other => Err(Error::InvalidInput(format!("unknown direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub class: BianchiClass,
    pub direction: FlowDirection,
    pub product: f64,
}

impl FlowSpec {
    pub fn new(class: BianchiClass, direction: FlowDirection) -> Self {
        FlowSpec { class, direction, product: CANONICAL_PRODUCT }
    }

    pub fn positive(class: BianchiClass) -> Self {
        FlowSpec::new(class, FlowDirection::PositiveNormalized)
    }

    pub fn forward(class: BianchiClass) -> Self {
        FlowSpec::new(class, FlowDirection::ForwardNormalized)
    }

    pub fn with_product(mut self, product: f64) -> Self {
        self.product = product;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.product.is_finite() && self.product > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("product must be positive, got {}", self.product)))
        }
    }

    pub fn check_product(&self, s: &MetricState) -> Result<()> {
        let p = s.product();
        if (p - self.product).abs() <= PRODUCT_GUARD * self.product {
            Ok(())
        } else {
            Err(Error::NormalizationViolation { product: p, expected: self.product })
        }
    }
}

/// Which algebraic route evaluates the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RhsRoute {
    /// The tabulated polynomial systems.
    #[default]
    Polynomial,
    /// Assembled from the sectional curvature tables.
    Curvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDerivative {
    pub da: f64,
    pub db: f64,
    pub dc: f64,
}

impl StateDerivative {
    pub fn as_array(&self) -> [f64; 3] {
        [self.da, self.db, self.dc]
    }

    fn scaled(self, k: f64) -> Self {
        StateDerivative { da: k * self.da, db: k * self.db, dc: k * self.dc }
    }

    /// `dA/A + dB/B + dC/C`, zero for a volume-preserving flow.
    pub fn log_volume_rate(&self, s: &MetricState) -> f64 {
        self.da / s.a + self.db / s.b + self.dc / s.c
    }
}

/// Positive-flow polynomial system in the product-4 gauge.
fn positive_polynomial(class: BianchiClass, s: &MetricState) -> StateDerivative {
    let (a, b, c) = (s.a, s.b, s.c);
    const TWO_THIRDS: f64 = 2.0 / 3.0;
    match class {
        BianchiClass::Su2 => StateDerivative {
            da: -TWO_THIRDS * a * (-a * (2.0 * a - b - c) + (b - c).powi(2)),
            db: -TWO_THIRDS * b * (-b * (2.0 * b - a - c) + (a - c).powi(2)),
            dc: -TWO_THIRDS * c * (-c * (2.0 * c - a - b) + (a - b).powi(2)),
        },
        BianchiClass::E11 => StateDerivative {
            da: TWO_THIRDS * a * (2.0 * a * a + a * c - c * c),
            db: -TWO_THIRDS * b * (a + c).powi(2),
            dc: TWO_THIRDS * c * (2.0 * c * c + a * c - a * a),
        },
        BianchiClass::E2 => StateDerivative {
            da: TWO_THIRDS * a * (2.0 * a + b) * (a - b),
            db: -TWO_THIRDS * b * (2.0 * b + a) * (a - b),
            dc: -TWO_THIRDS * c * (a - b).powi(2),
        },
        BianchiClass::Sl2r => StateDerivative {
            da: -TWO_THIRDS * (-a * a * (2.0 * a + b + c) + a * (b - c).powi(2)),
            db: -TWO_THIRDS * (-b * b * (2.0 * b + a - c) + b * (a + c).powi(2)),
            dc: -TWO_THIRDS * (-c * c * (2.0 * c + a - b) + c * (a + b).powi(2)),
        },
        // Sign flip of the forward Heisenberg system with A0 B0 C0 = 4.
        BianchiClass::Nil => {
            let forward = nil_forward(s, CANONICAL_PRODUCT);
            forward.scaled(-1.0)
        }
    }
}

/// Forward Heisenberg system with the initial product as denominator.
fn nil_forward(s: &MetricState, product: f64) -> StateDerivative {
    let a2 = s.a * s.a;
    StateDerivative {
        da: -16.0 / 3.0 * a2 * s.a / product,
        db: 8.0 / 3.0 * a2 * s.b / product,
        dc: 8.0 / 3.0 * a2 * s.c / product,
    }
}

/// Flow velocity from the tabulated polynomial systems.
pub fn rhs(spec: &FlowSpec, s: &MetricState) -> Result<StateDerivative> {
    spec.check_product(s)?;
    if spec.class == BianchiClass::Nil {
        let forward = nil_forward(s, spec.product);
        return Ok(match spec.direction {
            FlowDirection::ForwardNormalized => forward,
            FlowDirection::PositiveNormalized => forward.scaled(-1.0),
        });
    }
    let gauge = CANONICAL_PRODUCT / spec.product;
    let positive = positive_polynomial(spec.class, s);
    let positive = if gauge == 1.0 { positive } else { positive.scaled(gauge) };
    Ok(match spec.direction {
        FlowDirection::PositiveNormalized => positive,
        FlowDirection::ForwardNormalized => positive.scaled(-1.0),
    })
}

/// Flow velocity assembled from sectional curvatures:
/// `dX/dt = ±[2 X (K_i + K_j) - (2/3) R X]` over the two planes containing `f_X`.
pub fn rhs_from_curvatures(spec: &FlowSpec, s: &MetricState) -> Result<StateDerivative> {
    spec.check_product(s)?;
    let k = sectional_curvatures(spec.class, s);
    let third = 2.0 / 3.0 * k.r;
    let positive = StateDerivative {
        da: 2.0 * s.a * (k.k12 + k.k31) - third * s.a,
        db: 2.0 * s.b * (k.k12 + k.k23) - third * s.b,
        dc: 2.0 * s.c * (k.k23 + k.k31) - third * s.c,
    };
    Ok(match spec.direction {
        FlowDirection::PositiveNormalized => positive,
        FlowDirection::ForwardNormalized => positive.scaled(-1.0),
    })
}

pub fn evaluate(route: RhsRoute, spec: &FlowSpec, s: &MetricState) -> Result<StateDerivative> {
    match route {
        RhsRoute::Polynomial => rhs(spec, s),
        RhsRoute::Curvature => rhs_from_curvatures(spec, s),
    }
}

/// Rates of the pairwise differences for SU(2) under the positive flow
/// (product-4 gauge), returned as `(d(A-B), d(A-C), d(B-C))`.
pub fn difference_rates(s: &MetricState) -> (f64, f64, f64) {
    let (a, b, c) = (s.a, s.b, s.c);
    let sum = a + b + c;
    let k = 2.0 / 3.0;
    let d_ab = k * (a - b) * (2.0 * a * a + 2.0 * a * b + 2.0 * b * b - sum * c);
    let d_ac = k * (a - c) * (2.0 * a * a + 2.0 * a * c + 2.0 * c * c - sum * b);
    let d_bc = k * (b - c) * (2.0 * b * b + 2.0 * b * c + 2.0 * c * c - sum * a);
    (d_ab, d_ac, d_bc)
}
