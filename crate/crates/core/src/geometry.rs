//! Bianchi classes, Milnor-frame metrics and their curvature tables.
//!
//! Each class carries a fixed triple of structure signs `(e1, e2, e3)` with the
//! bracket convention `[f2,f3] = 2 e1 f1`, `[f3,f1] = 2 e2 f2`, `[f1,f2] = 2 e3 f3`.
//! Curvatures are evaluated per class exactly as tabulated, without passing
//! through a generic Milnor formula, so every line can be audited against the
//! table it came from.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BianchiClass {
    Su2,
    Sl2r,
    E11,
    E2,
    Nil,
}

impl BianchiClass {
    pub const ALL: [BianchiClass; 5] =
        [BianchiClass::Su2, BianchiClass::Sl2r, BianchiClass::E11, BianchiClass::E2, BianchiClass::Nil];

    pub fn structure_signs(self) -> (i8, i8, i8) {
        match self {
            BianchiClass::Su2 => (1, 1, 1),
            BianchiClass::Sl2r => (-1, 1, 1),
            BianchiClass::E11 => (1, 0, -1),
            BianchiClass::E2 => (1, 1, 0),
            BianchiClass::Nil => (1, 0, 0),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            BianchiClass::Su2 => "su2",
            BianchiClass::Sl2r => "sl2r",
            BianchiClass::E11 => "e11",
            BianchiClass::E2 => "e2",
            BianchiClass::Nil => "nil",
        }
    }
}

impl fmt::Display for BianchiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BianchiClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "su2" => Ok(BianchiClass::Su2),
            "sl2r" => Ok(BianchiClass::Sl2r),
            "e11" | "sol" => Ok(BianchiClass::E11),
            "e2" => Ok(BianchiClass::E2),
            "nil" | "heisenberg" => Ok(BianchiClass::Nil),
            other => Err(Error::InvalidInput(format!("unknown class '{other}'"))),
        }
    }
}

/// Diagonal metric `A f1⊗f1 + B f2⊗f2 + C f3⊗f3` at flow time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricState {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MetricState {
    pub fn new(t: f64, a: f64, b: f64, c: f64) -> Self {
        MetricState { t, a, b, c }
    }

    /// State at `t = 0`.
    pub fn initial(a: f64, b: f64, c: f64) -> Self {
        MetricState::new(0.0, a, b, c)
    }

    pub fn coeffs(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn product(&self) -> f64 {
        self.a * self.b * self.c
    }

    pub fn is_valid(&self) -> bool {
        self.t.is_finite() && self.coeffs().iter().all(|x| x.is_finite() && *x > 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "metric coefficients must be finite and positive, got ({}, {}, {}) at t = {}",
                self.a, self.b, self.c, self.t
            )))
        }
    }
}

/// Sectional curvatures of the three coordinate planes and the scalar curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curvatures {
    pub k23: f64,
    pub k31: f64,
    pub k12: f64,
    pub r: f64,
}

impl Curvatures {
    fn from_planes(k23: f64, k31: f64, k12: f64) -> Self {
        Curvatures { k23, k31, k12, r: 2.0 * (k23 + k31 + k12) }
    }
}

pub fn sectional_curvatures(class: BianchiClass, s: &MetricState) -> Curvatures {
    let (a, b, c) = (s.a, s.b, s.c);
    let abc = a * b * c;
    match class {
        BianchiClass::Su2 => Curvatures::from_planes(
            (b - c).powi(2) / abc - 3.0 * a / (b * c) + 2.0 / b + 2.0 / c,
            (c - a).powi(2) / abc - 3.0 * b / (c * a) + 2.0 / a + 2.0 / c,
            (a - b).powi(2) / abc - 3.0 * c / (a * b) + 2.0 / a + 2.0 / b,
        ),
        BianchiClass::E11 => Curvatures::from_planes(
            ((a - c).powi(2) - 4.0 * a * a) / abc,
            (a + c).powi(2) / abc,
            ((a - c).powi(2) - 4.0 * c * c) / abc,
        ),
        BianchiClass::E2 => {
            Curvatures::from_planes((b - a) * (b + 3.0 * a) / abc, (a - b) * (a + 3.0 * b) / abc, (a - b).powi(2) / abc)
        }
        BianchiClass::Sl2r => Curvatures::from_planes(
            (-3.0 * a * a + b * b + c * c - 2.0 * b * c - 2.0 * a * c - 2.0 * a * b) / abc,
            (-3.0 * b * b + a * a + c * c + 2.0 * b * c + 2.0 * a * c - 2.0 * a * b) / abc,
            (-3.0 * c * c + a * a + b * b + 2.0 * b * c - 2.0 * a * c + 2.0 * a * b) / abc,
        ),
        // Only f1 is a bracket; scalar curvature -2A/(BC).
        BianchiClass::Nil => Curvatures::from_planes(-3.0 * a / (b * c), a / (b * c), a / (b * c)),
    }
}

pub fn scalar_curvature(class: BianchiClass, s: &MetricState) -> f64 {
    sectional_curvatures(class, s).r
}
