use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::CANONICAL_PRODUCT;
use crate::geometry::{BianchiClass, MetricState};

/// `canonical[i] = input[perm[i]] / lambda`.
pub type Permutation = [usize; 3];

pub const IDENTITY: Permutation = [0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canonicalization {
    pub lambda: f64,
    pub permutation: Permutation,
    pub canonical_initial: MetricState,
}

impl Canonicalization {
    /// Map a canonical-gauge state back to the caller's frame and scale
    /// (`X(t) = lambda * X_canonical(t / lambda)`).
    pub fn to_original(&self, s: &MetricState) -> MetricState {
        let canon = s.coeffs();
        let mut orig = [0.0; 3];
        for (i, &src) in self.permutation.iter().enumerate() {
            orig[src] = self.lambda * canon[i];
        }
        MetricState::new(self.lambda * s.t, orig[0], orig[1], orig[2])
    }
}

/// Permutations that are bracket symmetries of the class.
fn allowed(class: BianchiClass) -> &'static [Permutation] {
    match class {
        BianchiClass::Su2 => &[[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]],
        BianchiClass::E11 => &[[0, 1, 2], [2, 1, 0]],
        BianchiClass::E2 => &[[0, 1, 2], [1, 0, 2]],
        BianchiClass::Sl2r => &[[0, 1, 2], [0, 2, 1]],
        BianchiClass::Nil => &[[0, 1, 2]],
    }
}

/// Ordering hypothesis each class's asymptotic analysis is stated under.
fn ordered(class: BianchiClass, x: [f64; 3]) -> bool {
    match class {
        BianchiClass::Su2 => x[0] >= x[1] && x[1] >= x[2],
        BianchiClass::E11 => x[0] >= x[2],
        BianchiClass::E2 => x[0] >= x[1],
        BianchiClass::Sl2r => x[1] >= x[2],
        BianchiClass::Nil => true,
    }
}

pub fn canonicalize(class: BianchiClass, a0: f64, b0: f64, c0: f64) -> Result<Canonicalization> {
    canonicalize_with(class, a0, b0, c0, true)
}

/// Rescale to product 4 and, if `allow_swap`, relabel the frame by a bracket
/// symmetry so the class's ordering hypothesis holds. Data that still violates
/// the ordering is rejected.
pub fn canonicalize_with(class: BianchiClass, a0: f64, b0: f64, c0: f64, allow_swap: bool) -> Result<Canonicalization> {
    MetricState::initial(a0, b0, c0).validate()?;
    let lambda = (a0 * b0 * c0 / CANONICAL_PRODUCT).cbrt();
    let input = [a0, b0, c0];
    let perms: &[Permutation] = if allow_swap { allowed(class) } else { &[IDENTITY] };
    let permutation = perms.iter().copied().find(|p| ordered(class, p.map(|i| input[i]))).ok_or_else(|| {
        Error::InvalidInput(format!("({a0}, {b0}, {c0}) violates the {class} ordering and frame swaps are disabled"))
    })?;
    let x = permutation.map(|i| input[i] / lambda);
    Ok(Canonicalization { lambda, permutation, canonical_initial: MetricState::initial(x[0], x[1], x[2]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su2_rescale_only() {
        let c = canonicalize(BianchiClass::Su2, 4.0, 3.2, 2.5).unwrap();
        assert!((c.lambda - 2.0).abs() < 1e-15);
        assert_eq!(c.permutation, IDENTITY);
        let s = c.canonical_initial;
        assert!((s.a - 2.0).abs() < 1e-15 && (s.b - 1.6).abs() < 1e-15 && (s.c - 1.25).abs() < 1e-15);
    }

    #[test]
    fn su2_reverses_ascending_data() {
        let c = canonicalize(BianchiClass::Su2, 1.25, 1.6, 2.0).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-15);
        assert_eq!(c.permutation, [2, 1, 0]);
        assert_eq!(c.canonical_initial.a, 2.0 / c.lambda);
    }

    #[test]
    fn e11_swaps_a_and_c() {
        let c = canonicalize(BianchiClass::E11, 1.0, 1.0, 4.0).unwrap();
        assert_eq!(c.permutation, [2, 1, 0]);
        assert_eq!(c.canonical_initial.coeffs(), [4.0, 1.0, 1.0]);
    }

    #[test]
    fn sl2r_swaps_b_and_c_unless_disabled() {
        let c = canonicalize(BianchiClass::Sl2r, 1.0, 1.0, 4.0).unwrap();
        assert_eq!(c.permutation, [0, 2, 1]);
        assert!(canonicalize_with(BianchiClass::Sl2r, 1.0, 1.0, 4.0, false).is_err());
    }

    #[test]
    fn round_trip_to_original() {
        let c = canonicalize(BianchiClass::Su2, 1.0, 3.0, 2.0).unwrap();
        let back = c.to_original(&c.canonical_initial);
        assert!((back.a - 1.0).abs() < 1e-14);
        assert!((back.b - 3.0).abs() < 1e-14);
        assert!((back.c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(canonicalize(BianchiClass::Nil, 0.0, 1.0, 1.0).is_err());
        assert!(canonicalize(BianchiClass::Nil, -1.0, 1.0, 1.0).is_err());
    }
}
