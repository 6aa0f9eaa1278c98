//! Asymptotic fits, SL(2,R) classification, invariant checks and sub-Riemannian limits.

mod fit;
mod invariants;
mod limit;
mod sl2r;

pub use fit::{
    estimate_eta, fit_exponents, CoefficientFit, EtaEstimate, ExponentFit, Interval, Window, FIT_DECADES,
    FIT_GUARD_DECADES, TAU_CEILING, TAU_FLOOR,
};
pub use invariants::{invariant_report, InvariantCheck, InvariantReport, CONSERVED_SLACK, DRIFT_SLACK, ORDER_SLACK};
pub use limit::{reference_coefficient, single_diverging_direction, subriemannian_limit, SubRiemannianLimit};
pub use sl2r::{
    absorbing_violations, classify_initial, classify_sl2r, locate_boundary, sl2r_time_bound, standard_family,
    trigger_gaps, Boundary, BoundaryOptions, MidpointReport, Sl2rClassification, Sl2rLabel,
};
