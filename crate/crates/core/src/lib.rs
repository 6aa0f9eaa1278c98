//! Normalized Ricci flow on the Bianchi-class homogeneous 3-geometries.
//!
//! Left-invariant metrics on SU(2), SL(2,R), E(1,1), E(2) and the Heisenberg
//! group are diagonal in a Milnor frame, `g = A f1⊗f1 + B f2⊗f2 + C f3⊗f3`,
//! and the volume-normalized Ricci flow reduces to an ODE in `(A, B, C)`.
//! The crate integrates that ODE forward and backward (the "positive" flow),
//! detects finite-time blow-up, fits asymptotic exponents and prefactors,
//! classifies SL(2,R) data and extracts the sub-Riemannian limit tensors.

// `!(x > y)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod integrate;
pub mod oracle;
pub mod parallel;
pub mod pipeline;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use flow::{FlowDirection, FlowSpec, RhsRoute, StateDerivative};
pub use geometry::{BianchiClass, Curvatures, MetricState};
pub use integrate::{integrate, Controls, Terminal, Trajectory};
pub use oracle::CaseLabel;
